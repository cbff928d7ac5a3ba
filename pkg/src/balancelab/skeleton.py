"""Planar articulated-figure kinematics.

Skeletons are trees of rigid links in the sagittal plane: x forward, z up,
all angles CCW-positive, root pitch 0 = upright. Link frames sit at the
joint anchor (the root link's frame at the root position); geometry is
encoded by 2-vectors expressed in the owning link's frame, so a skeleton
standing upright at the zero pose is authored with (0, -L) style offsets.

The scalar `length` of a link is used for the thin-rod rotational inertia
(I = m L^2 / 12) and nothing else; collision and keypoint geometry always
come from explicit offsets.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path

import numpy as np

GRAVITY = 9.81

# Rotational inertia floor so point-like links stay integrable.
_MIN_ROD_INERTIA = 1e-5


def wrap_angle(a):
    """Map angles to (-pi, pi]."""
    return np.pi - np.mod(np.pi - np.asarray(a), 2.0 * np.pi)


def perp(v):
    """CCW quarter turn: the planar cross product `omega x v` with omega = 1.

    Works on (..., 2) arrays.
    """
    v = np.asarray(v)
    out = np.empty_like(v)
    out[..., 0] = -v[..., 1]
    out[..., 1] = v[..., 0]
    return out


def rotate(theta, v):
    """Rotate (..., 2) vectors by (...,) angles."""
    c, s = np.cos(theta), np.sin(theta)
    out = np.empty(np.broadcast_shapes(np.shape(theta) + (2,), np.shape(v)))
    out[..., 0] = c * v[..., 0] - s * v[..., 1]
    out[..., 1] = s * v[..., 0] + c * v[..., 1]
    return out


class SupportPhase(IntEnum):
    DOUBLE = 0
    LEFT = 1   # left foot only
    RIGHT = 2  # right foot only

    def to_json(self) -> str:
        return {0: "double", 1: "left", 2: "right"}[int(self)]

    @staticmethod
    def from_json(s: str) -> "SupportPhase":
        try:
            return {"double": SupportPhase.DOUBLE,
                    "left": SupportPhase.LEFT,
                    "right": SupportPhase.RIGHT}[s]
        except KeyError:
            raise ValueError(f"unknown support phase label {s!r}")


@dataclass(eq=False)
class LinkSpec:
    name: str
    mass: float                 # kg
    com_offset: np.ndarray      # (2,) m, link frame
    length: float               # m, rod length for inertia only


@dataclass(eq=False)
class JointSpec:
    name: str
    parent_link: str
    child_link: str
    attach_point: np.ndarray    # (2,) m, parent link frame
    angle_limits: tuple         # (lo, hi) rad
    vel_limit: float            # rad/s
    torque_limit: float         # N*m
    kp: float                   # N*m/rad
    kd: float                   # N*m*s/rad


@dataclass(eq=False)
class FootSpec:
    link: str
    heel_offset: np.ndarray     # (2,) m, foot link frame
    toe_offset: np.ndarray      # (2,) m, foot link frame


@dataclass(eq=False)
class KeypointSpec:
    name: str
    link: str
    offset: np.ndarray          # (2,) m, link frame


@dataclass(eq=False)
class SkeletonSpec:
    name: str
    links: list                 # [LinkSpec]
    joints: list                # [JointSpec], index order defines the DOF order
    base_link: str
    foot_links: list            # [FootSpec], [left, right]
    keypoints: list             # [KeypointSpec]
    default_pose: np.ndarray    # (J,) rad

    def __post_init__(self):
        self._tables = None

    # -- derived index tables, built once on first use ---------------------

    @property
    def tables(self) -> "_Tables":
        if self._tables is None:
            validate_skeleton(self)
            self._tables = _Tables(self)
        return self._tables

    @property
    def num_joints(self) -> int:
        return len(self.joints)

    @property
    def num_links(self) -> int:
        return len(self.links)

    @property
    def num_dof(self) -> int:
        return 3 + len(self.joints)

    def joint_index(self, name: str) -> int:
        return self.tables.joint_index[name]

    def link_index(self, name: str) -> int:
        return self.tables.link_index[name]

    def keypoint_names(self) -> list:
        return [k.name for k in self.keypoints]

    def joint_names(self) -> list:
        return [j.name for j in self.joints]


class _Tables:
    """Packed arrays and topology caches derived from a SkeletonSpec."""

    def __init__(self, skel: SkeletonSpec):
        L, J, K = len(skel.links), len(skel.joints), len(skel.keypoints)
        self.link_index = {l.name: i for i, l in enumerate(skel.links)}
        self.joint_index = {j.name: i for i, j in enumerate(skel.joints)}

        self.mass = np.array([l.mass for l in skel.links])
        self.com_offset = np.array([l.com_offset for l in skel.links], dtype=float)
        self.length = np.array([l.length for l in skel.links])
        self.inertia = np.maximum(self.mass * self.length**2 / 12.0, _MIN_ROD_INERTIA)

        self.joint_parent = np.array([self.link_index[j.parent_link] for j in skel.joints])
        self.joint_child = np.array([self.link_index[j.child_link] for j in skel.joints])
        self.attach = np.array([j.attach_point for j in skel.joints], dtype=float)
        self.angle_lo = np.array([j.angle_limits[0] for j in skel.joints])
        self.angle_hi = np.array([j.angle_limits[1] for j in skel.joints])
        self.vel_limit = np.array([j.vel_limit for j in skel.joints])
        self.torque_limit = np.array([j.torque_limit for j in skel.joints])
        self.kp = np.array([j.kp for j in skel.joints])
        self.kd = np.array([j.kd for j in skel.joints])

        self.base = self.link_index[skel.base_link]
        # parent joint of each link, -1 for the base
        self.parent_joint = np.full(L, -1)
        for j in range(J):
            self.parent_joint[self.joint_child[j]] = j
        # links in root-to-leaf order
        order, seen = [self.base], {self.base}
        while len(order) < L:
            for j in range(J):
                if self.joint_parent[j] in seen and self.joint_child[j] not in seen:
                    order.append(self.joint_child[j])
                    seen.add(self.joint_child[j])
        self.topo = np.array(order)

        # ancestry[l, j] = True when joint j sits between the base and link l
        self.ancestry = np.zeros((L, J), dtype=bool)
        for l in self.topo[1:]:
            j = self.parent_joint[l]
            self.ancestry[l] = self.ancestry[self.joint_parent[j]]
            self.ancestry[l, j] = True

        self.kp_link = np.array([self.link_index[k.link] for k in skel.keypoints]) \
            if K else np.zeros(0, dtype=int)
        self.kp_offset = np.array([k.offset for k in skel.keypoints], dtype=float) \
            if K else np.zeros((0, 2))

        self.foot_link = np.array([self.link_index[f.link] for f in skel.foot_links],
                                  dtype=int)
        # contact points: (heel_l, toe_l, heel_r, toe_r)
        self.contact_link = np.repeat(self.foot_link, 2)
        self.contact_offset = np.array(
            [o for f in skel.foot_links for o in (f.heel_offset, f.toe_offset)],
            dtype=float).reshape(-1, 2)


def validate_skeleton(skel: SkeletonSpec) -> None:
    """Raise ValueError when the skeleton is not a usable tree."""
    names = [l.name for l in skel.links]
    if len(set(names)) != len(names):
        raise ValueError("duplicate link names")
    jnames = [j.name for j in skel.joints]
    if len(set(jnames)) != len(jnames):
        raise ValueError("duplicate joint names")
    if skel.base_link not in names:
        raise ValueError(f"base link {skel.base_link!r} not among links")

    for l in skel.links:
        if l.mass <= 0:
            raise ValueError(f"link {l.name!r} must have positive mass, got {l.mass}")
        if l.length < 0:
            raise ValueError(f"link {l.name!r} has negative length")

    children = {}
    for j in skel.joints:
        for end in (j.parent_link, j.child_link):
            if end not in names:
                raise ValueError(f"joint {j.name!r} references unknown link {end!r}")
        if j.child_link == skel.base_link:
            raise ValueError(f"joint {j.name!r} makes the base link a child")
        if j.child_link in children:
            raise ValueError(f"link {j.child_link!r} has two parent joints")
        children[j.child_link] = j.name
        lo, hi = j.angle_limits
        if not lo < hi:
            raise ValueError(f"joint {j.name!r} limits must satisfy lo < hi, got {j.angle_limits}")
        if j.torque_limit <= 0 or j.vel_limit <= 0:
            raise ValueError(f"joint {j.name!r} needs positive torque and velocity limits")
        if j.kp < 0 or j.kd < 0:
            raise ValueError(f"joint {j.name!r} has negative PD gains")

    orphans = set(names) - {skel.base_link} - set(children)
    if orphans:
        raise ValueError(f"links {sorted(orphans)} are not connected to the tree")
    # connectivity (cycles among non-base links would leave the walk short)
    seen, frontier = {skel.base_link}, [skel.base_link]
    while frontier:
        cur = frontier.pop()
        for j in skel.joints:
            if j.parent_link == cur and j.child_link not in seen:
                seen.add(j.child_link)
                frontier.append(j.child_link)
    if seen != set(names):
        raise ValueError(f"links {sorted(set(names) - seen)} unreachable from the base")

    # bare chains (test rigs, pendulums) carry no feet; bipeds carry exactly two
    if len(skel.foot_links) not in (0, 2):
        raise ValueError("foot_links must be empty or (left, right)")
    parents = {j.parent_link for j in skel.joints}
    for f in skel.foot_links:
        if f.link not in names:
            raise ValueError(f"foot link {f.link!r} unknown")
        if f.link in parents:
            raise ValueError(f"foot link {f.link!r} must be a leaf")

    for k in skel.keypoints:
        if k.link not in names:
            raise ValueError(f"keypoint {k.name!r} references unknown link {k.link!r}")

    J = len(skel.joints)
    if np.shape(skel.default_pose) != (J,):
        raise ValueError(f"default_pose must have {J} entries")
    lo = np.array([j.angle_limits[0] for j in skel.joints])
    hi = np.array([j.angle_limits[1] for j in skel.joints])
    if np.any(skel.default_pose < lo) or np.any(skel.default_pose > hi):
        raise ValueError("default_pose violates joint angle limits")


# ---------------------------------------------------------------------------
# poses and clips


@dataclass(eq=False)
class Pose:
    root_pos: np.ndarray        # (2,) m
    root_pitch: float           # rad
    joint_angles: np.ndarray    # (J,) rad

    def as_row(self) -> np.ndarray:
        return np.concatenate([self.root_pos, [self.root_pitch], self.joint_angles])

    @staticmethod
    def from_row(row) -> "Pose":
        row = np.asarray(row, dtype=float)
        return Pose(row[:2].copy(), float(row[2]), row[3:].copy())


@dataclass(eq=False)
class MotionClip:
    """Frame rows are (root_x, root_z, root_pitch, joint_angles...)."""
    fps: float
    frames: np.ndarray              # (T, 3 + J)
    support_phases: np.ndarray      # (T,) SupportPhase values
    source_id: str = ""

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=float)
        self.support_phases = np.asarray(self.support_phases, dtype=np.int8)
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.frames.ndim != 2 or len(self.frames) < 2:
            raise ValueError("a clip needs at least 2 frames")
        if len(self.support_phases) != len(self.frames):
            raise ValueError("support_phases length must match frame count")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def duration(self) -> float:
        return len(self.frames) / self.fps

    def pose(self, i: int) -> Pose:
        return Pose.from_row(self.frames[i])

    def copy(self) -> "MotionClip":
        return MotionClip(self.fps, self.frames.copy(), self.support_phases.copy(),
                          self.source_id)


# ---------------------------------------------------------------------------
# forward kinematics


class FrameKin:
    """World-frame link states for a batch of configurations.

    q is (B, 3 + J): root x, root z, root pitch, then joint angles in spec
    order. Velocities are filled when qd is given, else zero.
    """

    def __init__(self, skel: SkeletonSpec, q, qd=None):
        t = skel.tables
        q = np.atleast_2d(np.asarray(q, dtype=float))
        B, L, J = q.shape[0], skel.num_links, skel.num_joints
        qd = np.zeros_like(q) if qd is None else np.atleast_2d(np.asarray(qd, dtype=float))

        self.skel = skel
        self.q, self.qd = q, qd
        self.link_pos = np.zeros((B, L, 2))
        self.link_rot = np.zeros((B, L))
        self.link_vel = np.zeros((B, L, 2))
        self.link_angvel = np.zeros((B, L))
        self.joint_anchor = np.zeros((B, J, 2))
        self.joint_anchor_vel = np.zeros((B, J, 2))

        b = t.base
        self.link_pos[:, b] = q[:, 0:2]
        self.link_rot[:, b] = q[:, 2]
        self.link_vel[:, b] = qd[:, 0:2]
        self.link_angvel[:, b] = qd[:, 2]
        for l in t.topo[1:]:
            j = t.parent_joint[l]
            p = t.joint_parent[j]
            arm = rotate(self.link_rot[:, p], t.attach[j])
            anchor = self.link_pos[:, p] + arm
            anchor_vel = self.link_vel[:, p] + self.link_angvel[:, p, None] * perp(arm)
            self.joint_anchor[:, j] = anchor
            self.joint_anchor_vel[:, j] = anchor_vel
            self.link_pos[:, l] = anchor
            self.link_vel[:, l] = anchor_vel
            self.link_rot[:, l] = self.link_rot[:, p] + q[:, 3 + j]
            self.link_angvel[:, l] = self.link_angvel[:, p] + qd[:, 3 + j]

    def _points(self, link_idx, offsets):
        """World positions of per-link offsets: link_idx (N,), offsets (N, 2)."""
        arm = rotate(self.link_rot[:, link_idx], offsets)
        return self.link_pos[:, link_idx] + arm

    def _point_vels(self, link_idx, offsets):
        arm = rotate(self.link_rot[:, link_idx], offsets)
        return self.link_vel[:, link_idx] + self.link_angvel[:, link_idx, None] * perp(arm)

    def keypoint_pos(self):
        t = self.skel.tables
        return self._points(t.kp_link, t.kp_offset)

    def keypoint_vel(self):
        t = self.skel.tables
        return self._point_vels(t.kp_link, t.kp_offset)

    def contact_pos(self):
        """(B, 4, 2): heel_l, toe_l, heel_r, toe_r."""
        t = self.skel.tables
        return self._points(t.contact_link, t.contact_offset)

    def contact_vel(self):
        t = self.skel.tables
        return self._point_vels(t.contact_link, t.contact_offset)

    def foot_center(self):
        """(B, 2, 2): midpoint of heel and toe per foot."""
        c = self.contact_pos()
        return 0.5 * (c[:, 0::2] + c[:, 1::2])

    def foot_center_vel(self):
        c = self.contact_vel()
        return 0.5 * (c[:, 0::2] + c[:, 1::2])

    def foot_pitch(self):
        return self.link_rot[:, self.skel.tables.foot_link]

    def link_com(self, com_offset=None):
        """(B, L, 2) world COM per link; com_offset overrides the spec values."""
        t = self.skel.tables
        off = t.com_offset if com_offset is None else com_offset
        arm = rotate(self.link_rot, off)
        return self.link_pos + arm

    def link_com_vel(self, com_offset=None):
        t = self.skel.tables
        off = t.com_offset if com_offset is None else com_offset
        arm = rotate(self.link_rot, off)
        return self.link_vel + self.link_angvel[..., None] * perp(arm)

    def com(self, mass=None, com_offset=None):
        """(B, 2) whole-body COM; mass/com_offset override the spec values."""
        m = self.skel.tables.mass if mass is None else mass
        pts = self.link_com(com_offset)
        return (m[..., :, None] * pts).sum(axis=-2) / m.sum(axis=-1)[..., None]

    def point_jacobian(self, link_idx, point):
        """d(point)/dq for a world `point` (B, 2) fixed on link `link_idx`.

        Returns (B, 2, 3 + J). Rotation about a DOF's anchor moves the point
        along the perpendicular of the anchor-to-point arm.
        """
        t = self.skel.tables
        B, n = self.q.shape[0], self.skel.num_dof
        jac = np.zeros((B, 2, n))
        jac[:, 0, 0] = 1.0
        jac[:, 1, 1] = 1.0
        jac[:, :, 2] = perp(point - self.q[:, 0:2])
        anc = t.ancestry[link_idx]
        for j in np.flatnonzero(anc):
            jac[:, :, 3 + j] = perp(point - self.joint_anchor[:, j])
        return jac


def forward_kinematics(skel: SkeletonSpec, pose: Pose) -> FrameKin:
    """Single-pose FK; batched callers build FrameKin directly."""
    return FrameKin(skel, pose.as_row()[None])


def total_mass(skel: SkeletonSpec) -> float:
    """Mass used by compute_com; exposed so tests can cross-check it."""
    return float(skel.tables.mass.sum())


def compute_com(skel: SkeletonSpec, pose: Pose) -> np.ndarray:
    """(2,) world center of mass: mass-weighted mean of link COM points."""
    return forward_kinematics(skel, pose).com()[0]


def finite_difference_derivatives(skel: SkeletonSpec, clip: MotionClip):
    """Per-frame keypoint velocities and accelerations of a clip.

    Central differences on the interior, one-sided at the ends; units are
    m/frame and m/frame^2 (multiply by fps and fps^2 for SI rates). Returns
    (vel, acc), each (T, K, 2).
    """
    pos = FrameKin(skel, clip.frames).keypoint_pos()
    vel = np.empty_like(pos)
    vel[1:-1] = 0.5 * (pos[2:] - pos[:-2])
    vel[0] = pos[1] - pos[0]
    vel[-1] = pos[-1] - pos[-2]
    acc = np.empty_like(pos)
    acc[1:-1] = pos[2:] - 2.0 * pos[1:-1] + pos[:-2]
    acc[0] = acc[1]
    acc[-1] = acc[-2]
    return vel, acc


# ---------------------------------------------------------------------------
# serialization

_SCHEMA_UNITS = {"length": "m", "mass": "kg", "angle": "rad", "fps": "frame/s"}


def _vec(x) -> list:
    return [float(x[0]), float(x[1])]


def save_skeleton(skel: SkeletonSpec, path) -> None:
    doc = {
        "schema": {"kind": "planar-skeleton", "version": 1, "units": _SCHEMA_UNITS},
        "name": skel.name,
        "links": [{"name": l.name, "mass": l.mass, "com_offset": _vec(l.com_offset),
                   "length": l.length} for l in skel.links],
        "joints": [{"name": j.name, "parent_link": j.parent_link,
                    "child_link": j.child_link, "attach_point": _vec(j.attach_point),
                    "angle_limits": [float(j.angle_limits[0]), float(j.angle_limits[1])],
                    "vel_limit": j.vel_limit, "torque_limit": j.torque_limit,
                    "kp": j.kp, "kd": j.kd} for j in skel.joints],
        "base_link": skel.base_link,
        "foot_links": [{"link": f.link, "heel_offset": _vec(f.heel_offset),
                        "toe_offset": _vec(f.toe_offset)} for f in skel.foot_links],
        "keypoints": [{"name": k.name, "link": k.link, "offset": _vec(k.offset)}
                      for k in skel.keypoints],
        "default_pose": [float(a) for a in skel.default_pose],
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_skeleton(path) -> SkeletonSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not valid JSON ({e})")
    for key in ("links", "joints", "base_link", "foot_links", "keypoints", "default_pose"):
        if key not in doc:
            raise ValueError(f"{path}: missing field {key!r}")
    skel = SkeletonSpec(
        name=doc.get("name", Path(path).stem),
        links=[LinkSpec(d["name"], float(d["mass"]), np.array(d["com_offset"], dtype=float),
                        float(d["length"])) for d in doc["links"]],
        joints=[JointSpec(d["name"], d["parent_link"], d["child_link"],
                          np.array(d["attach_point"], dtype=float),
                          (float(d["angle_limits"][0]), float(d["angle_limits"][1])),
                          float(d["vel_limit"]), float(d["torque_limit"]),
                          float(d["kp"]), float(d["kd"])) for d in doc["joints"]],
        base_link=doc["base_link"],
        foot_links=[FootSpec(d["link"], np.array(d["heel_offset"], dtype=float),
                             np.array(d["toe_offset"], dtype=float))
                    for d in doc["foot_links"]],
        keypoints=[KeypointSpec(d["name"], d["link"], np.array(d["offset"], dtype=float))
                   for d in doc["keypoints"]],
        default_pose=np.array(doc["default_pose"], dtype=float),
    )
    validate_skeleton(skel)
    return skel


def save_clip(clip: MotionClip, path) -> None:
    doc = {
        "schema": {"kind": "planar-motion", "version": 1, "units": _SCHEMA_UNITS,
                   "frame_layout": "root_x root_z root_pitch joint_angles[J]"},
        "fps": clip.fps,
        "source_id": clip.source_id,
        "frames": [[float(x) for x in row] for row in clip.frames],
        "support_phases": [SupportPhase(int(p)).to_json() for p in clip.support_phases],
    }
    Path(path).write_text(json.dumps(doc))


def load_clip(path) -> MotionClip:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not valid JSON ({e})")
    for key in ("fps", "frames", "support_phases"):
        if key not in doc:
            raise ValueError(f"{path}: missing field {key!r}")
    phases = [SupportPhase.from_json(s) for s in doc["support_phases"]]
    return MotionClip(fps=float(doc["fps"]),
                      frames=np.array(doc["frames"], dtype=float),
                      support_phases=np.array(phases, dtype=np.int8),
                      source_id=doc.get("source_id", ""))


# ---------------------------------------------------------------------------
# default desk-scale biped


def desk_biped() -> SkeletonSpec:
    """11-DOF sagittal biped, about 12 kg and 0.76 m at the hip.

    Legs are hip/knee/ankle chains with flat feet (heel and toe contacts);
    single-link arms hang from the shoulders. Knee flexion is negative
    (shank swings backward), hip and ankle dorsiflexion positive.
    """
    def leg(side):
        s = side[0]
        return (
            [LinkSpec(f"thigh_{s}", 1.2, np.array([0.0, -0.17]), 0.35),
             LinkSpec(f"shank_{s}", 0.9, np.array([0.0, -0.16]), 0.35),
             LinkSpec(f"foot_{s}", 0.6, np.array([0.03, -0.02]), 0.2)],
            [JointSpec(f"hip_{s}", "torso", f"thigh_{s}", np.array([0.0, -0.05]),
                       (-2.4, 2.4), 20.0, 30.0, 120.0, 6.0),
             JointSpec(f"knee_{s}", f"thigh_{s}", f"shank_{s}", np.array([0.0, -0.35]),
                       (-2.6, 0.05), 20.0, 30.0, 120.0, 6.0),
             # light foot: explicit damping is only stable up to kd*dt/I, so
             # the ankle runs much lighter damping than the other joints
             JointSpec(f"ankle_{s}", f"shank_{s}", f"foot_{s}", np.array([0.0, -0.35]),
                       (-0.9, 0.9), 20.0, 20.0, 120.0, 0.8)],
        )

    links_l, joints_l = leg("left")
    links_r, joints_r = leg("right")
    links = [LinkSpec("torso", 5.0, np.array([0.04, 0.18]), 0.52)]
    links += links_l + links_r
    links += [LinkSpec("arm_l", 0.8, np.array([0.0, -0.20]), 0.45),
              LinkSpec("arm_r", 0.8, np.array([0.0, -0.20]), 0.45)]
    joints = joints_l + joints_r
    joints += [JointSpec("shoulder_l", "torso", "arm_l", np.array([0.0, 0.38]),
                         (-3.0, 3.0), 20.0, 15.0, 50.0, 3.0),
               JointSpec("shoulder_r", "torso", "arm_r", np.array([0.0, 0.38]),
                         (-3.0, 3.0), 20.0, 15.0, 50.0, 3.0)]
    keypoints = []
    for s in ("l", "r"):
        # the ankle marker rides on the instep, forward of and below the joint
        # center; without that offset foot pitch would be invisible to any
        # keypoint-space objective and retargeting could never set the ankles
        keypoints += [KeypointSpec(f"{s}_hip", f"thigh_{s}", np.array([0.0, 0.0])),
                      KeypointSpec(f"{s}_knee", f"shank_{s}", np.array([0.0, 0.0])),
                      KeypointSpec(f"{s}_ankle", f"foot_{s}", np.array([0.045, -0.02]))]
    keypoints += [KeypointSpec("l_shoulder", "arm_l", np.array([0.0, 0.0])),
                  KeypointSpec("r_shoulder", "arm_r", np.array([0.0, 0.0])),
                  KeypointSpec("l_hand", "arm_l", np.array([0.0, -0.45])),
                  KeypointSpec("r_hand", "arm_r", np.array([0.0, -0.45]))]
    skel = SkeletonSpec(
        name="desk_biped",
        links=links,
        joints=joints,
        base_link="torso",
        foot_links=[FootSpec("foot_l", np.array([-0.06, -0.035]), np.array([0.13, -0.035])),
                    FootSpec("foot_r", np.array([-0.06, -0.035]), np.array([0.13, -0.035]))],
        keypoints=keypoints,
        # slight crouch, flat feet (hip + knee + ankle = 0)
        default_pose=np.array([0.25, -0.5, 0.25, 0.25, -0.5, 0.25, 0.0, 0.0]),
    )
    validate_skeleton(skel)
    return skel


def default_skeleton_path() -> Path:
    return Path(__file__).parent / "assets" / "desk_biped.json"
