"""Reference-motion synthesis and refinement.

Balance clips come from a richer source skeleton (longer limbs, elbows and
a head the target lacks) with injectable capture defects: foot slide, a
leaned center of mass, and root jitter. Refinement retargets the clip onto
the target skeleton by per-frame gradient descent on keypoint positions,
labels support phases from ankle heights, pins the grounded foot by moving
only the root, rejects clips whose center of mass strays too far from the
support foot, and pads the double-support lead-in/out to the length of the
balance phase so the policy gets symmetric settling time.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .skeleton import (FootSpec, FrameKin, JointSpec, KeypointSpec, LinkSpec,
                       MotionClip, SkeletonSpec, SupportPhase)


class Task(str, Enum):
    SINGLE_LEG_STAND = "single-leg-stand"
    DEEP_SQUAT = "deep-squat"
    HIGH_KICK = "high-kick"
    ARABESQUE = "arabesque"


class InitMode(str, Enum):
    ZERO_POSE = "zero"
    SOURCE_POSE = "source"


@dataclass
class ArtifactConfig:
    """Capture defects injected into synthesized source motion."""
    foot_slide_rate: float = 0.0    # m per single-support frame
    com_bias: float = 0.0           # m, horizontal COM offset during holds
    jitter_std: float = 0.0         # m, per-frame root position noise
    seed: int = 0

    def __post_init__(self) -> None:
        if min(self.foot_slide_rate, self.com_bias, self.jitter_std) < 0:
            raise ValueError("artifact magnitudes must be non-negative")


@dataclass(eq=False)
class SourceMotion:
    """A clip on the richer capture skeleton plus the joint correspondence."""
    skeleton: SkeletonSpec
    clip: MotionClip
    joint_map: dict[str, str]       # target joint name -> source joint name

    def __post_init__(self) -> None:
        src = {j.name for j in self.skeleton.joints}
        missing = [v for v in self.joint_map.values() if v not in src]
        if missing:
            raise ValueError(f"joint_map references unknown source joints "
                             f"{missing}")
        if len(set(self.joint_map.values())) != len(self.joint_map):
            raise ValueError("joint_map must be injective")


def source_biped() -> SkeletonSpec:
    """Capture-side skeleton. Its legs copy the desk figure's proportions so
    leg motion transfers exactly; the upper body is richer, with two-segment
    arms and a head the desk figure lacks."""
    def leg(s):
        return (
            [LinkSpec(f"thigh_{s}", 1.3, np.array([0.0, -0.16]), 0.35),
             LinkSpec(f"shank_{s}", 1.0, np.array([0.0, -0.16]), 0.35),
             LinkSpec(f"foot_{s}", 0.65, np.array([0.03, -0.02]), 0.2)],
            [JointSpec(f"hip_{s}", "torso", f"thigh_{s}",
                       np.array([0.0, -0.05]), (-2.4, 2.4), 20.0, 30.0,
                       100.0, 5.0),
             JointSpec(f"knee_{s}", f"thigh_{s}", f"shank_{s}",
                       np.array([0.0, -0.35]), (-2.6, 0.05), 20.0, 30.0,
                       100.0, 5.0),
             JointSpec(f"ankle_{s}", f"shank_{s}", f"foot_{s}",
                       np.array([0.0, -0.35]), (-0.9, 0.9), 20.0, 20.0,
                       100.0, 5.0)],
        )

    def arm(s):
        return (
            [LinkSpec(f"upper_arm_{s}", 0.5, np.array([0.0, -0.12]), 0.26),
             LinkSpec(f"forearm_{s}", 0.4, np.array([0.0, -0.12]), 0.26)],
            [JointSpec(f"shoulder_{s}", "torso", f"upper_arm_{s}",
                       np.array([0.0, 0.38]), (-3.0, 3.0), 20.0, 15.0,
                       50.0, 2.5),
             JointSpec(f"elbow_{s}", f"upper_arm_{s}", f"forearm_{s}",
                       np.array([0.0, -0.26]), (-0.05, 2.6), 20.0, 15.0,
                       50.0, 2.5)],
        )

    links = [LinkSpec("torso", 5.4, np.array([0.04, 0.19]), 0.56)]
    joints: list[JointSpec] = []
    for s in ("l", "r"):
        ll, jl = leg(s)
        links += ll
        joints += jl
    for s in ("l", "r"):
        la, ja = arm(s)
        links += la
        joints += ja
    links.append(LinkSpec("head", 0.9, np.array([0.0, 0.06]), 0.14))
    joints.append(JointSpec("neck", "torso", "head", np.array([0.0, 0.45]),
                            (-0.8, 0.8), 20.0, 10.0, 30.0, 1.5))
    keypoints = []
    for s in ("l", "r"):
        keypoints += [
            KeypointSpec(f"{s}_hip", f"thigh_{s}", np.array([0.0, 0.0])),
            KeypointSpec(f"{s}_knee", f"shank_{s}", np.array([0.0, 0.0])),
            KeypointSpec(f"{s}_ankle", f"foot_{s}", np.array([0.045, -0.02]))]
    keypoints += [
        KeypointSpec("l_shoulder", "upper_arm_l", np.array([0.0, 0.0])),
        KeypointSpec("r_shoulder", "upper_arm_r", np.array([0.0, 0.0])),
        KeypointSpec("l_hand", "forearm_l", np.array([0.0, -0.26])),
        KeypointSpec("r_hand", "forearm_r", np.array([0.0, -0.26]))]
    return SkeletonSpec(
        name="source_biped",
        links=links,
        joints=joints,
        base_link="torso",
        foot_links=[
            FootSpec("foot_l", np.array([-0.06, -0.035]),
                     np.array([0.13, -0.035])),
            FootSpec("foot_r", np.array([-0.06, -0.035]),
                     np.array([0.13, -0.035]))],
        keypoints=keypoints,
        default_pose=np.zeros(11),
    )


# ---------------------------------------------------------------------------
# source motion synthesis

_FPS = 50.0
# Performers keep a slight elbow bend; with 0.26 m arm segments this bend
# puts the hand 0.45 m from the shoulder, the same radius the desk figure's
# one-piece arm sweeps.
_ELBOW_BEND = 1.0496
_REST_ARMS = {"elbow_l": _ELBOW_BEND, "elbow_r": _ELBOW_BEND}
# keyframe joint values per task, hold entries as {joint name: angle}
_STANCE_ARMS = {"shoulder_l": 0.25, "shoulder_r": -0.25, **_REST_ARMS}
_HOLDS: dict[Task, dict[str, float]] = {
    Task.SINGLE_LEG_STAND: {
        "hip_r": 0.9, "knee_r": -1.5, "ankle_r": -0.35, **_STANCE_ARMS},
    Task.DEEP_SQUAT: {
        "hip_l": 1.2, "knee_l": -2.05, "ankle_l": 0.85,
        "hip_r": 1.2, "knee_r": -2.05, "ankle_r": 0.85,
        "shoulder_l": 0.9, "shoulder_r": 0.9, **_REST_ARMS},
    Task.HIGH_KICK: {
        "hip_l": 0.15, "knee_l": -0.3, "ankle_l": 0.05,
        "hip_r": 2.2, "knee_r": -0.25, "ankle_r": -0.4,
        "shoulder_l": 0.6, "shoulder_r": -0.6, **_REST_ARMS},
    Task.ARABESQUE: {
        "hip_l": 0.55, "knee_l": -0.05, "ankle_l": 0.05,
        "hip_r": -1.1, "knee_r": -0.05, "ankle_r": -0.45,
        "shoulder_l": 0.5, "shoulder_r": -0.5, "neck": 0.3, **_REST_ARMS},
}
_HOLD_PITCH = {Task.SINGLE_LEG_STAND: 0.0, Task.DEEP_SQUAT: 0.0,
               Task.HIGH_KICK: 0.1, Task.ARABESQUE: -0.55}
# stance side during the hold; the squat keeps both feet down
_STANCE_SIDE = {Task.SINGLE_LEG_STAND: "l", Task.HIGH_KICK: "l",
                Task.ARABESQUE: "l"}


def _smooth_interp(keys: list[tuple[int, np.ndarray]], T: int) -> np.ndarray:
    rows = np.zeros((T, keys[0][1].shape[0]))
    for (f0, r0), (f1, r1) in zip(keys[:-1], keys[1:]):
        span = max(f1 - f0, 1)
        s = np.linspace(0.0, 1.0, span + 1)
        s = 3.0 * s ** 2 - 2.0 * s ** 3
        rows[f0:f1 + 1] = r0 + s[:, None] * (r1 - r0)
    return rows


def _ground_frames(skel: SkeletonSpec, rows: np.ndarray) -> None:
    """Drop each frame so its lowest foot contact point sits on the floor."""
    kin = FrameKin(skel, rows)
    t = skel.tables
    lows = []
    for f, fs in enumerate(skel.foot_links):
        for off in (fs.heel_offset, fs.toe_offset):
            lows.append(kin._points(t.foot_link[f], off)[:, 1])
    rows[:, 1] -= np.min(lows, axis=0)


def _hold_row(skel: SkeletonSpec, task: Task) -> np.ndarray:
    row = np.zeros(3 + skel.num_joints)
    row[1] = 0.85
    row[2] = _HOLD_PITCH[task]
    names = [j.name for j in skel.joints]
    for name, val in _HOLDS[task].items():
        row[3 + names.index(name)] = val
    return row


def _apply_com_bias(skel: SkeletonSpec, row: np.ndarray, task: Task,
                    bias: float) -> np.ndarray:
    """Lean the stance leg until the COM sits `bias` ahead of the foot.

    Rotating the stance hip (ankle counter-rotated to keep the sole flat)
    swings the planted foot under the body, which is exactly what a capture
    lean error looks like. Solved by bisection on forward kinematics.
    """
    side = _STANCE_SIDE.get(task)
    if side is None or bias == 0.0:
        return row
    names = [j.name for j in skel.joints]
    hip, ankle = 3 + names.index(f"hip_{side}"), 3 + names.index(f"ankle_{side}")
    foot = 0 if side == "l" else 1

    def deviation(delta: float) -> float:
        r = row.copy()
        r[hip] += delta
        r[ankle] -= delta
        kin = FrameKin(skel, r[None])
        return float(kin.com()[0, 0] - kin.foot_center()[0, foot, 0]) - bias

    lo, hi = -1.0, 1.0
    if deviation(lo) * deviation(hi) > 0:
        raise ValueError(f"com_bias {bias} unreachable for {task.value}")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if deviation(lo) * deviation(mid) <= 0:
            hi = mid
        else:
            lo = mid
    out = row.copy()
    out[hip] += 0.5 * (lo + hi)
    out[ankle] -= 0.5 * (lo + hi)
    return out


def inject_foot_slide(clip: MotionClip, rate: float) -> MotionClip:
    """Accumulate `rate` meters of forward root drift on every labeled
    single-support frame, carried through to the end of the clip."""
    out = clip.copy()
    single = clip.support_phases != SupportPhase.DOUBLE
    out.frames[:, 0] += rate * np.cumsum(single)
    return out


def synthesize_source_motion(task: Task,
                             artifacts: ArtifactConfig | None = None
                             ) -> SourceMotion:
    """Deterministic four-second clip: stand, move into the hold, hold two
    seconds, return. Defects injected per the artifact config."""
    artifacts = artifacts or ArtifactConfig()
    task = Task(task)
    skel = source_biped()
    T = 200
    names = [j.name for j in skel.joints]
    stand = np.zeros(3 + skel.num_joints)
    stand[1] = 0.85
    for name, val in _REST_ARMS.items():
        stand[3 + names.index(name)] = val
    hold = _apply_com_bias(skel, _hold_row(skel, task), task,
                           artifacts.com_bias)
    rows = _smooth_interp([(0, stand), (25, stand), (50, hold), (150, hold),
                           (175, stand), (T - 1, stand)], T)
    lo = np.array([j.angle_limits[0] for j in skel.joints])
    hi = np.array([j.angle_limits[1] for j in skel.joints])
    rows[:, 3:] = np.clip(rows[:, 3:], lo, hi)
    _ground_frames(skel, rows)
    clip = MotionClip(_FPS, rows, np.zeros(T), source_id=task.value)
    clip = label_support_phases(clip, skel)
    if artifacts.foot_slide_rate:
        clip = inject_foot_slide(clip, artifacts.foot_slide_rate)
    if artifacts.jitter_std:
        rng = np.random.default_rng(artifacts.seed)
        clip.frames[:, 0:2] += rng.normal(0.0, artifacts.jitter_std, (T, 2))
    joint_map = {n: n for n in
                 ("hip_l", "knee_l", "ankle_l", "hip_r", "knee_r", "ankle_r",
                  "shoulder_l", "shoulder_r")}
    return SourceMotion(skeleton=skel, clip=clip, joint_map=joint_map)


# ---------------------------------------------------------------------------
# retargeting

@dataclass(eq=False)
class RetargetResult:
    clip: MotionClip
    loss_history: np.ndarray    # (steps + 1,) mean over frames, m^2
    final_loss: float
    init_mode: InitMode


def retarget(source: SourceMotion, target: SkeletonSpec,
             init_mode: InitMode = InitMode.SOURCE_POSE, steps: int = 500,
             step_size: float = 0.1) -> RetargetResult:
    """Per-frame gradient descent matching corresponding keypoints.

    The root trajectory is copied from the source; only joint angles move,
    clamped to the target's limits after every step. All frames advance in
    one batch, so the loss history is the mean frame loss per step.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    init_mode = InitMode(init_mode)
    src, clip = source.skeleton, source.clip
    T = len(clip)

    src_kp = {k.name: i for i, k in enumerate(src.keypoints)}
    missing = [k.name for k in target.keypoints if k.name not in src_kp]
    if missing:
        raise ValueError(f"source skeleton lacks keypoints {missing}")
    order = [src_kp[k.name] for k in target.keypoints]
    targets = FrameKin(src, clip.frames).keypoint_pos()[:, order]

    src_joint = {j.name: i for i, j in enumerate(src.joints)}
    q = np.zeros((T, 3 + target.num_joints))
    q[:, :3] = clip.frames[:, :3]
    if init_mode is InitMode.SOURCE_POSE:
        for j, spec in enumerate(target.joints):
            q[:, 3 + j] = clip.frames[:, 3 + src_joint[source.joint_map[spec.name]]]
    lo = np.array([j.angle_limits[0] for j in target.joints])
    hi = np.array([j.angle_limits[1] for j in target.joints])
    q[:, 3:] = np.clip(q[:, 3:], lo, hi)

    kp_links = [target.link_index(k.link) for k in target.keypoints]
    history = np.zeros(steps + 1)
    for step in range(steps + 1):
        kin = FrameKin(target, q)
        kp = kin.keypoint_pos()
        diff = kp - targets
        frame_loss = (diff ** 2).sum(axis=(1, 2))
        if not np.all(np.isfinite(frame_loss)):
            bad = int(np.flatnonzero(~np.isfinite(frame_loss))[0])
            raise ValueError(f"retarget loss diverged at frame {bad}")
        history[step] = frame_loss.mean()
        if step == steps:
            break
        grad = np.zeros_like(q)
        for k, link in enumerate(kp_links):
            jac = kin.point_jacobian(link, kp[:, k])
            grad += 2.0 * np.einsum("bcn,bc->bn", jac, diff[:, k])
        q[:, 3:] = np.clip(q[:, 3:] - step_size * grad[:, 3:], lo, hi)

    out = MotionClip(clip.fps, q, np.zeros(T), source_id=clip.source_id)
    return RetargetResult(clip=out, loss_history=history,
                          final_loss=float(history[-1]), init_mode=init_mode)


def retarget_frame_loss(target: SkeletonSpec, row: np.ndarray,
                        keypoint_targets: np.ndarray) -> float:
    """Loss of one pose against fixed keypoint targets; the test oracle
    differentiates this numerically."""
    kp = FrameKin(target, row[None]).keypoint_pos()[0]
    return float(((kp - keypoint_targets) ** 2).sum())


# ---------------------------------------------------------------------------
# refinement stages

def label_support_phases(clip: MotionClip, skel: SkeletonSpec,
                         height_gap: float = 0.05,
                         min_segment: int = 3) -> MotionClip:
    """Label each frame from ankle heights: double support below the gap,
    otherwise the lower foot's side. Single-support runs shorter than
    `min_segment` frames are noise and relabeled double."""
    kp = {k.name: i for i, k in enumerate(skel.keypoints)}
    heights = FrameKin(skel, clip.frames).keypoint_pos()[:, :, 1]
    z_l, z_r = heights[:, kp["l_ankle"]], heights[:, kp["r_ankle"]]
    phases = np.where(np.abs(z_l - z_r) < height_gap, SupportPhase.DOUBLE,
                      np.where(z_l <= z_r, SupportPhase.LEFT,
                               SupportPhase.RIGHT)).astype(np.int8)
    # drop runs too short to be real stance changes
    t = 0
    while t < len(phases):
        if phases[t] == SupportPhase.DOUBLE:
            t += 1
            continue
        end = t
        while end < len(phases) and phases[end] == phases[t]:
            end += 1
        if end - t < min_segment:
            phases[t:end] = SupportPhase.DOUBLE
        t = end
    out = clip.copy()
    out.support_phases = phases
    return out


def grounded_foot_correction(clip: MotionClip,
                             skel: SkeletonSpec) -> MotionClip:
    """Shift roots so the support foot stays exactly where each single-
    support segment found it; joint angles and pitch are untouched and the
    accumulated shift carries forward so the clip stays continuous."""
    centers = FrameKin(skel, clip.frames).foot_center()     # (T, 2, 2)
    out = clip.copy()
    carry = np.zeros(2)
    anchor = np.zeros(2)
    prev_phase = int(SupportPhase.DOUBLE)
    for t, phase in enumerate(clip.support_phases):
        phase = int(phase)
        if phase != SupportPhase.DOUBLE:
            side = 0 if phase == SupportPhase.LEFT else 1
            if phase != prev_phase:
                anchor = centers[t, side] + carry
            else:
                carry = anchor - centers[t, side]
        out.frames[t, 0:2] += carry
        prev_phase = phase
    return out


@dataclass
class ComFilterResult:
    accepted: bool
    max_deviation: float
    frame: int | None = None


def com_filter(clip: MotionClip, skel: SkeletonSpec,
               threshold: float = 0.2) -> ComFilterResult:
    """Reject the clip if, on any single-support frame, the horizontal COM
    strays more than `threshold` from the support foot center."""
    single = clip.support_phases != SupportPhase.DOUBLE
    if not single.any():
        return ComFilterResult(accepted=True, max_deviation=0.0)
    kin = FrameKin(skel, clip.frames[single])
    side = (clip.support_phases[single] == SupportPhase.RIGHT).astype(int)
    foot_x = kin.foot_center()[np.arange(side.size), side, 0]
    dev = np.abs(kin.com()[:, 0] - foot_x)
    worst = int(np.argmax(dev))
    return ComFilterResult(
        accepted=bool(dev[worst] <= threshold),
        max_deviation=float(dev[worst]),
        frame=int(np.flatnonzero(single)[worst]))


def transition_stabilization(clip: MotionClip) -> MotionClip:
    """Pad the lead-in and lead-out with frame copies until each lasts as
    long as the balance (single-support) phase; never shrinks."""
    single = clip.support_phases != SupportPhase.DOUBLE
    if not single.any():
        warnings.warn("clip has no balance phase; nothing to stabilize")
        return clip.copy()
    B = int(single.sum())
    first, last = np.flatnonzero(single)[[0, -1]]
    pad_front = max(0, B - first)
    pad_back = max(0, B - (len(clip) - 1 - last))
    frames = np.concatenate([
        np.repeat(clip.frames[:1], pad_front, axis=0), clip.frames,
        np.repeat(clip.frames[-1:], pad_back, axis=0)])
    phases = np.concatenate([
        np.repeat(clip.support_phases[:1], pad_front), clip.support_phases,
        np.repeat(clip.support_phases[-1:], pad_back)])
    return MotionClip(clip.fps, frames, phases, clip.source_id)


# ---------------------------------------------------------------------------
# pipeline

@dataclass
class RefineConfig:
    init_mode: InitMode = InitMode.SOURCE_POSE
    steps: int = 500
    step_size: float = 0.1
    com_threshold: float = 0.2
    height_gap: float = 0.05
    min_segment: int = 3


@dataclass
class RefineReport:
    task: str
    init_mode: str
    initial_loss: float
    final_loss: float
    residual_slippage: float        # max per-frame support-foot motion, m
    max_com_deviation: float
    com_accepted: bool
    frames_in: int
    frames_out: int

    def as_dict(self) -> dict:
        return dict(vars(self))


class RefinementRejected(RuntimeError):
    """Raised when a stage disqualifies the clip; carries the report."""

    def __init__(self, message: str, report: RefineReport):
        super().__init__(message)
        self.report = report


def support_foot_slippage(clip: MotionClip, skel: SkeletonSpec) -> float:
    """Largest per-frame world displacement of the support foot inside any
    single-support segment."""
    centers = FrameKin(skel, clip.frames).foot_center()
    worst = 0.0
    phases = clip.support_phases
    for t in range(1, len(clip)):
        if phases[t] != SupportPhase.DOUBLE and phases[t] == phases[t - 1]:
            side = 0 if phases[t] == SupportPhase.LEFT else 1
            step = np.linalg.norm(centers[t, side] - centers[t - 1, side])
            worst = max(worst, float(step))
    return worst


def refine_pipeline(source: SourceMotion, target: SkeletonSpec,
                    config: RefineConfig | None = None
                    ) -> tuple[MotionClip, RefineReport]:
    cfg = config or RefineConfig()
    result = retarget(source, target, cfg.init_mode, cfg.steps,
                      cfg.step_size)
    clip = label_support_phases(result.clip, target, cfg.height_gap,
                                cfg.min_segment)
    clip = grounded_foot_correction(clip, target)
    com = com_filter(clip, target, cfg.com_threshold)
    report = RefineReport(
        task=source.clip.source_id,
        init_mode=InitMode(cfg.init_mode).value,
        initial_loss=float(result.loss_history[0]),
        final_loss=result.final_loss,
        residual_slippage=support_foot_slippage(clip, target),
        max_com_deviation=com.max_deviation,
        com_accepted=com.accepted,
        frames_in=len(source.clip),
        frames_out=len(clip))
    if not com.accepted:
        raise RefinementRejected(
            f"center of mass strays {com.max_deviation:.3f} m from the "
            f"support foot at frame {com.frame} (limit "
            f"{cfg.com_threshold} m)", report)
    clip = transition_stabilization(clip)
    clip = label_support_phases(clip, target, cfg.height_gap,
                                cfg.min_segment)
    report.frames_out = len(clip)
    return clip, report
