"""Observation construction for teacher and student policies.

The teacher sees clean, privileged state: its own rigid bodies, their
differences against the reference, and the localized reference targets. The
student sees only sensor-plausible quantities (joint encoders, gyro, gravity
direction) plus localized reference keypoints, with the orientation channel
perturbed by a temporally correlated Ornstein-Uhlenbeck process: every entry
that depends on orientation is recomputed from the single perturbed pitch, so
the noise stays internally consistent the way a real state estimator's error
does.

Positions are localized by removing the owning root's horizontal offset and
rotating into the observer's pitch frame; heights stay absolute. This makes
every observation invariant to horizontal translation of the whole scene,
which is what frees the deployed policy from odometry.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .simulator import BodyState
from .skeleton import SkeletonSpec


@dataclass(eq=False)
class OUNoiseState:
    """Mean-reverting orientation noise, one pitch channel per env, degrees.

    dX = -theta X dt + sigma (noise) with two discretizations: ``euler``
    treats the draw as a per-step standard normal (X += dt(-theta X + sigma
    eps)), ``euler_maruyama`` scales it by sqrt(dt). The per-step reading is
    the default; it gives a realistic IMU-scale stationary amplitude.
    """
    value: np.ndarray           # (B,) degrees
    theta: float = 25.0
    sigma: float = 250.0
    dt: float = 0.02
    scheme: str = "euler"

    def __post_init__(self) -> None:
        self.value = np.asarray(self.value, dtype=float)
        if not np.all(np.isfinite(self.value)):
            raise ValueError("OU state must be finite")
        if self.theta <= 0.0 or self.sigma < 0.0 or self.dt <= 0.0:
            raise ValueError("OU parameters out of range")
        if self.theta * self.dt >= 1.0:
            raise ValueError("theta*dt >= 1 makes the discretization "
                             "unstable; shrink dt or theta")
        if self.scheme not in ("euler", "euler_maruyama"):
            raise ValueError("scheme must be 'euler' or 'euler_maruyama'")


def ou_step(state: OUNoiseState, rng) -> OUNoiseState:
    """Advance the noise one control step.

    ``rng`` is either one Generator (batch drawn at once) or a sequence of
    per-env Generators, which keeps each env's noise stream independent of
    batch composition.
    """
    if isinstance(rng, np.random.Generator):
        eps = rng.standard_normal(state.value.shape)
    else:
        eps = np.array([g.standard_normal() for g in rng])
    decay = state.value - state.dt * state.theta * state.value
    if state.scheme == "euler":
        kick = state.dt * state.sigma * eps
    else:
        kick = np.sqrt(state.dt) * state.sigma * eps
    return replace(state, value=decay + kick)


def rotate_into_frame(vec: np.ndarray, pitch: np.ndarray) -> np.ndarray:
    """Express world vectors in a frame pitched CCW by ``pitch``."""
    c = np.cos(pitch).reshape(pitch.shape[0], *([1] * (vec.ndim - 2)))
    s = np.sin(pitch).reshape(c.shape)
    x, z = vec[..., 0], vec[..., 1]
    return np.stack([c * x + s * z, -s * x + c * z], axis=-1)


def localize_points(points: np.ndarray, root_x: np.ndarray,
                    pitch: np.ndarray) -> np.ndarray:
    """Remove the root's horizontal offset, rotate into the pitch frame."""
    shifted = points.copy()
    shifted[..., 0] -= root_x.reshape(root_x.shape[0],
                                      *([1] * (points.ndim - 2)))
    return rotate_into_frame(shifted, pitch)


def _wrap(angle: np.ndarray) -> np.ndarray:
    return np.mod(angle + np.pi, 2.0 * np.pi) - np.pi


@dataclass(eq=False)
class LocalizedTargets:
    """Reference bodies re-expressed in the observer's frame."""
    link_pos: np.ndarray        # (B, L, 2)
    link_rot: np.ndarray        # (B, L)
    keypoint_pos: np.ndarray    # (B, K, 2)


def localize_reference(robot_pitch: np.ndarray,
                       ref: BodyState) -> LocalizedTargets:
    """Align the reference root onto the robot's and express targets there.

    Horizontal offsets are measured from the reference's own root (so a
    translated robot sees identical targets); rotations become relative to
    the observer pitch.
    """
    ref_root_x = ref.root_pos[:, 0]
    return LocalizedTargets(
        link_pos=localize_points(ref.link_pos, ref_root_x, robot_pitch),
        link_rot=_wrap(ref.link_rot - robot_pitch[:, None]),
        keypoint_pos=localize_points(ref.keypoint_pos, ref_root_x,
                                     robot_pitch))


def _flat(*blocks: np.ndarray) -> np.ndarray:
    B = blocks[0].shape[0]
    return np.concatenate([b.reshape(B, -1) for b in blocks], axis=1)


def build_teacher_obs(body: BodyState, ref: BodyState,
                      prev_action: np.ndarray) -> np.ndarray:
    """Privileged observation: own bodies, tracking errors, local targets.

    Own link rotations stay absolute (pitch is what balance hinges on);
    positions and linear velocities are expressed in the root frame.
    """
    if prev_action.ndim != 2 or prev_action.shape[0] != body.com.shape[0]:
        raise ValueError("prev_action shape mismatch")
    phi = body.root_pitch
    own_pos = localize_points(body.link_pos, body.root_pos[:, 0], phi)
    own_vel = rotate_into_frame(body.link_vel, phi)
    targets = localize_reference(phi, ref)
    pos_diff = own_pos - localize_points(ref.link_pos, ref.root_pos[:, 0],
                                         phi)
    rot_diff = _wrap(body.link_rot - ref.link_rot)
    vel_diff = rotate_into_frame(body.link_vel - ref.link_vel, phi)
    angvel_diff = body.link_angvel - ref.link_angvel
    obs = _flat(own_pos, body.link_rot, own_vel, body.link_angvel,
                pos_diff, rot_diff, vel_diff, angvel_diff,
                targets.link_pos, targets.link_rot, prev_action)
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite teacher observation")
    return obs


def projected_gravity(pitch: np.ndarray) -> np.ndarray:
    """Gravity direction as the base frame sees it, (sin, -cos) of pitch."""
    return np.stack([np.sin(pitch), -np.cos(pitch)], axis=-1)


def student_record(body: BodyState, prev_action: np.ndarray,
                   ou: OUNoiseState) -> np.ndarray:
    """One history row: encoders, gyro, perturbed gravity, last action."""
    observed_pitch = body.root_pitch + np.deg2rad(ou.value)
    return _flat(body.dof_pos, body.dof_vel, body.root_pitch_rate[:, None],
                 projected_gravity(observed_pitch), prev_action)


def build_student_obs(body: BodyState, ref: BodyState,
                      prev_action: np.ndarray, ou: OUNoiseState,
                      history: "HistoryBuffer",
                      global_targets: bool = False) -> np.ndarray:
    """Deployable observation, all orientation entries from one noisy pitch.

    The perturbed pitch feeds the gravity direction, the localization frame
    of the reference targets, and both keypoint difference blocks; keypoint
    velocities are root-relative on both sides (reachable from encoders and
    gyro alone). ``history`` holds the previous 25 records.

    ``global_targets`` anchors the reference at the robot's true world
    position instead of the reference's own root, exposing the robot's
    horizontal drift. That needs odometry, so it exists only as a training
    ablation; deployment always uses the anchored form.
    """
    observed_pitch = body.root_pitch + np.deg2rad(ou.value)
    anchor = body.root_pos[:, 0] if global_targets else ref.root_pos[:, 0]
    targets = localize_points(ref.keypoint_pos, anchor, observed_pitch)
    own = localize_points(body.keypoint_pos, body.root_pos[:, 0],
                          observed_pitch)
    rel_vel = ((body.keypoint_vel - body.root_vel[:, None, :])
               - (ref.keypoint_vel - ref.root_vel[:, None, :]))
    obs = _flat(body.dof_pos, body.dof_vel, body.root_pitch_rate[:, None],
                projected_gravity(observed_pitch), targets, own - targets,
                rotate_into_frame(rel_vel, observed_pitch), prev_action,
                history.flat())
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite student observation")
    return obs


class HistoryBuffer:
    """Fixed-length FIFO of per-step records, oldest first when flattened."""

    def __init__(self, batch: int, record_dim: int, length: int = 25):
        self.length = length
        self.data = np.zeros((batch, length, record_dim))

    def reset(self, record: np.ndarray,
              env_mask: np.ndarray | None = None) -> None:
        """Fill every slot with ``record`` so there is no zero-padding
        transient; ``env_mask`` restricts to the envs being reset."""
        if env_mask is None:
            self.data[:] = record[:, None, :]
        else:
            self.data[env_mask] = record[env_mask, None, :]

    def push(self, record: np.ndarray) -> None:
        self.data[:, :-1] = self.data[:, 1:]
        self.data[:, -1] = record

    def flat(self) -> np.ndarray:
        return self.data.reshape(self.data.shape[0], -1)


def push_history(buffer: HistoryBuffer, record: np.ndarray) -> HistoryBuffer:
    buffer.push(record)
    return buffer


def reset_history(buffer: HistoryBuffer, record: np.ndarray) -> HistoryBuffer:
    buffer.reset(record)
    return buffer


def observation_layout(skel: SkeletonSpec,
                       history_steps: int = 25) -> dict:
    """Names, offsets, and lengths of every block, for oracles and docs."""
    L, J = skel.num_links, skel.num_joints
    K = len(skel.keypoints)

    def blocks(spec: list[tuple[str, int]]) -> list[dict]:
        out, off = [], 0
        for name, n in spec:
            out.append({"name": name, "offset": off, "length": n})
            off += n
        return out

    teacher = blocks([
        ("link_pos_local", 2 * L), ("link_rot", L),
        ("link_vel_local", 2 * L), ("link_angvel", L),
        ("link_pos_diff", 2 * L), ("link_rot_diff", L),
        ("link_vel_diff", 2 * L), ("link_angvel_diff", L),
        ("ref_link_pos_local", 2 * L), ("ref_link_rot_local", L),
        ("prev_action", J)])
    record = blocks([
        ("dof_pos", J), ("dof_vel", J), ("base_angvel", 1),
        ("projected_gravity", 2), ("action", J)])
    record_dim = sum(b["length"] for b in record)
    student = blocks([
        ("dof_pos", J), ("dof_vel", J), ("base_angvel", 1),
        ("projected_gravity", 2), ("ref_keypoint_pos_local", 2 * K),
        ("keypoint_pos_diff", 2 * K), ("keypoint_vel_diff", 2 * K),
        ("prev_action", J), ("history", history_steps * record_dim)])
    return {
        "teacher": teacher,
        "teacher_dim": sum(b["length"] for b in teacher),
        "student": student,
        "student_dim": sum(b["length"] for b in student),
        "history_record": record,
        "history_record_dim": record_dim,
        "history_steps": history_steps,
    }


def layout_fingerprint(skel: SkeletonSpec, mode: str,
                       history_steps: int = 25) -> str:
    """Short content hash of one side's observation layout.

    Stored in checkpoints and compared on load, so a policy trained against
    one block arrangement cannot silently run against another.
    """
    layout = observation_layout(skel, history_steps)
    if mode not in ("teacher", "student"):
        raise ValueError(f"unknown observation mode {mode!r}")
    doc = {
        "mode": mode,
        "blocks": layout[mode],
        "dim": layout[f"{mode}_dim"],
        "history_record": layout["history_record"],
        "history_steps": history_steps,
    }
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def default_layout_path() -> Path:
    return Path(__file__).parent / "assets" / "observation_layout.json"


def save_layout(layout: dict, path: Path) -> None:
    path.write_text(json.dumps(layout, indent=2) + "\n")
