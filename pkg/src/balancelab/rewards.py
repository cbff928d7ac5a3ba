"""Reward terms for balance-critical motion tracking.

Three groups, each auditable per term: balance shaping (center-of-mass
placement, contact agreement, foot clearance), relaxed reference tracking
(exponential kernels with wide tolerances), and penalties/regularization
(limit indicators plus smoothness costs). All terms are computed per
environment over the batch and returned in a breakdown whose total is the
plain sum of the weighted terms.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .simulator import BodyState, StepInfo


def mass_scaled_contact_force_threshold(total_weight: float) -> float:
    """Contact-force penalty threshold scaled to a robot's weight (40x)."""
    return 40.0 * total_weight


@dataclass
class RewardConfig:
    """Weights, tolerances, and gates for every reward term.

    Tracking kernels are exp(-err / sigma^2) where err aggregates squared
    componentwise differences; ``tracking_aggregate`` selects mean (default,
    keeps sigmas comparable across skeleton sizes) or sum.
    """
    com_weight: float = 160.0
    com_sigma: float = 0.1
    single_support_height_gap: float = 0.05
    contact_mismatch_weight: float = -250.0
    close_feet_weight: float = -1000.0
    close_feet_threshold: float = 0.16

    track_pos_weight: float = 30.0
    track_pos_sigma: float = 0.6
    track_rot_weight: float = 20.0
    track_rot_sigma: float = 0.3
    track_vel_weight: float = 8.0
    track_vel_sigma: float = 3.0
    track_angvel_weight: float = 8.0
    track_angvel_sigma: float = 10.0
    track_dof_pos_weight: float = 32.0
    track_dof_pos_sigma: float = 0.7
    track_dof_vel_weight: float = 16.0
    track_dof_vel_sigma: float = 10.0

    torque_limit_weight: float = -0.5
    dof_pos_limit_weight: float = -30.0
    dof_vel_limit_weight: float = -12.0
    termination_weight: float = -60.0

    torque_weight: float = -2.5e-5
    dof_vel_weight: float = -1e-3
    dof_acc_weight: float = -3e-6
    action_rate_weight: float = -1.5
    feet_air_time_weight: float = 250.0
    air_time_baseline: float = 0.25
    contact_force_weight: float = -0.2
    contact_force_threshold: float = 500.0
    stumble_weight: float = -3e-4
    stumble_ratio: float = 5.0
    slippage_weight: float = -30.0
    feet_orientation_weight: float = -62.5
    feet_height_gate: float = 0.05
    in_air_weight: float = -50.0

    contact_force_min: float = 1.0
    tracking_aggregate: str = "mean"

    def __post_init__(self) -> None:
        for name in ("com_sigma", "track_pos_sigma", "track_rot_sigma",
                     "track_vel_sigma", "track_angvel_sigma",
                     "track_dof_pos_sigma", "track_dof_vel_sigma"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        for name in ("single_support_height_gap", "close_feet_threshold",
                     "air_time_baseline", "contact_force_threshold",
                     "stumble_ratio", "feet_height_gate", "contact_force_min"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.tracking_aggregate not in ("mean", "sum"):
            raise ValueError("tracking_aggregate must be 'mean' or 'sum'")


@dataclass(eq=False)
class ContactLabels:
    """Grounded flags per foot, columns (left, right)."""
    robot: np.ndarray       # (B, 2) bool, from measured normal force
    reference: np.ndarray   # (B, 2) bool, from reference foot heights


def contact_labels(foot_forces: np.ndarray, ref_foot_heights: np.ndarray,
                   cfg: RewardConfig) -> ContactLabels:
    """Label grounded feet for the robot and its reference.

    A robot foot is grounded iff its normal force is at least
    ``cfg.contact_force_min``. The reference labels both feet grounded when
    their height difference is below ``cfg.single_support_height_gap``,
    otherwise only the lower foot.
    """
    foot_forces = np.asarray(foot_forces, dtype=float)
    ref_foot_heights = np.asarray(ref_foot_heights, dtype=float)
    if np.any(foot_forces < 0.0):
        raise ValueError("foot normal forces must be non-negative")
    robot = foot_forces >= cfg.contact_force_min
    gap = np.abs(ref_foot_heights[:, 0] - ref_foot_heights[:, 1])
    both = gap < cfg.single_support_height_gap
    lower = np.argmin(ref_foot_heights, axis=1)
    reference = np.zeros_like(robot)
    reference[np.arange(len(lower)), lower] = True
    reference |= both[:, None]
    return ContactLabels(robot=robot, reference=reference)


_TRACK_SHAPES = {
    "track_pos": "keypoint_pos", "track_rot": "link_rot",
    "track_vel": "keypoint_vel", "track_angvel": "link_angvel",
    "track_dof_pos": "dof_pos", "track_dof_vel": "dof_vel",
}


@dataclass(eq=False)
class RewardBreakdown:
    """Weighted value of every term plus their sum, each shaped (B,)."""
    com: np.ndarray
    contact_mismatch: np.ndarray
    close_feet: np.ndarray
    track_pos: np.ndarray
    track_rot: np.ndarray
    track_vel: np.ndarray
    track_angvel: np.ndarray
    track_dof_pos: np.ndarray
    track_dof_vel: np.ndarray
    torque_limit: np.ndarray
    dof_pos_limit: np.ndarray
    dof_vel_limit: np.ndarray
    termination: np.ndarray
    torque: np.ndarray
    dof_vel: np.ndarray
    dof_acc: np.ndarray
    action_rate: np.ndarray
    feet_air_time: np.ndarray
    contact_force: np.ndarray
    stumble: np.ndarray
    slippage: np.ndarray
    feet_orientation: np.ndarray
    in_air: np.ndarray
    total: np.ndarray

    @classmethod
    def term_names(cls) -> list[str]:
        return [f.name for f in fields(cls) if f.name != "total"]

    def as_dict(self) -> dict[str, np.ndarray]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _wrap(angle: np.ndarray) -> np.ndarray:
    return np.mod(angle + np.pi, 2.0 * np.pi) - np.pi


def _exp_track(name: str, diff: np.ndarray, weight: float, sigma: float,
               aggregate: str) -> np.ndarray:
    sq = diff.reshape(diff.shape[0], -1) ** 2
    err = sq.mean(axis=1) if aggregate == "mean" else sq.sum(axis=1)
    if not np.all(np.isfinite(err)):
        raise ValueError(f"non-finite input to {name} reward term")
    return weight * np.exp(-err / sigma ** 2)


def compute_reward(body: BodyState, ref: BodyState, labels: ContactLabels,
                   action: np.ndarray, prev_action: np.ndarray,
                   air_timers: np.ndarray, step_info: StepInfo,
                   cfg: RewardConfig,
                   terminated: np.ndarray | None = None) -> RewardBreakdown:
    """Evaluate every reward term for one control step.

    ``air_timers`` holds per-foot airborne seconds accumulated before this
    step's contact state: a foot with a positive timer that is grounded in
    ``labels.robot`` is treated as touching down now and earns its air-time
    credit. ``terminated`` marks environments ending this step (the penalty
    is applied once, on that step).
    """
    B = body.com.shape[0]
    t: dict[str, np.ndarray] = {}

    # shaping: pull the COM over the robot's lower foot, but only while the
    # reference is in single support
    single = labels.reference[:, 0] ^ labels.reference[:, 1]
    lower = np.argmin(body.foot_pos[:, :, 1], axis=1)
    foot_x = body.foot_pos[np.arange(B), lower, 0]
    com_err = (body.com[:, 0] - foot_x) ** 2
    if not np.all(np.isfinite(com_err)):
        raise ValueError("non-finite input to com reward term")
    t["com"] = cfg.com_weight * np.exp(-com_err / cfg.com_sigma ** 2) * single

    mismatch = (labels.robot ^ labels.reference).sum(axis=1)
    t["contact_mismatch"] = cfg.contact_mismatch_weight * mismatch

    feet_dist = np.linalg.norm(body.foot_pos[:, 0] - body.foot_pos[:, 1],
                               axis=1)
    t["close_feet"] = cfg.close_feet_weight * np.maximum(
        cfg.close_feet_threshold - feet_dist, 0.0)

    agg = cfg.tracking_aggregate
    diffs = {
        "track_pos": body.keypoint_pos - ref.keypoint_pos,
        "track_rot": _wrap(body.link_rot - ref.link_rot),
        "track_vel": body.keypoint_vel - ref.keypoint_vel,
        "track_angvel": body.link_angvel - ref.link_angvel,
        "track_dof_pos": body.dof_pos - ref.dof_pos,
        "track_dof_vel": body.dof_vel - ref.dof_vel,
    }
    for name, diff in diffs.items():
        t[name] = _exp_track(name, diff, getattr(cfg, f"{name}_weight"),
                             getattr(cfg, f"{name}_sigma"), agg)

    t["torque_limit"] = cfg.torque_limit_weight * np.any(
        step_info.torque_clamped, axis=1)
    t["dof_pos_limit"] = cfg.dof_pos_limit_weight * step_info.dof_pos_violation
    t["dof_vel_limit"] = cfg.dof_vel_limit_weight * step_info.dof_vel_violation
    term = np.zeros(B, dtype=bool) if terminated is None else terminated
    t["termination"] = cfg.termination_weight * term

    t["torque"] = cfg.torque_weight * np.linalg.norm(
        step_info.applied_torque, axis=1)
    t["dof_vel"] = cfg.dof_vel_weight * (body.dof_vel ** 2).sum(axis=1)
    t["dof_acc"] = cfg.dof_acc_weight * np.linalg.norm(step_info.dof_acc,
                                                       axis=1)
    t["action_rate"] = cfg.action_rate_weight * (
        (action - prev_action) ** 2).sum(axis=1)

    touchdown = (air_timers > 0.0) & labels.robot
    t["feet_air_time"] = cfg.feet_air_time_weight * np.where(
        touchdown, air_timers - cfg.air_time_baseline, 0.0).sum(axis=1)

    # per-foot force magnitude over (normal, tangential)
    force_mag = np.linalg.norm(body.foot_force, axis=2)
    t["contact_force"] = cfg.contact_force_weight * np.maximum(
        force_mag - cfg.contact_force_threshold, 0.0).sum(axis=1)

    normal = body.foot_force[:, :, 0]
    tangential = np.abs(body.foot_force[:, :, 1])
    t["stumble"] = cfg.stumble_weight * (
        tangential > cfg.stumble_ratio * normal).sum(axis=1)

    foot_speed_sq = (body.foot_vel ** 2).sum(axis=2)
    t["slippage"] = cfg.slippage_weight * (
        foot_speed_sq * labels.robot).sum(axis=1)

    low = body.foot_pos[:, :, 1] < cfg.feet_height_gate
    t["feet_orientation"] = cfg.feet_orientation_weight * (
        np.abs(np.sin(body.foot_pitch)) * low).sum(axis=1)

    t["in_air"] = cfg.in_air_weight * ~labels.robot.any(axis=1)

    for name, arr in t.items():
        t[name] = np.asarray(arr, dtype=float)
        if not np.all(np.isfinite(t[name])):
            raise ValueError(f"non-finite input to {name} reward term")
    total = np.zeros(B)
    for name in RewardBreakdown.term_names():
        total += t[name]
    return RewardBreakdown(total=total, **t)
