"""Shared builders for synthetic states used across test modules."""
import numpy as np

from balancelab.simulator import BodyState, StepInfo

K, L, J = 10, 9, 8


def make_body(B: int, rng: np.random.Generator | None = None) -> BodyState:
    """Zeroed state unless an rng is given, then fuzz-ranged fields."""
    if rng is None:
        z2 = lambda *s: np.zeros((B, *s))
        return BodyState(
            link_pos=z2(L, 2), link_rot=z2(L), link_vel=z2(L, 2),
            link_angvel=z2(L), keypoint_pos=z2(K, 2), keypoint_vel=z2(K, 2),
            dof_pos=z2(J), dof_vel=z2(J), com=z2(2), foot_pos=z2(2, 2),
            foot_vel=z2(2, 2), foot_pitch=z2(2), foot_force=z2(2, 2),
            root_pos=z2(2), root_pitch=z2(), root_vel=z2(2),
            root_pitch_rate=z2())
    u = lambda lo, hi, *s: rng.uniform(lo, hi, (B, *s))
    force = np.stack([u(0.0, 600.0, 2), u(-800.0, 800.0, 2)], axis=2)
    return BodyState(
        link_pos=u(-2, 2, L, 2), link_rot=u(-4, 4, L),
        link_vel=u(-5, 5, L, 2), link_angvel=u(-10, 10, L),
        keypoint_pos=u(-2, 2, K, 2), keypoint_vel=u(-5, 5, K, 2),
        dof_pos=u(-2.5, 2.5, J), dof_vel=u(-10, 10, J), com=u(-1, 1, 2),
        foot_pos=u(-0.3, 0.3, 2, 2), foot_vel=u(-5, 5, 2, 2),
        foot_pitch=u(-1.5, 1.5, 2), foot_force=force,
        root_pos=u(-1, 1, 2), root_pitch=u(-1, 1), root_vel=u(-2, 2, 2),
        root_pitch_rate=u(-3, 3))


def make_info(B: int, rng: np.random.Generator | None = None) -> StepInfo:
    if rng is None:
        return StepInfo(
            applied_torque=np.zeros((B, J)),
            torque_clamped=np.zeros((B, J), dtype=bool),
            dof_pos_violation=np.zeros(B, dtype=bool),
            dof_vel_violation=np.zeros(B, dtype=bool),
            dof_acc=np.zeros((B, J)), min_normal_force=np.zeros(B),
            max_cone_excess=np.zeros(B))
    return StepInfo(
        applied_torque=rng.uniform(-30, 30, (B, J)),
        torque_clamped=rng.random((B, J)) < 0.2,
        dof_pos_violation=rng.random(B) < 0.3,
        dof_vel_violation=rng.random(B) < 0.3,
        dof_acc=rng.uniform(-500, 500, (B, J)),
        min_normal_force=np.zeros(B), max_cone_excess=np.zeros(B))


def shift_scene(body: BodyState, dx: float) -> BodyState:
    """Translate every world-frame horizontal coordinate by dx."""
    out = BodyState(**{k: np.copy(v) for k, v in vars(body).items()})
    out.link_pos[..., 0] += dx
    out.keypoint_pos[..., 0] += dx
    out.com[..., 0] += dx
    out.foot_pos[..., 0] += dx
    out.root_pos[..., 0] += dx
    return out
