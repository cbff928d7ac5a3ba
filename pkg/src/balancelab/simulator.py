"""Batched planar rigid-body simulator with penalty ground contact.

Control runs at `control_hz` with `substeps` physics steps per control step
(50 Hz x 10 = 2 ms physics by default), semi-implicit Euler. The ground is
the z = 0 half-plane. Normal contact is a one-sided spring-damper; tangential
contact is clamped-viscous stiction, with the damper applied implicitly
against the contact-point effective mass so large stiction coefficients stay
stable at the 2 ms step.

Actuation is PD around `default_pose + action_scale * action` with torque
clamping, uniform random torque injection resampled every substep, and a
whole-control-step action delay drawn per episode.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .dynamics import bias_forces, mass_matrix, total_energy
from .skeleton import GRAVITY, FrameKin, SkeletonSpec, perp


@dataclass
class SimConfig:
    control_hz: float = 50.0
    substeps: int = 10
    gravity: float = GRAVITY
    action_scale: float = 0.5              # rad per action unit

    # ground contact
    contact_stiffness: float = 2.0e4       # N/m
    contact_damping: float = 2.0e2         # N s/m
    tangent_damping: float = 1.0e4         # N s/m, implicitly damped
    friction_range: tuple = (2.5, 3.5)

    # domain randomization (uniform ranges; collapse a range to pin a value)
    link_mass_scale_range: tuple = (0.7, 1.3)
    torso_com_offset_range: tuple = (-0.1, 0.1)     # m, along link x
    pd_gain_scale_range: tuple = (0.75, 1.25)
    rfi_scale: float = 0.1                          # fraction of torque limit
    control_delay_range: tuple = (0.02, 0.06)       # s, rounded to whole steps
    ref_offset_x_range: tuple = (-0.02, 0.02)       # m
    ref_offset_z_range: tuple = (-0.1, 0.1)         # m

    # pushes
    push_interval: float = 1.0             # s
    push_max_speed: float = 0.5            # m/s; 0 disables

    # reset / termination
    max_reset_penetration: float = 0.01    # m
    pitch_limit: float = np.deg2rad(60.0)
    min_height_frac: float = 0.35
    track_error_limit: float = 0.5         # m, running-average keypoint error
    fixed_base: bool = False               # pin the root (test rigs)

    @property
    def control_dt(self) -> float:
        return 1.0 / self.control_hz

    @property
    def physics_dt(self) -> float:
        return self.control_dt / self.substeps


def nominal_sim_config(**overrides) -> SimConfig:
    """SimConfig with every randomized quantity pinned to its nominal value
    and pushes off: the deterministic rig for unit tests and for scoring a
    policy on the unperturbed task."""
    pinned = dict(friction_range=(3.0, 3.0),
                  link_mass_scale_range=(1.0, 1.0),
                  torso_com_offset_range=(0.0, 0.0),
                  pd_gain_scale_range=(1.0, 1.0),
                  rfi_scale=0.0,
                  control_delay_range=(0.0, 0.0),
                  ref_offset_x_range=(0.0, 0.0),
                  ref_offset_z_range=(0.0, 0.0),
                  push_max_speed=0.0)
    pinned.update(overrides)
    return SimConfig(**pinned)


@dataclass(eq=False)
class RandomizationSample:
    """Concrete per-episode draws for every randomized quantity."""
    friction: float
    link_mass_scale: np.ndarray     # (L,)
    torso_com_offset: float         # m along torso x
    kp_scale: np.ndarray            # (J,)
    kd_scale: np.ndarray            # (J,)
    rfi_scale: float
    control_delay_steps: int
    ref_offset: np.ndarray          # (2,) m added to reference positions


def sample_randomization(skel: SkeletonSpec, cfg: SimConfig,
                         rng: np.random.Generator) -> RandomizationSample:
    hz = cfg.control_hz
    delay = rng.uniform(*cfg.control_delay_range)
    return RandomizationSample(
        friction=float(rng.uniform(*cfg.friction_range)),
        link_mass_scale=rng.uniform(*cfg.link_mass_scale_range, skel.num_links),
        torso_com_offset=float(rng.uniform(*cfg.torso_com_offset_range)),
        kp_scale=rng.uniform(*cfg.pd_gain_scale_range, skel.num_joints),
        kd_scale=rng.uniform(*cfg.pd_gain_scale_range, skel.num_joints),
        rfi_scale=cfg.rfi_scale,
        control_delay_steps=int(np.rint(delay * hz)),
        ref_offset=np.array([rng.uniform(*cfg.ref_offset_x_range),
                             rng.uniform(*cfg.ref_offset_z_range)]),
    )


@dataclass(eq=False)
class PushEvent:
    env: int
    time: float
    delta_v: np.ndarray             # (2,) m/s added to root velocity


class TermReason(IntEnum):
    NONE = 0
    FALLEN = 1
    TRACKING_DIVERGED = 2


@dataclass(eq=False)
class BodyState:
    """World-frame robot state consumed by rewards and observations."""
    link_pos: np.ndarray            # (B, L, 2)
    link_rot: np.ndarray            # (B, L)
    link_vel: np.ndarray            # (B, L, 2)
    link_angvel: np.ndarray         # (B, L)
    keypoint_pos: np.ndarray        # (B, K, 2)
    keypoint_vel: np.ndarray        # (B, K, 2)
    dof_pos: np.ndarray             # (B, J)
    dof_vel: np.ndarray             # (B, J)
    com: np.ndarray                 # (B, 2)
    foot_pos: np.ndarray            # (B, 2, 2) heel/toe midpoint, (left, right)
    foot_vel: np.ndarray            # (B, 2, 2)
    foot_pitch: np.ndarray          # (B, 2)
    foot_force: np.ndarray          # (B, 2, 2) columns (normal, tangential)
    root_pos: np.ndarray            # (B, 2)
    root_pitch: np.ndarray          # (B,)
    root_vel: np.ndarray            # (B, 2)
    root_pitch_rate: np.ndarray     # (B,)


@dataclass(eq=False)
class StepInfo:
    """Per-control-step actuation and contact bookkeeping."""
    applied_torque: np.ndarray      # (B, J) mean over substeps, RFI included
    torque_clamped: np.ndarray      # (B, J) bool, clamped on any substep
    dof_pos_violation: np.ndarray   # (B,) bool, any joint outside angle limits
    dof_vel_violation: np.ndarray   # (B,) bool, any joint over speed limit
    dof_acc: np.ndarray             # (B, J) rad/s^2 across the control step
    min_normal_force: np.ndarray    # (B,) most negative would-be normal force
    max_cone_excess: np.ndarray     # (B,) max |Ft| - mu*Fn over substeps


class Simulator:
    """Fixed-size batch of independent planar bipeds over one skeleton."""

    def __init__(self, skel: SkeletonSpec, cfg: SimConfig, batch: int):
        self.skel = skel
        self.cfg = cfg
        self.batch = batch
        t = skel.tables
        B, L, J, n = batch, skel.num_links, skel.num_joints, skel.num_dof
        self.q = np.zeros((B, n))
        self.qd = np.zeros((B, n))
        self.time = np.zeros(B)
        self.rng: list = [np.random.default_rng(i) for i in range(B)]
        self.sample: list = [None] * B

        # per-episode effective parameters (randomization applied at reset)
        self.mass = np.tile(t.mass, (B, 1))
        self.inertia = np.tile(t.inertia, (B, 1))
        self.com_offset = np.tile(t.com_offset, (B, 1, 1))
        self.kp = np.tile(t.kp, (B, 1))
        self.kd = np.tile(t.kd, (B, 1))
        self.friction = np.full(B, float(np.mean(cfg.friction_range)))
        self.rfi = np.full(B, cfg.rfi_scale)
        self.delay_steps = np.ones(B, dtype=int)
        self.ref_offset = np.zeros((B, 2))

        # action delay ring: slot k holds the action submitted k steps ago
        ring = max(2, int(np.rint(cfg.control_delay_range[1] * cfg.control_hz)) + 1)
        self._act_ring = np.zeros((B, ring, J))
        self._foot_force = np.zeros((B, 2, 2))
        self.kin = FrameKin(skel, self.q, self.qd)

        # collision probes for the fallen check: origins, COM points and
        # keypoints of every non-foot link
        probes = []
        foot_set = set(t.foot_link.tolist())
        for l in range(L):
            if l in foot_set:
                continue
            probes.append((l, np.zeros(2)))
            probes.append((l, t.com_offset[l]))
        for k in range(len(t.kp_link)):
            if t.kp_link[k] not in foot_set:
                probes.append((int(t.kp_link[k]), t.kp_offset[k]))
        self._probe_link = np.array([p[0] for p in probes], dtype=int)
        self._probe_offset = np.array([p[1] for p in probes]).reshape(-1, 2)

        # nominal standing height: default pose settled onto the ground
        row = np.concatenate([[0.0, 0.0, 0.0], skel.default_pose])[None]
        kin0 = FrameKin(skel, row)
        cz = kin0.contact_pos()[0, :, 1] if len(t.contact_link) else np.zeros(1)
        self.nominal_height = float(-cz.min()) if len(t.contact_link) else 0.0

    # -- episode management -------------------------------------------------

    def reset(self, env_ids, pose_rows, rngs) -> None:
        """Place envs at given pose rows with feet settled on the ground.

        Raises ValueError when a pose starts more than `max_reset_penetration`
        below the plane: such a clip frame is malformed, not recoverable.
        """
        t = self.skel.tables
        env_ids = np.atleast_1d(np.asarray(env_ids, dtype=int))
        pose_rows = np.atleast_2d(np.asarray(pose_rows, dtype=float)).copy()
        if len(t.contact_link):
            kin = FrameKin(self.skel, pose_rows)
            low = kin.contact_pos()[:, :, 1].min(axis=1)
            if np.any(low < -self.cfg.max_reset_penetration):
                worst = float(low.min())
                raise ValueError(
                    f"initial pose penetrates the ground by {-worst:.4f} m "
                    f"(limit {self.cfg.max_reset_penetration}); bad clip frame")
            pose_rows[:, 1] -= np.minimum(low, 0.0)   # lift out, never pull down
        self.q[env_ids] = pose_rows
        self.qd[env_ids] = 0.0
        self.time[env_ids] = 0.0
        self._foot_force[env_ids] = 0.0

        for e, g in zip(env_ids, rngs):
            self.rng[e] = g
            s = sample_randomization(self.skel, self.cfg, g)
            self.sample[e] = s
            self.mass[e] = t.mass * s.link_mass_scale
            self.inertia[e] = t.inertia * s.link_mass_scale
            self.com_offset[e] = t.com_offset
            self.com_offset[e, t.base, 0] += s.torso_com_offset
            self.kp[e] = t.kp * s.kp_scale
            self.kd[e] = t.kd * s.kd_scale
            self.friction[e] = s.friction
            self.rfi[e] = s.rfi_scale
            self.delay_steps[e] = s.control_delay_steps
            self.ref_offset[e] = s.ref_offset

        # hold the initial pose through the delay horizon
        hold = (pose_rows[:, 3:] - self.skel.default_pose) / self.cfg.action_scale
        self._act_ring[env_ids] = hold[:, None, :]
        self.kin = FrameKin(self.skel, self.q, self.qd)

    def apply_push(self, env_ids, delta_v) -> None:
        """Instantaneous root velocity change (m/s)."""
        self.qd[env_ids, 0:2] += delta_v

    def draw_push(self, env_id: int) -> np.ndarray:
        """Uniform direction, uniform magnitude in [0, push_max_speed]."""
        g = self.rng[env_id]
        ang = g.uniform(0.0, 2.0 * np.pi)
        mag = g.uniform(0.0, self.cfg.push_max_speed)
        return mag * np.array([np.cos(ang), np.sin(ang)])

    # -- stepping -----------------------------------------------------------

    def step(self, actions: np.ndarray) -> StepInfo:
        cfg = self.cfg
        skel = self.skel
        J = skel.num_joints
        B = self.batch
        dt = cfg.physics_dt

        self._act_ring[:, 1:] = self._act_ring[:, :-1]
        self._act_ring[:, 0] = actions
        applied = self._act_ring[np.arange(B), self.delay_steps]
        target = skel.default_pose + cfg.action_scale * applied

        rfi_draws = np.stack([g.uniform(-1.0, 1.0, (cfg.substeps, J)) for g in self.rng])
        rfi_amp = self.rfi[:, None] * skel.tables.torque_limit

        qd_before = self.qd[:, 3:].copy()
        tau_sum = np.zeros((B, J))
        clamped = np.zeros((B, J), dtype=bool)
        vel_violation = np.zeros(B, dtype=bool)
        min_fn = np.zeros(B)
        max_cone = np.full(B, -np.inf)

        kin = self.kin
        for s in range(cfg.substeps):
            tau_pd = self.kp * (target - self.q[:, 3:]) - self.kd * self.qd[:, 3:]
            lim = skel.tables.torque_limit
            clamped |= np.abs(tau_pd) > lim
            tau = np.clip(tau_pd, -lim, lim) + rfi_amp * rfi_draws[:, s]
            tau_sum += tau
            vel_violation |= np.any(np.abs(self.qd[:, 3:]) > skel.tables.vel_limit, axis=1)

            M = mass_matrix(kin, self.mass, self.inertia, self.com_offset)
            rhs = -bias_forces(kin, self.mass, self.inertia, self.com_offset, cfg.gravity)
            rhs[:, 3:] += tau

            fn_min, cone = self._contact_forces(kin, M, rhs, dt)
            min_fn = np.minimum(min_fn, fn_min)
            max_cone = np.maximum(max_cone, cone)

            if cfg.fixed_base:
                qdd = np.zeros_like(self.q)
                qdd[:, 3:] = np.linalg.solve(M[:, 3:, 3:], rhs[:, 3:, None])[..., 0]
            else:
                qdd = np.linalg.solve(M, rhs[..., None])[..., 0]
            self.qd += dt * qdd
            if cfg.fixed_base:
                self.qd[:, :3] = 0.0
            self.q += dt * self.qd
            kin = FrameKin(skel, self.q, self.qd)

        self.kin = kin
        self.time += cfg.control_dt
        dof_acc = (self.qd[:, 3:] - qd_before) / cfg.control_dt
        t = skel.tables
        pos_violation = np.any((self.q[:, 3:] < t.angle_lo) | (self.q[:, 3:] > t.angle_hi),
                               axis=1)
        return StepInfo(
            applied_torque=tau_sum / cfg.substeps,
            torque_clamped=clamped,
            dof_pos_violation=pos_violation,
            dof_vel_violation=vel_violation,
            dof_acc=dof_acc,
            min_normal_force=min_fn,
            max_cone_excess=max_cone,
        )

    def _contact_forces(self, kin: FrameKin, M, rhs, dt):
        """Accumulate ground forces into rhs; returns stability diagnostics.

        The spring-damper law is evaluated implicitly at the end-of-substep
        point velocities, with all contact components solved together through
        the contact-space inverse inertia (a fixed number of Gauss-Seidel
        sweeps, so stepping stays deterministic).  Evaluating the law at the
        current velocities instead launches the light feet out of penetration
        within one substep and the stance rocks heel-to-toe forever.  Both
        treatments agree as dt -> 0.
        """
        cfg = self.cfg
        t = self.skel.tables
        B = self.batch
        if not len(t.contact_link):
            self._foot_force[:] = 0.0
            return np.zeros(B), np.full(B, -np.inf)

        cpos = kin.contact_pos()                     # (B, C, 2)
        cvel = kin.contact_vel()
        pen = cpos[..., 1] < 0.0
        if not pen.any():
            self._foot_force[:] = 0.0
            return np.zeros(B), np.full(B, -np.inf)

        # point Jacobians: (B, C, 2, n) -> rows (tan, nrm) per point
        C = cpos.shape[1]
        jac = np.stack([kin.point_jacobian(t.contact_link[c], cpos[:, c])
                        for c in range(C)], axis=1)
        jf = jac.reshape(B, 2 * C, -1)
        w = jf @ np.linalg.solve(M, np.swapaxes(jf, 1, 2))   # (B, 2C, 2C)
        u_free = (cvel.reshape(B, 2 * C)
                  + dt * np.einsum("brn,bn->br", jf, np.linalg.solve(M, rhs[..., None])[..., 0]))

        kn = cfg.contact_stiffness
        cn = cfg.contact_damping
        ct = cfg.tangent_damping
        kd_n = kn * dt + cn        # implicit penetration update folds into damping
        z = cpos[..., 1]
        mu = self.friction[:, None]

        lam = np.zeros((B, 2 * C))
        u = u_free.copy()          # predicted end-of-substep point velocities
        for _ in range(8):
            for i in range(C):
                ti, ni = 2 * i, 2 * i + 1
                r_n = u[:, ni] - dt * w[:, ni, ni] * lam[:, ni]
                ln = (-kn * z[:, i] - kd_n * r_n) / (1.0 + kd_n * dt * w[:, ni, ni])
                ln = np.where(pen[:, i], np.maximum(ln, 0.0), 0.0)
                u += dt * w[:, :, ni] * (ln - lam[:, ni])[:, None]
                lam[:, ni] = ln

                r_t = u[:, ti] - dt * w[:, ti, ti] * lam[:, ti]
                lt = -ct * r_t / (1.0 + ct * dt * w[:, ti, ti])
                cone = mu[:, 0] * lam[:, ni]
                lt = np.where(pen[:, i], np.clip(lt, -cone, cone), 0.0)
                u += dt * w[:, :, ti] * (lt - lam[:, ti])[:, None]
                lam[:, ti] = lt

        rhs += np.einsum("bnr,br->bn", np.swapaxes(jf, 1, 2), lam)

        force = lam.reshape(B, C, 2)                 # (tan, nrm) per point
        ff = force.reshape(B, 2, 2, 2).sum(axis=2)   # per foot: heel + toe
        self._foot_force[:] = ff[..., ::-1]          # store (normal, tangential)

        fn = force[..., 1]
        cone_excess = (np.abs(force[..., 0]) - self.friction[:, None] * fn).max(axis=1)
        return fn.min(axis=1), cone_excess

    # -- state export ---------------------------------------------------------

    def body_state(self) -> BodyState:
        kin = self.kin
        return BodyState(
            link_pos=kin.link_pos, link_rot=kin.link_rot,
            link_vel=kin.link_vel, link_angvel=kin.link_angvel,
            keypoint_pos=kin.keypoint_pos(), keypoint_vel=kin.keypoint_vel(),
            dof_pos=self.q[:, 3:].copy(), dof_vel=self.qd[:, 3:].copy(),
            com=kin.com(self.mass, self.com_offset),
            foot_pos=kin.foot_center(), foot_vel=kin.foot_center_vel(),
            foot_pitch=kin.foot_pitch(), foot_force=self._foot_force.copy(),
            root_pos=self.q[:, 0:2].copy(), root_pitch=self.q[:, 2].copy(),
            root_vel=self.qd[:, 0:2].copy(), root_pitch_rate=self.qd[:, 2].copy(),
        )

    def energy(self) -> np.ndarray:
        return total_energy(self.kin, self.mass, self.inertia, self.com_offset,
                            self.cfg.gravity)

    def check_termination(self, tracking_err_avg=None) -> np.ndarray:
        """(B,) TermReason codes from the current state.

        `tracking_err_avg` is the caller's running-average keypoint error (m);
        pass None when no reference is being tracked.
        """
        cfg = self.cfg
        fallen = np.abs(self.q[:, 2]) > cfg.pitch_limit
        if self.nominal_height > 0.0:
            fallen |= self.q[:, 1] < cfg.min_height_frac * self.nominal_height
        if len(self._probe_link):
            pz = self.kin._points(self._probe_link, self._probe_offset)[..., 1]
            fallen |= np.any(pz < 0.0, axis=1)
        reason = np.where(fallen, TermReason.FALLEN, TermReason.NONE).astype(np.int8)
        if tracking_err_avg is not None:
            diverged = (~fallen) & (tracking_err_avg > cfg.track_error_limit)
            reason[diverged] = TermReason.TRACKING_DIVERGED
        return reason
