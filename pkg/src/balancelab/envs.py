"""Reference-tracking balance environments over the batched simulator.

A `BalanceEnv` couples one refined motion clip to a batch of simulated
bipeds: it schedules root pushes, advances the per-env reference frame,
assembles reward inputs (contact labels, air timers, termination flags) and
emits teacher or student observations. Episodes auto-reset; the observation
returned for a finished env belongs to its new episode, with the terminal
observation surfaced separately for value bootstrapping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .observation import (HistoryBuffer, OUNoiseState, build_student_obs,
                          build_teacher_obs, observation_layout, ou_step,
                          student_record)
from .rewards import RewardConfig, compute_reward, contact_labels
from .simulator import (BodyState, PushEvent, SimConfig, Simulator, TermReason)
from .skeleton import FrameKin, MotionClip, SkeletonSpec, SupportPhase


def standing_clip(skel: SkeletonSpec, seconds: float = 4.0,
                  fps: float = 50.0) -> MotionClip:
    """Constant default-pose double-support hold, settled on the ground."""
    T = max(2, int(round(seconds * fps)))
    row = np.concatenate([[0.0, 0.0, 0.0], skel.default_pose])
    kin = FrameKin(skel, row[None])
    low = kin.contact_pos()[0, :, 1].min()
    row[1] -= low
    frames = np.tile(row, (T, 1))
    phases = np.full(T, SupportPhase.DOUBLE, dtype=np.int8)
    return MotionClip(fps, frames, phases, source_id="hold")


class ReferenceTrack:
    """Per-frame kinematic reference states precomputed from a clip.

    Velocities come from finite-differenced generalized coordinates pushed
    through the kinematics, so every derived quantity (link, keypoint, root)
    is mutually consistent.
    """

    def __init__(self, skel: SkeletonSpec, clip: MotionClip):
        self.skel = skel
        self.clip = clip
        q = clip.frames
        qd = np.empty_like(q)
        qd[1:-1] = 0.5 * (q[2:] - q[:-2])
        qd[0] = q[1] - q[0]
        qd[-1] = q[-1] - q[-2]
        qd = qd * clip.fps
        kin = FrameKin(skel, q, qd)
        self.link_pos = kin.link_pos
        self.link_rot = kin.link_rot
        self.link_vel = kin.link_vel
        self.link_angvel = kin.link_angvel
        self.keypoint_pos = kin.keypoint_pos()
        self.keypoint_vel = kin.keypoint_vel()
        self.com = kin.com()
        self.foot_pos = kin.foot_center()
        self.foot_vel = kin.foot_center_vel()
        self.foot_pitch = kin.foot_pitch()
        self.q = q
        self.qd = qd

    def __len__(self) -> int:
        return len(self.q)

    def state(self, frame: np.ndarray, offset: np.ndarray) -> BodyState:
        """Reference BodyState at per-env `frame`, shifted by `offset` (the
        per-episode motion-reference offset; the robot itself is never
        moved). Contact forces are zero: the reference is kinematic."""
        f = np.asarray(frame, dtype=int)
        off = offset[:, None, :]
        return BodyState(
            link_pos=self.link_pos[f] + off,
            link_rot=self.link_rot[f].copy(),
            link_vel=self.link_vel[f].copy(),
            link_angvel=self.link_angvel[f].copy(),
            keypoint_pos=self.keypoint_pos[f] + off,
            keypoint_vel=self.keypoint_vel[f].copy(),
            dof_pos=self.q[f, 3:].copy(),
            dof_vel=self.qd[f, 3:].copy(),
            com=self.com[f] + offset,
            foot_pos=self.foot_pos[f] + off,
            foot_vel=self.foot_vel[f].copy(),
            foot_pitch=self.foot_pitch[f].copy(),
            foot_force=np.zeros((len(f), 2, 2)),
            root_pos=self.q[f, 0:2] + offset,
            root_pitch=self.q[f, 2].copy(),
            root_vel=self.qd[f, 0:2].copy(),
            root_pitch_rate=self.qd[f, 2].copy(),
        )


@dataclass(eq=False)
class EnvStep:
    """Everything a learner or evaluator needs from one control step."""
    obs: np.ndarray                 # (B, D) post-reset observation
    reward: np.ndarray              # (B,) scaled total
    terminated: np.ndarray          # (B,) bool, failure this step
    truncated: np.ndarray           # (B,) bool, clip exhausted this step
    final_obs: np.ndarray           # (B, D) pre-reset observation
    breakdown: object               # RewardBreakdown, unscaled
    term_reason: np.ndarray         # (B,) TermReason codes
    body: BodyState
    ref: BodyState
    labels: object                  # ContactLabels
    push_delta: np.ndarray          # (B, 2) applied this step (zeros if none)
    step_info: object               # simulator StepInfo


class BalanceEnv:
    """Batch of tracking episodes on one clip.

    mode "teacher": privileged observations, no sensor noise.
    mode "student": deployable observations with coupled OU pitch noise and
    a 25-step proprioception history.
    """

    def __init__(self, skel: SkeletonSpec, clip: MotionClip,
                 sim_cfg: SimConfig | None = None,
                 reward_cfg: RewardConfig | None = None,
                 mode: str = "teacher", batch: int = 256,
                 reward_scale: float = 0.02, noise_enabled: bool = True,
                 ou_theta: float = 25.0, ou_sigma: float = 250.0,
                 ou_scheme: str = "euler", master_seed: int = 0,
                 global_targets: bool = False):
        if mode not in ("teacher", "student"):
            raise ValueError("mode must be 'teacher' or 'student'")
        self.skel = skel
        self.mode = mode
        self.batch = batch
        self.global_targets = global_targets
        self.reward_scale = reward_scale
        self.sim_cfg = sim_cfg or SimConfig()
        self.reward_cfg = reward_cfg or RewardConfig()
        self.sim = Simulator(skel, self.sim_cfg, batch)
        self.track = ReferenceTrack(skel, clip)
        self.noise_enabled = noise_enabled and mode == "student"

        layout = observation_layout(skel)
        self.obs_dim = (layout["teacher_dim"] if mode == "teacher"
                        else layout["student_dim"])
        self.layout = layout
        J = skel.num_joints
        self.ou = OUNoiseState(np.zeros(batch), theta=ou_theta,
                               sigma=ou_sigma if self.noise_enabled else 0.0,
                               dt=self.sim_cfg.control_dt, scheme=ou_scheme)
        self.history = HistoryBuffer(batch, layout["history_record_dim"])
        self.prev_action = np.zeros((batch, J))
        self.air_timers = np.zeros((batch, 2))
        self.frame = np.zeros(batch, dtype=int)
        self.err_sum = np.zeros(batch)
        self.err_steps = np.zeros(batch, dtype=int)
        self.next_push = np.full(batch, self.sim_cfg.push_interval)
        self.push_events: list[PushEvent] = []
        self.ep_return = np.zeros(batch)
        self.ep_length = np.zeros(batch, dtype=int)
        self._completed: list = []
        self._ss = np.random.SeedSequence(master_seed)
        self._ou_rng: list = [np.random.default_rng(0)] * batch
        self.reset_all()

    # -- episode management ---------------------------------------------------

    def _episode_streams(self, n: int):
        """Two independent generators per episode: one drives the simulator
        (randomization, noise injection, pushes), one drives sensor noise, so
        either can be replayed or silenced without disturbing the other."""
        pairs = [child.spawn(2) for child in self._ss.spawn(n)]
        sim_rngs = [np.random.default_rng(p[0]) for p in pairs]
        ou_rngs = [np.random.default_rng(p[1]) for p in pairs]
        return sim_rngs, ou_rngs

    def reset_all(self) -> np.ndarray:
        return self.reset_envs(np.arange(self.batch))

    def reset_envs(self, env_ids, rngs=None, ou_rngs=None) -> np.ndarray:
        """Start fresh episodes at clip frame 0; returns the full-batch
        observation (only the reset envs' rows changed)."""
        env_ids = np.atleast_1d(np.asarray(env_ids, dtype=int))
        if rngs is None:
            rngs, spawned_ou = self._episode_streams(env_ids.size)
            ou_rngs = ou_rngs or spawned_ou
        elif ou_rngs is None:
            _, ou_rngs = self._episode_streams(env_ids.size)
        for e, g in zip(env_ids, ou_rngs):
            self._ou_rng[e] = g
        rows = np.tile(self.track.q[0], (env_ids.size, 1))
        self.sim.reset(env_ids, rows, rngs)
        self.frame[env_ids] = 0
        self.err_sum[env_ids] = 0.0
        self.err_steps[env_ids] = 0
        self.air_timers[env_ids] = 0.0
        self.next_push[env_ids] = self.sim_cfg.push_interval
        self.ep_return[env_ids] = 0.0
        self.ep_length[env_ids] = 0
        self.ou.value[env_ids] = 0.0
        # the held pose is what the delay ring already contains, so the first
        # action-rate penalty measures real change, not the reset itself
        hold = (rows[:, 3:] - self.skel.default_pose) / self.sim_cfg.action_scale
        self.prev_action[env_ids] = hold
        body = self.sim.body_state()
        ref = self._reference()
        if self.mode == "student":
            record = student_record(body, self.prev_action, self.ou)
            mask = np.zeros(self.batch, dtype=bool)
            mask[env_ids] = True
            self.history.reset(record, env_mask=mask)
        return self._build_obs(body, ref)

    def _reference(self) -> BodyState:
        return self.track.state(self.frame, self.sim.ref_offset)

    def _build_obs(self, body: BodyState, ref: BodyState) -> np.ndarray:
        if self.mode == "teacher":
            return build_teacher_obs(body, ref, self.prev_action)
        return build_student_obs(body, ref, self.prev_action, self.ou,
                                 self.history, self.global_targets)

    def teacher_view(self) -> np.ndarray:
        """Privileged observation of the current state, regardless of mode.

        Distillation relabels every state the student visits through this
        view; it sees the true pitch, never the sensor-noise channel.
        """
        return build_teacher_obs(self.sim.body_state(), self._reference(),
                                 self.prev_action)

    # -- stepping -------------------------------------------------------------

    def _apply_scheduled_pushes(self) -> np.ndarray:
        delta = np.zeros((self.batch, 2))
        if self.sim_cfg.push_max_speed <= 0.0:
            return delta
        due = self.sim.time + 1e-9 >= self.next_push
        for e in np.flatnonzero(due):
            d = self.sim.draw_push(e)
            delta[e] = d
            self.push_events.append(PushEvent(env=int(e),
                                              time=float(self.sim.time[e]),
                                              delta_v=d))
        if due.any():
            self.sim.apply_push(due, delta[due])
            self.next_push[due] += self.sim_cfg.push_interval
        return delta

    def step(self, actions: np.ndarray) -> EnvStep:
        actions = np.asarray(actions, dtype=float)
        if actions.shape != (self.batch, self.skel.num_joints):
            raise ValueError(f"actions must be {(self.batch, self.skel.num_joints)}")
        if not np.all(np.isfinite(actions)):
            raise ValueError("non-finite action")

        push_delta = self._apply_scheduled_pushes()
        step_info = self.sim.step(actions)
        self.frame = np.minimum(self.frame + 1, len(self.track) - 1)
        if self.noise_enabled:
            self.ou = ou_step(self.ou, self._ou_rng)

        body = self.sim.body_state()
        ref = self._reference()
        labels = contact_labels(body.foot_force[:, :, 0],
                                ref.foot_pos[:, :, 1], self.reward_cfg)

        kp_err = np.linalg.norm(body.keypoint_pos - ref.keypoint_pos,
                                axis=2).mean(axis=1)
        self.err_sum += kp_err
        self.err_steps += 1
        term_reason = self.sim.check_termination(self.err_sum / self.err_steps)
        terminated = term_reason != TermReason.NONE

        breakdown = compute_reward(body, ref, labels, actions,
                                   self.prev_action, self.air_timers,
                                   step_info, self.reward_cfg,
                                   terminated=terminated)
        dt = self.sim_cfg.control_dt
        self.air_timers = np.where(labels.robot, 0.0,
                                   self.air_timers + dt)
        truncated = (self.frame >= len(self.track) - 1) & ~terminated
        self.prev_action = actions.copy()

        final_obs = self._build_obs(body, ref)
        if self.mode == "student":
            self.history.push(student_record(body, self.prev_action, self.ou))

        reward = breakdown.total * self.reward_scale
        self.ep_return += reward
        self.ep_length += 1

        # live envs keep the observation built before the history push; only
        # the rows that actually reset are replaced with their new episode's
        # first observation
        obs = final_obs
        done = terminated | truncated
        if done.any():
            for e in np.flatnonzero(done):
                self._completed.append((self.ep_return[e],
                                        int(self.ep_length[e])))
            reset_obs = self.reset_envs(np.flatnonzero(done))
            obs = final_obs.copy()
            obs[done] = reset_obs[done]

        return EnvStep(obs=obs, reward=reward,
                       terminated=terminated, truncated=truncated,
                       final_obs=final_obs, breakdown=breakdown,
                       term_reason=term_reason, body=body, ref=ref,
                       labels=labels, push_delta=push_delta,
                       step_info=step_info)

    def drain_episode_stats(self):
        """(returns, lengths) of episodes finished since the last drain."""
        done = self._completed
        self._completed = []
        returns = np.array([r for r, _ in done])
        lengths = np.array([n for _, n in done], dtype=int)
        return returns, lengths
