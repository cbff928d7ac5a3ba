"""Teacher-to-student distillation on deployable observations.

The student rolls out its own actions (dataset aggregation, no expert
mixing by default, though a mixing schedule is exposed); every visited
state is relabeled with the teacher's mean action computed from the
privileged view, and the student regresses onto those means. The student's
input normalizer collects statistics during the first rollout only and is
frozen before the first gradient step, so the deployed scaling never
drifts.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nets import (AdamState, PolicyParams, RunningNorm, adam_step,
                   clip_grad_norm, grads_to_vec, init_policy, mlp_backward,
                   mlp_forward, params_to_vec, policy_forward, sample_actions,
                   vec_to_params)
from .ppo import TrainLog, TrainingDiverged


@dataclass
class DaggerConfig:
    iterations: int = 30
    horizon: int = 32                 # rollout steps per iteration
    learning_rate: float = 1e-3
    adam_betas: tuple = (0.9, 0.999)
    epochs: int = 5
    batch_size: int = 64
    max_grad_norm: float = 0.2
    init_noise_std: float = 0.001
    hidden: tuple = (512, 256, 128)
    activation: str = "elu"
    max_dataset: int = 50_000         # FIFO cap on aggregated states
    beta: float = 0.0                 # expert-action mixing probability
    holdout_every: int = 10           # iteration-0 states kept for the gap probe

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError("beta must be a probability")


def dagger_loss(student: PolicyParams, norm: RunningNorm,
                obs_raw: np.ndarray, labels: np.ndarray) -> float:
    """Mean squared action gap between student means and teacher labels."""
    mean, _ = policy_forward(student, norm(obs_raw))
    return float(np.mean((mean - labels) ** 2))


def _regression_pass(student: PolicyParams, norm: RunningNorm,
                     adam: AdamState, obs_raw, labels, cfg: DaggerConfig,
                     rng: np.random.Generator) -> float:
    n_total = obs_raw.shape[0]
    losses = []
    for _ in range(cfg.epochs):
        perm = rng.permutation(n_total)
        for start in range(0, n_total, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            x = norm(obs_raw[idx].astype(float))
            y = labels[idx].astype(float)
            mean, cache = mlp_forward(student.net, x)
            err = mean - y
            loss = float(np.mean(err * err))
            if not np.isfinite(loss):
                raise TrainingDiverged("non-finite distillation loss",
                                       {"loss": loss})
            d_mean = 2.0 * err / err.size
            grads = mlp_backward(student.net, cache, d_mean)
            grad = grads_to_vec(grads, np.zeros_like(student.log_std))
            grad, _ = clip_grad_norm(grad, cfg.max_grad_norm)
            vec = params_to_vec(student)
            vec_to_params(adam_step(adam, vec, grad), student)
            losses.append(loss)
    return float(np.mean(losses))


def distill_student(teacher: dict, make_env, cfg: DaggerConfig,
                    seed: int = 0, progress=None):
    """Returns ({policy, norm}, TrainLog).

    `teacher` is the bundle from train_teacher (policy + obs normalizer).
    `make_env` must build a student-mode environment batch; the sensor
    noise configured there stays on during distillation.
    """
    rng = np.random.default_rng(seed)
    env = make_env(seed)
    obs = env.reset_all()
    obs_dim, act_dim = obs.shape[1], env.skel.num_joints
    student = init_policy(rng, obs_dim, act_dim, tuple(cfg.hidden),
                          cfg.activation, cfg.init_noise_std)
    norm = RunningNorm(obs_dim)
    adam = AdamState(lr=cfg.learning_rate, beta1=cfg.adam_betas[0],
                     beta2=cfg.adam_betas[1])
    log = TrainLog(seed=seed)

    data_obs = np.empty((0, obs_dim), dtype=np.float32)
    data_lab = np.empty((0, act_dim), dtype=np.float32)
    hold_obs = hold_lab = None
    gap_before = np.nan

    t_policy, t_norm = teacher["policy"], teacher["norm"]

    for it in range(cfg.iterations):
        step_obs = np.empty((cfg.horizon, env.batch, obs_dim),
                            dtype=np.float32)
        step_lab = np.empty((cfg.horizon, env.batch, act_dim),
                            dtype=np.float32)
        for t in range(cfg.horizon):
            teacher_mean, _ = policy_forward(t_policy,
                                             t_norm(env.teacher_view()))
            step_obs[t] = obs
            step_lab[t] = teacher_mean
            norm.update(obs)
            mean, std = policy_forward(student, norm(obs))
            actions = sample_actions(mean, std, rng)
            if cfg.beta > 0.0:
                use_expert = rng.random(env.batch) < cfg.beta
                actions[use_expert] = teacher_mean[use_expert]
            obs = env.step(actions).obs

        flat_obs = step_obs.reshape(-1, obs_dim)
        flat_lab = step_lab.reshape(-1, act_dim)
        if it == 0:
            keep = np.arange(flat_obs.shape[0]) % cfg.holdout_every == 0
            hold_obs = flat_obs[keep].astype(float)
            hold_lab = flat_lab[keep].astype(float)
            flat_obs, flat_lab = flat_obs[~keep], flat_lab[~keep]
            norm.frozen = True
            gap_before = dagger_loss(student, norm, hold_obs, hold_lab)
        data_obs = np.concatenate([data_obs, flat_obs])[-cfg.max_dataset:]
        data_lab = np.concatenate([data_lab, flat_lab])[-cfg.max_dataset:]

        loss = _regression_pass(student, norm, adam, data_obs, data_lab,
                                cfg, rng)
        gap = dagger_loss(student, norm, hold_obs, hold_lab)
        row = {"iteration": it, "dataset_size": data_obs.shape[0],
               "loss": loss, "holdout_gap": gap,
               "holdout_gap_before": gap_before,
               "action_std": float(np.exp(student.log_std).mean())}
        log.append(**row)
        if progress is not None:
            progress(f"iter {it + 1}/{cfg.iterations} "
                     f"loss {loss:.3e} holdout {gap:.3e}")
    return {"policy": student, "norm": norm}, log
