"""Clipped-surrogate policy optimization for the privileged teacher.

The rollout buffer, advantage recursion, and update loop are deliberately
flat numpy; a single Adam state covers policy, log-std, and value parameters
so the gradient-norm clip acts on the whole update direction at once.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, fields

import numpy as np

from .nets import (AdamState, MlpParams, PolicyParams, RunningNorm,
                   adam_step, clip_grad_norm, gaussian_entropy, gaussian_logp,
                   grads_to_vec, init_policy, init_value, mlp_backward,
                   mlp_forward, params_to_vec, policy_forward, sample_actions,
                   save_checkpoint, value_forward, vec_to_params)


@dataclass
class PpoConfig:
    learning_rate: float = 1e-3
    adam_betas: tuple = (0.9, 0.999)
    gamma: float = 0.99
    clip_ratio: float = 0.2
    entropy_coef: float = 0.005
    value_coef: float = 1.0
    max_grad_norm: float = 0.2
    epochs: int = 5
    batch_size: int = 64
    gae_lambda: float = 0.95
    horizon: int = 32
    num_envs: int = 256
    total_steps: int = 2_000_000
    hidden: tuple = (512, 256, 128)
    activation: str = "elu"
    init_noise_std: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.clip_ratio <= 0.0:
            raise ValueError("clip ratio must be positive")
        if (self.horizon * self.num_envs) % self.batch_size != 0:
            raise ValueError("batch size must divide the rollout buffer")

    @property
    def iterations(self) -> int:
        return max(1, self.total_steps // (self.horizon * self.num_envs))


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class TrainLog:
    """Append-only per-iteration records, exportable as CSV."""
    seed: int
    rows: list = field(default_factory=list)

    def append(self, **row) -> None:
        self.rows.append({**row, "seed": self.seed})

    def column(self, key: str) -> np.ndarray:
        return np.array([r.get(key, np.nan) for r in self.rows], dtype=float)

    def to_csv(self, path) -> None:
        keys: list = []
        for r in self.rows:
            keys += [k for k in r if k not in keys]
        with open(path, "w", newline="") as f:
            w = csv.DictWriter(f, fieldnames=keys)
            w.writeheader()
            w.writerows(self.rows)


@dataclass(eq=False)
class RolloutBuffer:
    obs: np.ndarray           # (T, B, D) normalized
    actions: np.ndarray       # (T, B, J)
    logp: np.ndarray          # (T, B)
    rewards: np.ndarray       # (T, B)
    dones: np.ndarray         # (T, B) bool, episode ended after this step
    truncated: np.ndarray     # (T, B) bool, subset of dones
    values: np.ndarray        # (T + 1, B), last row bootstraps the tail
    boot_values: np.ndarray   # (T, B), value of the pre-reset obs where truncated
    stats: dict


def gae_advantages(rewards: np.ndarray, values: np.ndarray,
                   dones: np.ndarray, gamma: float, lam: float,
                   truncated: np.ndarray | None = None,
                   boot_values: np.ndarray | None = None):
    """Generalized-advantage recursion; returns raw (advantages, returns).

    `values` carries T+1 rows so the tail bootstraps; where `truncated`
    is set the successor value comes from `boot_values` (the episode ended
    by the clip running out, not by failure).
    """
    T, B = rewards.shape
    if values.shape != (T + 1, B):
        raise ValueError("values must have one more row than rewards")
    cont = 1.0 - dones.astype(float)
    adv = np.zeros((T, B))
    last = np.zeros(B)
    for t in reversed(range(T)):
        next_v = values[t + 1] * cont[t]
        if truncated is not None:
            next_v = next_v + truncated[t] * boot_values[t]
        delta = rewards[t] + gamma * next_v - values[t]
        last = delta + gamma * lam * cont[t] * last
        adv[t] = last
    return adv, adv + values[:-1]


def collect_rollout(env, policy: PolicyParams, value: MlpParams,
                    norm: RunningNorm, obs_raw: np.ndarray, horizon: int,
                    rng: np.random.Generator):
    """Advance `env` for `horizon` control steps under the sampling policy.

    Returns (buffer, next raw observation). Episode and reward-term
    statistics ride along in buffer.stats.
    """
    B = obs_raw.shape[0]
    T = horizon
    D, J = policy.obs_dim, policy.act_dim
    buf_obs = np.empty((T, B, D))
    buf_act = np.empty((T, B, J))
    buf_logp = np.empty((T, B))
    buf_rew = np.empty((T, B))
    buf_done = np.zeros((T, B), dtype=bool)
    buf_trunc = np.zeros((T, B), dtype=bool)
    buf_val = np.empty((T + 1, B))
    buf_boot = np.zeros((T, B))

    term_sums: dict = {}

    for t in range(T):
        norm.update(obs_raw)
        obs_n = norm(obs_raw)
        mean, std = policy_forward(policy, obs_n)
        actions = sample_actions(mean, std, rng)
        buf_obs[t] = obs_n
        buf_act[t] = actions
        buf_logp[t] = gaussian_logp(mean, policy.log_std, actions)
        buf_val[t] = value_forward(value, obs_n)

        out = env.step(actions)
        buf_rew[t] = out.reward
        buf_done[t] = out.terminated | out.truncated
        buf_trunc[t] = out.truncated
        if out.truncated.any():
            rows = np.flatnonzero(out.truncated)
            buf_boot[t, rows] = value_forward(value,
                                              norm(out.final_obs[rows]))
        for f in fields(out.breakdown):
            term_sums[f.name] = term_sums.get(f.name, 0.0) \
                + float(getattr(out.breakdown, f.name).mean())
        obs_raw = out.obs

    buf_val[T] = value_forward(value, norm(obs_raw))
    ep_returns, ep_lengths = env.drain_episode_stats()
    stats = {"episode_returns": list(ep_returns),
             "episode_lengths": list(ep_lengths),
             "reward_terms": {k: v / T for k, v in term_sums.items()}}
    buf = RolloutBuffer(buf_obs, buf_act, buf_logp, buf_rew, buf_done,
                        buf_trunc, buf_val, buf_boot, stats)
    return buf, obs_raw


def _minibatch_loss_and_grads(policy: PolicyParams, value: MlpParams,
                              obs, actions, logp_old, adv, returns,
                              cfg: PpoConfig):
    n = obs.shape[0]
    a_hat = (adv - adv.mean()) / (adv.std() + 1e-8)

    mean, cache = mlp_forward(policy.net, obs)
    std = np.exp(policy.log_std)
    z = (actions - mean) / std
    logp = -0.5 * (z * z).sum(axis=1) - policy.log_std.sum() \
        - 0.5 * actions.shape[1] * np.log(2.0 * np.pi)
    ratio = np.exp(logp - logp_old)
    clipped = np.clip(ratio, 1.0 - cfg.clip_ratio, 1.0 + cfg.clip_ratio)
    unclipped_term = ratio * a_hat
    clipped_term = clipped * a_hat
    policy_loss = -np.minimum(unclipped_term, clipped_term).mean()

    entropy = gaussian_entropy(policy.log_std)

    v, v_cache = mlp_forward(value, obs)
    v = v[:, 0]
    value_loss = float(np.mean((v - returns) ** 2))

    # gradient of the scalar objective
    active = unclipped_term <= clipped_term
    g_logp = np.where(active, -ratio * a_hat / n, 0.0)
    d_mean = g_logp[:, None] * (actions - mean) / (std * std)
    d_log_std = (g_logp[:, None] * (z * z - 1.0)).sum(axis=0)
    d_log_std -= cfg.entropy_coef                       # entropy bonus
    p_grads = mlp_backward(policy.net, cache, d_mean)

    d_v = (cfg.value_coef * 2.0 * (v - returns) / n)[:, None]
    v_grads = mlp_backward(value, v_cache, d_v)

    grad = grads_to_vec(p_grads, d_log_std, v_grads)
    total = policy_loss - cfg.entropy_coef * entropy \
        + cfg.value_coef * value_loss
    kl = float(np.mean(ratio - 1.0 - np.log(np.maximum(ratio, 1e-12))))
    return total, grad, {"policy_loss": float(policy_loss),
                         "value_loss": value_loss, "entropy": entropy,
                         "approx_kl": kl}


def ppo_update(policy: PolicyParams, value: MlpParams, adam: AdamState,
               buf: RolloutBuffer, cfg: PpoConfig,
               rng: np.random.Generator) -> dict:
    """Runs cfg.epochs of shuffled minibatch updates in place; advantages
    are normalized per minibatch."""
    T, B, D = buf.obs.shape
    adv, returns = gae_advantages(buf.rewards, buf.values, buf.dones,
                                  cfg.gamma, cfg.gae_lambda,
                                  buf.truncated, buf.boot_values)
    obs = buf.obs.reshape(T * B, D)
    actions = buf.actions.reshape(T * B, -1)
    logp_old = buf.logp.reshape(T * B)
    adv = adv.reshape(T * B)
    returns = returns.reshape(T * B)

    agg: dict = {}
    count = 0
    for _ in range(cfg.epochs):
        perm = rng.permutation(T * B)
        for start in range(0, T * B, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            loss, grad, parts = _minibatch_loss_and_grads(
                policy, value, obs[idx], actions[idx], logp_old[idx],
                adv[idx], returns[idx], cfg)
            if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise TrainingDiverged(
                    "non-finite loss in policy update",
                    {"loss": loss, **parts,
                     "grad_finite": bool(np.all(np.isfinite(grad)))})
            grad, pre_norm = clip_grad_norm(grad, cfg.max_grad_norm)
            vec = params_to_vec(policy, value)
            vec = adam_step(adam, vec, grad)
            vec_to_params(vec, policy, value)
            parts["grad_norm"] = pre_norm
            for k, v in parts.items():
                agg[k] = agg.get(k, 0.0) + v
            count += 1
    return {k: v / count for k, v in agg.items()}


def train_teacher(make_env, cfg: PpoConfig, seed: int = 0,
                  checkpoint_path=None, progress=None):
    """Full teacher optimization: returns ({policy, value, norm}, TrainLog).

    `make_env` is called with the seed and must yield a reset environment
    batch. Single-worker and fully deterministic for a given (seed, cfg).
    On divergence the last consistent parameters are checkpointed before
    the error propagates.
    """
    rng = np.random.default_rng(seed)
    env = make_env(seed)
    obs = env.reset_all()
    obs_dim, act_dim = obs.shape[1], env.skel.num_joints
    policy = init_policy(rng, obs_dim, act_dim, tuple(cfg.hidden),
                         cfg.activation, cfg.init_noise_std)
    value = init_value(rng, obs_dim, tuple(cfg.hidden), cfg.activation)
    norm = RunningNorm(obs_dim)
    adam = AdamState(lr=cfg.learning_rate, beta1=cfg.adam_betas[0],
                     beta2=cfg.adam_betas[1])
    log = TrainLog(seed=seed)

    for it in range(cfg.iterations):
        buf, obs = collect_rollout(env, policy, value, norm, obs,
                                   cfg.horizon, rng)
        try:
            losses = ppo_update(policy, value, adam, buf, cfg, rng)
        except TrainingDiverged:
            if checkpoint_path is not None:
                save_checkpoint(checkpoint_path, policy, norm, value,
                                extra={"aborted_at_iteration": it})
            raise
        ep_ret = buf.stats["episode_returns"]
        ep_len = buf.stats["episode_lengths"]
        row = {"iteration": it,
               "steps": (it + 1) * cfg.horizon * env.batch,
               "mean_return": float(np.mean(ep_ret)) if ep_ret else np.nan,
               "mean_episode_length":
                   float(np.mean(ep_len)) if ep_len else np.nan,
               "action_std": float(np.exp(policy.log_std).mean()),
               **losses}
        row.update({f"rew_{k}": v
                    for k, v in buf.stats["reward_terms"].items()})
        log.append(**row)
        if progress is not None:
            progress(f"iter {it + 1}/{cfg.iterations} "
                     f"return {row['mean_return']:.2f} "
                     f"std {row['action_std']:.3f}")
    return {"policy": policy, "value": value, "norm": norm}, log
