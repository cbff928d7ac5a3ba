"""Plain-numpy policy and value networks with manual backprop.

Everything a policy-gradient learner needs and nothing more: MLPs with a
smooth exponential-linear unit, a diagonal Gaussian action head whose log
standard deviation is a free state-independent parameter, running input
normalization, flat-vector Adam, and gradient-norm clipping. Keeping the
parameters as flat vectors makes finite-difference auditing of the update
direction a one-liner.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

_LOG_2PI = float(np.log(2.0 * np.pi))


# -- activations ---------------------------------------------------------------

def _elu(x):
    return np.where(x > 0.0, x, np.expm1(np.minimum(x, 0.0)))


def _elu_grad(x):
    return np.where(x > 0.0, 1.0, np.exp(np.minimum(x, 0.0)))


def _tanh(x):
    return np.tanh(x)


def _tanh_grad(x):
    t = np.tanh(x)
    return 1.0 - t * t


def _relu(x):
    return np.maximum(x, 0.0)


def _relu_grad(x):
    return (x > 0.0).astype(float)


ACTIVATIONS = {"elu": (_elu, _elu_grad),
               "tanh": (_tanh, _tanh_grad),
               "relu": (_relu, _relu_grad)}


# -- MLP core ------------------------------------------------------------------

@dataclass(eq=False)
class MlpParams:
    """Dense layers; the last one is linear (no activation)."""
    weights: list            # [(d_in, d_out)] per layer
    biases: list             # [(d_out,)] per layer
    activation: str = "elu"

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[1]


def _orthogonal(rng: np.random.Generator, d_in: int, d_out: int,
                gain: float) -> np.ndarray:
    a = rng.standard_normal((max(d_in, d_out), min(d_in, d_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if d_in < d_out:
        q = q.T
    return gain * q[:d_in, :d_out]


def init_mlp(rng: np.random.Generator, in_dim: int, hidden: tuple,
             out_dim: int, activation: str = "elu",
             head_gain: float = 0.01) -> MlpParams:
    """Orthogonal hidden layers (gain sqrt(2)), small-gain linear head."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation '{activation}'")
    sizes = [in_dim, *hidden, out_dim]
    weights, biases = [], []
    for i in range(len(sizes) - 1):
        gain = head_gain if i == len(sizes) - 2 else np.sqrt(2.0)
        weights.append(_orthogonal(rng, sizes[i], sizes[i + 1], gain))
        biases.append(np.zeros(sizes[i + 1]))
    return MlpParams(weights, biases, activation)


def mlp_forward(p: MlpParams, x: np.ndarray):
    """Returns (output, cache) with pre-activations kept for the backward
    pass."""
    act, _ = ACTIVATIONS[p.activation]
    inputs, preacts = [x], []
    h = x
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = h @ w + b
        preacts.append(z)
        h = z if i == len(p.weights) - 1 else act(z)
        inputs.append(h)
    return h, (inputs, preacts)


def mlp_backward(p: MlpParams, cache, d_out: np.ndarray):
    """Gradients of sum(loss) wrt weights/biases given dL/d_output."""
    _, grad = ACTIVATIONS[p.activation]
    inputs, preacts = cache
    dW = [None] * len(p.weights)
    db = [None] * len(p.biases)
    delta = d_out
    for i in reversed(range(len(p.weights))):
        if i != len(p.weights) - 1:
            delta = delta * grad(preacts[i])
        dW[i] = inputs[i].T @ delta
        db[i] = delta.sum(axis=0)
        delta = delta @ p.weights[i].T
    return dW, db


# -- policy / value heads ------------------------------------------------------

@dataclass(eq=False)
class PolicyParams:
    """Gaussian policy: MLP mean, state-independent per-joint log std."""
    net: MlpParams
    log_std: np.ndarray       # (act_dim,)

    @property
    def act_dim(self) -> int:
        return self.net.out_dim

    @property
    def obs_dim(self) -> int:
        return self.net.in_dim


def init_policy(rng: np.random.Generator, obs_dim: int, act_dim: int,
                hidden: tuple = (512, 256, 128), activation: str = "elu",
                init_noise_std: float = 1.0) -> PolicyParams:
    net = init_mlp(rng, obs_dim, hidden, act_dim, activation)
    return PolicyParams(net, np.full(act_dim, np.log(init_noise_std)))


def init_value(rng: np.random.Generator, obs_dim: int,
               hidden: tuple = (512, 256, 128),
               activation: str = "elu") -> MlpParams:
    return init_mlp(rng, obs_dim, hidden, 1, activation, head_gain=1.0)


def policy_forward(params: PolicyParams, obs: np.ndarray):
    """(mean, std) for a batch of observations."""
    obs = np.atleast_2d(obs)
    if obs.shape[1] != params.obs_dim:
        raise ValueError(f"obs length {obs.shape[1]} != {params.obs_dim}")
    if not np.all(np.isfinite(obs)):
        raise ValueError("non-finite observation")
    mean, _ = mlp_forward(params.net, obs)
    if not np.all(np.isfinite(mean)):
        raise ValueError("non-finite policy output")
    std = np.exp(params.log_std)
    return mean, np.broadcast_to(std, mean.shape)


def value_forward(params: MlpParams, obs: np.ndarray) -> np.ndarray:
    v, _ = mlp_forward(params, np.atleast_2d(obs))
    return v[:, 0]


def gaussian_logp(mean: np.ndarray, log_std: np.ndarray,
                  actions: np.ndarray) -> np.ndarray:
    z = (actions - mean) / np.exp(log_std)
    return -0.5 * (z * z).sum(axis=1) - log_std.sum() \
        - 0.5 * mean.shape[1] * _LOG_2PI


def gaussian_entropy(log_std: np.ndarray) -> float:
    return float(log_std.sum() + 0.5 * log_std.size * (1.0 + _LOG_2PI))


def sample_actions(mean: np.ndarray, std: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    return mean + std * rng.standard_normal(mean.shape)


# -- running input normalization -----------------------------------------------

class RunningNorm:
    """Streaming mean/variance normalizer with an output clip at +-10.

    `frozen` stops statistics updates; normalization itself keeps working.
    The student's normalizer is frozen when distillation starts so the
    deployed observation scaling never drifts.
    """

    def __init__(self, dim: int, clip: float = 10.0):
        self.mean = np.zeros(dim)
        self.var = np.ones(dim)
        self.count = 0.0
        self.clip = clip
        self.frozen = False

    def update(self, batch: np.ndarray) -> None:
        if self.frozen:
            return
        batch = np.atleast_2d(batch)
        n = batch.shape[0]
        b_mean = batch.mean(axis=0)
        b_var = batch.var(axis=0)
        total = self.count + n
        delta = b_mean - self.mean
        new_mean = self.mean + delta * (n / total)
        m_a = self.var * self.count
        m_b = b_var * n
        self.var = (m_a + m_b + delta * delta * self.count * n / total) / total
        self.mean = new_mean
        self.count = total

    def __call__(self, x: np.ndarray) -> np.ndarray:
        y = (x - self.mean) / np.sqrt(self.var + 1e-8)
        return np.clip(y, -self.clip, self.clip)

    def state_dict(self) -> dict:
        return {"mean": self.mean.copy(), "var": self.var.copy(),
                "count": self.count, "clip": self.clip,
                "frozen": self.frozen}

    @classmethod
    def from_state(cls, state: dict) -> "RunningNorm":
        norm = cls(len(state["mean"]), clip=float(state["clip"]))
        norm.mean = np.asarray(state["mean"], dtype=float).copy()
        norm.var = np.asarray(state["var"], dtype=float).copy()
        norm.count = float(state["count"])
        norm.frozen = bool(state["frozen"])
        return norm


# -- flat-vector plumbing ------------------------------------------------------

def _param_arrays(policy: PolicyParams, value: MlpParams | None):
    arrs = [*policy.net.weights, *policy.net.biases, policy.log_std]
    if value is not None:
        arrs += [*value.weights, *value.biases]
    return arrs


def params_to_vec(policy: PolicyParams,
                  value: MlpParams | None = None) -> np.ndarray:
    return np.concatenate([a.ravel() for a in _param_arrays(policy, value)])


def vec_to_params(vec: np.ndarray, policy: PolicyParams,
                  value: MlpParams | None = None) -> None:
    """Writes `vec` back into the parameter arrays in place."""
    i = 0
    for a in _param_arrays(policy, value):
        a[...] = vec[i:i + a.size].reshape(a.shape)
        i += a.size
    if i != vec.size:
        raise ValueError("parameter vector size mismatch")


def grads_to_vec(policy_grads, log_std_grad, value_grads=None) -> np.ndarray:
    dW, db = policy_grads
    parts = [*dW, *db, log_std_grad]
    if value_grads is not None:
        vW, vb = value_grads
        parts += [*vW, *vb]
    return np.concatenate([a.ravel() for a in parts])


def clip_grad_norm(grad: np.ndarray, max_norm: float):
    """Returns (clipped gradient, pre-clip norm)."""
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


@dataclass(eq=False)
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: np.ndarray | None = None
    v: np.ndarray | None = None
    t: int = 0


def adam_step(state: AdamState, params: np.ndarray,
              grad: np.ndarray) -> np.ndarray:
    if state.m is None:
        state.m = np.zeros_like(params)
        state.v = np.zeros_like(params)
    state.t += 1
    state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    state.v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = state.m / (1.0 - state.beta1 ** state.t)
    v_hat = state.v / (1.0 - state.beta2 ** state.t)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


# -- checkpoints ---------------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(path, policy: PolicyParams, norm: RunningNorm,
                    value: MlpParams | None = None,
                    config_hash: str = "", layout_hash: str = "",
                    extra: dict | None = None) -> None:
    blobs = {"version": np.array(CHECKPOINT_VERSION),
             "activation": np.array(policy.net.activation),
             "log_std": policy.log_std,
             "norm_mean": norm.mean, "norm_var": norm.var,
             "norm_count": np.array(norm.count),
             "norm_clip": np.array(norm.clip),
             "norm_frozen": np.array(norm.frozen),
             "config_hash": np.array(config_hash),
             "layout_hash": np.array(layout_hash),
             "n_layers": np.array(len(policy.net.weights)),
             "has_value": np.array(value is not None),
             "extra": np.array(json.dumps(extra or {}))}
    for i, (w, b) in enumerate(zip(policy.net.weights, policy.net.biases)):
        blobs[f"w{i}"] = w
        blobs[f"b{i}"] = b
    if value is not None:
        blobs["v_layers"] = np.array(len(value.weights))
        for i, (w, b) in enumerate(zip(value.weights, value.biases)):
            blobs[f"vw{i}"] = w
            blobs[f"vb{i}"] = b
    np.savez(path, **blobs)


def load_checkpoint(path, expect_layout_hash: str | None = None):
    """Returns dict with policy, value (or None), norm, hashes, extra."""
    with np.load(path, allow_pickle=False) as z:
        if int(z["version"]) != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {int(z['version'])}")
        layout_hash = str(z["layout_hash"])
        if expect_layout_hash is not None and layout_hash != expect_layout_hash:
            raise ValueError(
                "checkpoint observation layout does not match this "
                f"configuration ({layout_hash[:12]} != {expect_layout_hash[:12]})")
        activation = str(z["activation"])
        n = int(z["n_layers"])
        net = MlpParams([z[f"w{i}"].copy() for i in range(n)],
                        [z[f"b{i}"].copy() for i in range(n)], activation)
        policy = PolicyParams(net, z["log_std"].copy())
        value = None
        if bool(z["has_value"]):
            m = int(z["v_layers"])
            value = MlpParams([z[f"vw{i}"].copy() for i in range(m)],
                              [z[f"vb{i}"].copy() for i in range(m)],
                              activation)
        norm = RunningNorm.from_state(
            {"mean": z["norm_mean"], "var": z["norm_var"],
             "count": float(z["norm_count"]), "clip": float(z["norm_clip"]),
             "frozen": bool(z["norm_frozen"])})
        return {"policy": policy, "value": value, "norm": norm,
                "config_hash": str(z["config_hash"]),
                "layout_hash": layout_hash,
                "extra": json.loads(str(z["extra"]))}
