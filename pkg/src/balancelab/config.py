"""Experiment configuration: one document that pins every stage.

An ExperimentConfig aggregates the per-module configs plus the handful of
pipeline-level switches (task, skeleton, seed, output directory). It
round-trips through JSON, and its canonical hash names the experiment: two
runs with the same hash and seed are byte-identical by contract.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .distill import DaggerConfig
from .ppo import PpoConfig
from .refine import ArtifactConfig, InitMode, RefineConfig, Task
from .rewards import RewardConfig
from .simulator import SimConfig
from .skeleton import SkeletonSpec, desk_biped, load_skeleton


@dataclass
class EvalConfig:
    """Perturbation recipe and episode budget for scoring a policy.

    Pushes here override the training schedule: evaluation uses gentler,
    regular shoves regardless of how hard training pushed.
    """
    episodes: int = 100
    push_interval: float = 1.0
    push_max_speed: float = 0.1
    batch: int = 25                 # episodes simulated in parallel

    def __post_init__(self) -> None:
        if self.episodes < 1 or self.batch < 1:
            raise ValueError("episodes and batch must be positive")
        if self.push_interval <= 0 or self.push_max_speed < 0:
            raise ValueError("push_interval must be positive and "
                             "push_max_speed non-negative")


@dataclass
class ExperimentConfig:
    task: str = Task.SINGLE_LEG_STAND.value
    skeleton: str = "desk_biped"    # builtin name or path to a JSON spec
    seed: int = 0
    out_dir: str = "runs"
    reward_scale: float = 0.02      # scales totals into a PPO-friendly range
    student_noise: bool = True      # feed OU pitch noise during distillation
    global_targets: bool = False    # anchor student targets at the robot root
    ou_theta: float = 25.0
    ou_sigma: float = 250.0
    artifacts: ArtifactConfig = field(default_factory=ArtifactConfig)
    refine: RefineConfig = field(default_factory=RefineConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    reward: RewardConfig = field(default_factory=RewardConfig)
    ppo: PpoConfig = field(default_factory=PpoConfig)
    dagger: DaggerConfig = field(default_factory=DaggerConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def __post_init__(self) -> None:
        Task(self.task)
        if self.reward_scale <= 0:
            raise ValueError("reward_scale must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        for name, sub in (("artifacts", ArtifactConfig),
                          ("refine", RefineConfig), ("sim", SimConfig),
                          ("reward", RewardConfig), ("ppo", PpoConfig),
                          ("dagger", DaggerConfig), ("eval", EvalConfig)):
            if name in data and isinstance(data[name], dict):
                data[name] = _build(sub, data[name])
        return _build(cls, data)

    def save(self, path: Path | str) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2,
                                         default=_plain) + "\n")

    @classmethod
    def load(cls, path: Path | str) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_dict(json.loads(path.read_text()))
        if cfg.skeleton not in BUILTIN_SKELETONS:
            skel_path = Path(cfg.skeleton)
            if not skel_path.is_absolute():
                skel_path = path.parent / skel_path
            if not skel_path.exists():
                raise FileNotFoundError(
                    f"config references skeleton {cfg.skeleton!r} which "
                    f"does not exist at {skel_path}")
            cfg.skeleton = str(skel_path)
        return cfg


def _plain(obj):
    if isinstance(obj, (Task, InitMode)):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _build(cls, data: dict):
    """Rebuild a flat config dataclass from JSON, restoring tuple fields."""
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(data) - set(names)
    if unknown:
        raise ValueError(f"{cls.__name__}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for key, value in data.items():
        f = names[key]
        if isinstance(value, list) and isinstance(f.default, tuple):
            value = tuple(value)
        if f.name == "init_mode":
            value = InitMode(value)
        kwargs[key] = value
    return cls(**kwargs)


BUILTIN_SKELETONS = {"desk_biped": desk_biped}


def resolve_skeleton(cfg: ExperimentConfig) -> SkeletonSpec:
    builder = BUILTIN_SKELETONS.get(cfg.skeleton)
    if builder is not None:
        return builder()
    return load_skeleton(cfg.skeleton)


def canonical_hash(cfg: ExperimentConfig | dict) -> str:
    """Content hash over canonicalized JSON; key order never matters."""
    doc = cfg.to_dict() if isinstance(cfg, ExperimentConfig) else cfg
    blob = json.dumps(doc, sort_keys=True, separators=(",", ":"),
                      default=_plain)
    return hashlib.sha256(blob.encode()).hexdigest()


def desk_preset(**overrides) -> ExperimentConfig:
    """Configuration sized for the small tabletop biped on CPU.

    Networks shrink to match the low-dimensional plant, and the close-feet
    penalty is disabled: with both feet on one sagittal line the nominal
    stance already violates the spacing threshold, so the term would punish
    every frame of correct standing.
    """
    cfg = ExperimentConfig(**overrides)
    cfg.reward.close_feet_weight = 0.0
    cfg.ppo.hidden = (128, 64)
    cfg.ppo.num_envs = 128
    cfg.ppo.horizon = 24
    cfg.ppo.total_steps = 589_824
    # gentler exploration than the full-scale default: at this plant's size,
    # unit-std actions topple the robot within half a second and every
    # rollout ends in the same fall, leaving no gradient toward standing
    cfg.ppo.init_noise_std = 0.3
    cfg.dagger.hidden = (128, 64)
    cfg.dagger.iterations = 40
    return cfg
