"""Episode judgment, tracking metrics, policy evaluation, and ablations.

Everything downstream of training lives here: episodes are rolled out under
the evaluation perturbation recipe (periodic root-velocity pushes plus
correlated pitch noise), recorded as traces, judged, and reduced to a metrics
report. Metrics are pure functions of traces, so a persisted trace file
reproduces its report bitwise.

Units: slippage mm/s, tracking errors mm per frame power, action rate
rad/frame, where a frame is one control step. Contact mismatch and air are
counted in frames per episode.
"""
from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, canonical_hash, resolve_skeleton
from .distill import distill_student
from .envs import BalanceEnv, ReferenceTrack
from .nets import PolicyParams, RunningNorm, policy_forward
from .observation import layout_fingerprint, localize_points
from .ppo import train_teacher
from .refine import refine_pipeline, synthesize_source_motion
from .rewards import RewardConfig
from .simulator import SimConfig, TermReason
from .skeleton import MotionClip, SkeletonSpec

GRACE_STEPS = 5         # post-transition steps exempt from the mismatch rule
TRACKING_LIMIT = 0.5    # m, mean keypoint error beyond which an episode fails


class FailReason(str, Enum):
    FALL = "Fall"
    CONTACT_MISMATCH = "ContactMismatch"
    TRACKING = "Tracking"


@dataclass(frozen=True)
class Judgment:
    success: bool
    reason: FailReason | None = None


# -- traces --------------------------------------------------------------------

_TRACE_ARRAYS = ("keypoint_pos", "ref_keypoint_pos", "root_x", "root_pitch",
                 "ref_root_x", "ref_root_pitch", "foot_pos", "robot_contact",
                 "ref_contact", "actions")


@dataclass(eq=False)
class EpisodeTrace:
    """One episode, recorded once per control step after the step resolves.

    World-frame keypoints for both sides, the root coordinates needed to
    re-localize them, foot centers and contact labels, and the raw actions.
    ``terminated_early`` marks episodes the environment cut short; everything
    else ran to the clip's end.
    """
    fps: float
    keypoint_pos: np.ndarray        # (T, K, 2) robot, world
    ref_keypoint_pos: np.ndarray    # (T, K, 2)
    root_x: np.ndarray              # (T,)
    root_pitch: np.ndarray          # (T,)
    ref_root_x: np.ndarray          # (T,)
    ref_root_pitch: np.ndarray      # (T,)
    foot_pos: np.ndarray            # (T, 2, 2) robot foot centers
    robot_contact: np.ndarray       # (T, 2) bool
    ref_contact: np.ndarray         # (T, 2) bool
    actions: np.ndarray             # (T, J)
    terminated_early: bool = False
    term_reason: str = ""
    events: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for name in _TRACE_ARRAYS:
            arr = np.asarray(getattr(self, name))
            if name.endswith("contact"):
                arr = arr.astype(bool)
            else:
                arr = arr.astype(float)
            setattr(self, name, arr)
        lengths = {len(getattr(self, name)) for name in _TRACE_ARRAYS}
        if len(lengths) != 1:
            raise ValueError(f"trace arrays disagree on length: {lengths}")
        if len(self.keypoint_pos) == 0:
            raise ValueError("empty trace")

    def __len__(self) -> int:
        return len(self.keypoint_pos)

    def to_dict(self) -> dict:
        doc = {name: getattr(self, name).tolist() for name in _TRACE_ARRAYS}
        doc["fps"] = self.fps
        doc["terminated_early"] = self.terminated_early
        doc["term_reason"] = self.term_reason
        doc["events"] = self.events
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "EpisodeTrace":
        return cls(**doc)


def save_traces(path: Path | str, traces: list[EpisodeTrace]) -> None:
    """One JSON document per line, one line per episode."""
    lines = [json.dumps(t.to_dict(), separators=(",", ":")) for t in traces]
    Path(path).write_text("\n".join(lines) + "\n")


def load_traces(path: Path | str) -> list[EpisodeTrace]:
    out = []
    for line in Path(path).read_text().splitlines():
        if line.strip():
            out.append(EpisodeTrace.from_dict(json.loads(line)))
    return out


# -- judgment ------------------------------------------------------------------

def _grace_mask(ref_contact: np.ndarray, grace_steps: int) -> np.ndarray:
    """True on steps inside the settling window after a support change.

    Episode start counts as a transition: the robot needs a few steps to
    build up contact forces even when it spawns exactly on the reference.
    """
    T = len(ref_contact)
    changed = np.ones(T, dtype=bool)
    changed[1:] = (ref_contact[1:] != ref_contact[:-1]).any(axis=1)
    mask = np.zeros(T, dtype=bool)
    for t in np.flatnonzero(changed):
        mask[t:t + grace_steps] = True
    return mask


def judge_episode(trace: EpisodeTrace, grace_steps: int = GRACE_STEPS,
                  tracking_limit: float = TRACKING_LIMIT) -> Judgment:
    """Success means: no early termination, no contact mismatch outside the
    grace windows, and mean keypoint error within the tracking limit."""
    if trace.terminated_early:
        reason = (FailReason.TRACKING
                  if trace.term_reason == TermReason.TRACKING_DIVERGED.name
                  else FailReason.FALL)
        return Judgment(False, reason)
    mismatch = (trace.robot_contact != trace.ref_contact).any(axis=1)
    if (mismatch & ~_grace_mask(trace.ref_contact, grace_steps)).any():
        return Judgment(False, FailReason.CONTACT_MISMATCH)
    err = np.linalg.norm(trace.keypoint_pos - trace.ref_keypoint_pos, axis=-1)
    if err.mean() > tracking_limit:
        return Judgment(False, FailReason.TRACKING)
    return Judgment(True)


# -- metrics -------------------------------------------------------------------

@dataclass
class MetricsReport:
    success_rate: float             # percent of episodes judged successful
    cont: float                     # mismatch frames per episode
    slip: float                     # support-foot speed while grounded, mm/s
    air: float                      # frames per episode with no foot down
    act: float                      # action change per step, rad/frame
    e_pos: float                    # keypoint position error, mm
    e_vel: float                    # keypoint velocity error, mm/frame
    e_acc: float                    # keypoint acceleration error, mm/frame^2
    e_pos_local: float              # same three, measured in the root frame
    e_vel_local: float
    e_acc_local: float
    episodes: int
    config_hash: str = ""
    config_echo: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0.0 <= self.success_rate <= 100.0:
            raise ValueError("success_rate must lie in [0, 100]")
        for name in ("cont", "slip", "air", "act", "e_pos", "e_vel", "e_acc",
                     "e_pos_local", "e_vel_local", "e_acc_local"):
            if getattr(self, name) < 0.0:
                raise ValueError(f"{name} must be non-negative")
        if self.episodes < 1:
            raise ValueError("episodes must be positive")

    def to_dict(self) -> dict:
        return {
            "success_rate": self.success_rate, "cont": self.cont,
            "slip": self.slip, "air": self.air, "act": self.act,
            "e_pos": self.e_pos, "e_vel": self.e_vel, "e_acc": self.e_acc,
            "e_pos_local": self.e_pos_local, "e_vel_local": self.e_vel_local,
            "e_acc_local": self.e_acc_local, "episodes": self.episodes,
            "config_hash": self.config_hash, "config_echo": self.config_echo,
            "failures": self.failures,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MetricsReport":
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _frame_velocity(p: np.ndarray) -> np.ndarray:
    """First difference per frame: central inside, one-sided at the ends."""
    v = np.zeros_like(p)
    if len(p) >= 2:
        v[0] = p[1] - p[0]
        v[-1] = p[-1] - p[-2]
        if len(p) > 2:
            v[1:-1] = 0.5 * (p[2:] - p[:-2])
    return v


def _frame_accel(p: np.ndarray) -> np.ndarray:
    """Second difference per frame; the end frames copy their neighbors."""
    a = np.zeros_like(p)
    if len(p) >= 3:
        a[1:-1] = p[2:] - 2.0 * p[1:-1] + p[:-2]
        a[0] = a[1]
        a[-1] = a[-2]
    return a


def _mean_err(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.linalg.norm(a - b, axis=-1).mean())


def compute_metrics(traces: list[EpisodeTrace], config_hash: str = "",
                    config_echo: dict | None = None,
                    grace_steps: int = GRACE_STEPS,
                    tracking_limit: float = TRACKING_LIMIT) -> MetricsReport:
    """Per-episode values averaged across episodes.

    Slippage averages foot displacement only over (step, foot) pairs that
    stay grounded through the step; an episode with no such pair contributes
    zero. Local errors re-express both trajectories in their own root frames
    before differencing, which cancels rigid horizontal translation.
    """
    if not traces:
        raise ValueError("compute_metrics needs at least one trace")
    cols: dict[str, list[float]] = {k: [] for k in (
        "cont", "slip", "air", "act", "e_pos", "e_vel", "e_acc",
        "e_pos_local", "e_vel_local", "e_acc_local")}
    failures = {reason.value: 0 for reason in FailReason}
    successes = 0
    for tr in traces:
        verdict = judge_episode(tr, grace_steps, tracking_limit)
        if verdict.success:
            successes += 1
        else:
            failures[verdict.reason.value] += 1
        mismatch = (tr.robot_contact != tr.ref_contact).any(axis=1)
        cols["cont"].append(float(mismatch.sum()))
        cols["air"].append(float((~tr.robot_contact.any(axis=1)).sum()))
        grounded = tr.robot_contact[1:] & tr.robot_contact[:-1]
        if grounded.any():
            travel = np.linalg.norm(np.diff(tr.foot_pos, axis=0), axis=-1)
            cols["slip"].append(float(travel[grounded].mean())
                                * tr.fps * 1000.0)
        else:
            cols["slip"].append(0.0)
        if len(tr) >= 2:
            rate = np.linalg.norm(np.diff(tr.actions, axis=0), axis=-1)
            cols["act"].append(float(rate.mean()))
        else:
            cols["act"].append(0.0)
        kp, ref_kp = tr.keypoint_pos, tr.ref_keypoint_pos
        cols["e_pos"].append(1000.0 * _mean_err(kp, ref_kp))
        cols["e_vel"].append(1000.0 * _mean_err(_frame_velocity(kp),
                                                _frame_velocity(ref_kp)))
        cols["e_acc"].append(1000.0 * _mean_err(_frame_accel(kp),
                                                _frame_accel(ref_kp)))
        lk = localize_points(kp, tr.root_x, tr.root_pitch)
        lr = localize_points(ref_kp, tr.ref_root_x, tr.ref_root_pitch)
        cols["e_pos_local"].append(1000.0 * _mean_err(lk, lr))
        cols["e_vel_local"].append(1000.0 * _mean_err(_frame_velocity(lk),
                                                      _frame_velocity(lr)))
        cols["e_acc_local"].append(1000.0 * _mean_err(_frame_accel(lk),
                                                      _frame_accel(lr)))
    means = {k: float(np.mean(v)) for k, v in cols.items()}
    return MetricsReport(
        success_rate=100.0 * successes / len(traces),
        episodes=len(traces), config_hash=config_hash,
        config_echo=dict(config_echo or {}), failures=failures, **means)


def reference_replay_trace(skel: SkeletonSpec, clip: MotionClip,
                           gap: float | None = None) -> EpisodeTrace:
    """Trace of a controller that reproduces the reference exactly.

    The robot's states are the reference's own, contact labels included, so
    every tracking error is identically zero. This is the oracle against
    which the metric definitions are sanity-checked.
    """
    track = ReferenceTrack(skel, clip)
    heights = track.foot_pos[:, :, 1]
    if gap is None:
        gap = RewardConfig().single_support_height_gap
    both = np.abs(heights[:, 0] - heights[:, 1]) < gap
    contact = np.zeros((len(track), 2), dtype=bool)
    contact[np.arange(len(track)), np.argmin(heights, axis=1)] = True
    contact |= both[:, None]
    return EpisodeTrace(
        fps=float(clip.fps),
        keypoint_pos=track.keypoint_pos.copy(),
        ref_keypoint_pos=track.keypoint_pos.copy(),
        root_x=track.q[:, 0].copy(), root_pitch=track.q[:, 2].copy(),
        ref_root_x=track.q[:, 0].copy(), ref_root_pitch=track.q[:, 2].copy(),
        foot_pos=track.foot_pos.copy(),
        robot_contact=contact, ref_contact=contact.copy(),
        actions=np.zeros((len(track), skel.num_joints)),
        events={"controller": "replay"})


# -- evaluation ----------------------------------------------------------------

def episode_streams(master_seed: int, episode: int):
    """Documented splitting rule: episode k of master seed m draws its
    dynamics and sensor-noise generators from SeedSequence([m, k])."""
    sim_seq, ou_seq = np.random.SeedSequence(
        [master_seed, episode]).spawn(2)
    return np.random.default_rng(sim_seq), np.random.default_rng(ou_seq)


def evaluate(policy: PolicyParams, norm: RunningNorm, skel: SkeletonSpec,
             clip: MotionClip, *, episodes: int = 100, master_seed: int = 0,
             sim_cfg: SimConfig | None = None,
             reward_cfg: RewardConfig | None = None, mode: str = "student",
             batch: int = 25, noise_enabled: bool = True,
             ou_theta: float = 25.0, ou_sigma: float = 250.0,
             layout_hash: str | None = None, config_hash: str = "",
             config_echo: dict | None = None,
             progress=None) -> tuple[MetricsReport, list[EpisodeTrace]]:
    """Roll out ``episodes`` episodes under the perturbation recipe.

    Actions are the policy mean (no exploration noise). Dynamics
    randomization is redrawn per episode from that episode's own stream, so
    the whole evaluation is a deterministic function of the master seed.
    Deployment never anchors targets at the robot root, whatever the
    training-time setting was.
    """
    if episodes < 1:
        raise ValueError("episodes must be positive")
    expected = layout_fingerprint(skel, mode)
    if layout_hash is not None and layout_hash != expected:
        raise ValueError(
            f"policy was trained against observation layout {layout_hash} "
            f"but this skeleton/mode produces {expected}")
    sim_cfg = sim_cfg or SimConfig(push_interval=1.0, push_max_speed=0.1)
    batch = min(batch, episodes)
    env = BalanceEnv(skel, clip, sim_cfg=sim_cfg, reward_cfg=reward_cfg,
                     mode=mode, batch=batch, reward_scale=1.0,
                     noise_enabled=noise_enabled, ou_theta=ou_theta,
                     ou_sigma=ou_sigma, master_seed=master_seed)
    if policy.net.in_dim != env.obs_dim:
        raise ValueError(f"policy expects {policy.net.in_dim}-dim "
                         f"observations, environment builds {env.obs_dim}")
    traces: list[EpisodeTrace] = [None] * episodes  # type: ignore[list-item]
    fps = float(clip.fps)
    for start in range(0, episodes, batch):
        ids = np.arange(min(batch, episodes - start))
        streams = [episode_streams(master_seed, start + int(i)) for i in ids]
        obs = env.reset_envs(ids, rngs=[s[0] for s in streams],
                             ou_rngs=[s[1] for s in streams])
        active = np.ones(ids.size, dtype=bool)
        rows: list[list[dict]] = [[] for _ in ids]
        pushes: list[list[list[float]]] = [[] for _ in ids]
        while active.any():
            mean, _ = policy_forward(policy, norm(obs))
            step = env.step(mean)
            for i in np.flatnonzero(active):
                rows[i].append({
                    "keypoint_pos": step.body.keypoint_pos[i].copy(),
                    "ref_keypoint_pos": step.ref.keypoint_pos[i].copy(),
                    "root_x": float(step.body.root_pos[i, 0]),
                    "root_pitch": float(step.body.root_pitch[i]),
                    "ref_root_x": float(step.ref.root_pos[i, 0]),
                    "ref_root_pitch": float(step.ref.root_pitch[i]),
                    "foot_pos": step.body.foot_pos[i].copy(),
                    "robot_contact": step.labels.robot[i].copy(),
                    "ref_contact": step.labels.reference[i].copy(),
                    "actions": mean[i].copy(),
                })
                if np.any(step.push_delta[i] != 0.0):
                    pushes[i].append([len(rows[i]) - 1,
                                      float(step.push_delta[i, 0]),
                                      float(step.push_delta[i, 1])])
                if step.terminated[i] or step.truncated[i]:
                    active[i] = False
                    k = start + int(i)
                    terminated = bool(step.terminated[i])
                    traces[k] = EpisodeTrace(
                        fps=fps,
                        **{name: np.array([r[name] for r in rows[i]])
                           for name in _TRACE_ARRAYS},
                        terminated_early=terminated,
                        term_reason=(TermReason(step.term_reason[i]).name
                                     if terminated else ""),
                        events={"episode": k, "master_seed": master_seed,
                                "pushes": pushes[i]})
            obs = step.obs
        if progress is not None:
            progress(f"evaluated {min(start + batch, episodes)}/{episodes} "
                     f"episodes")
    echo = {"episodes": episodes, "master_seed": master_seed, "mode": mode,
            "push_interval": sim_cfg.push_interval,
            "push_max_speed": sim_cfg.push_max_speed,
            "noise_enabled": noise_enabled, "ou_theta": ou_theta,
            "ou_sigma": ou_sigma}
    echo.update(config_echo or {})
    return compute_metrics(traces, config_hash=config_hash,
                           config_echo=echo), traces


# -- pipeline and ablations ----------------------------------------------------

def run_pipeline(cfg: ExperimentConfig, seed: int | None = None,
                 progress=None) -> dict:
    """Source motion -> refined clip -> teacher -> student, one seed."""
    seed = cfg.seed if seed is None else seed
    skel = resolve_skeleton(cfg)
    source = synthesize_source_motion(cfg.task, cfg.artifacts)
    clip, refine_report = refine_pipeline(source, skel, cfg.refine)

    def make_teacher_env(s: int) -> BalanceEnv:
        return BalanceEnv(skel, clip, sim_cfg=cfg.sim, reward_cfg=cfg.reward,
                          mode="teacher", batch=cfg.ppo.num_envs,
                          reward_scale=cfg.reward_scale, master_seed=s)

    def make_student_env(s: int) -> BalanceEnv:
        return BalanceEnv(skel, clip, sim_cfg=cfg.sim, reward_cfg=cfg.reward,
                          mode="student", batch=cfg.ppo.num_envs,
                          reward_scale=cfg.reward_scale,
                          noise_enabled=cfg.student_noise,
                          ou_theta=cfg.ou_theta, ou_sigma=cfg.ou_sigma,
                          master_seed=s, global_targets=cfg.global_targets)

    teacher, teacher_log = train_teacher(make_teacher_env, cfg.ppo,
                                         seed=seed, progress=progress)
    student, student_log = distill_student(teacher, make_student_env,
                                           cfg.dagger, seed=seed,
                                           progress=progress)
    return {"skeleton": skel, "clip": clip, "refine_report": refine_report,
            "teacher": teacher, "teacher_log": teacher_log,
            "student": student, "student_log": student_log, "seed": seed}


def eval_sim_config(cfg: ExperimentConfig) -> SimConfig:
    """Training dynamics with the evaluation push schedule swapped in."""
    return replace(cfg.sim, push_interval=cfg.eval.push_interval,
                   push_max_speed=cfg.eval.push_max_speed)


def evaluate_config(cfg: ExperimentConfig, student: dict,
                    skel: SkeletonSpec, clip: MotionClip,
                    master_seed: int, config_hash: str = "",
                    config_echo: dict | None = None,
                    progress=None) -> tuple[MetricsReport, list[EpisodeTrace]]:
    """Score a student bundle under ``cfg``'s evaluation recipe."""
    return evaluate(
        student["policy"], student["norm"], skel, clip,
        episodes=cfg.eval.episodes, master_seed=master_seed,
        sim_cfg=eval_sim_config(cfg), reward_cfg=cfg.reward, mode="student",
        batch=cfg.eval.batch, noise_enabled=True, ou_theta=cfg.ou_theta,
        ou_sigma=cfg.ou_sigma, config_hash=config_hash,
        config_echo=config_echo, progress=progress)


def _set_track_sigma(value: float):
    def apply(cfg: ExperimentConfig) -> None:
        cfg.reward.track_pos_sigma = value
    return apply


def _zero(attr: str):
    def apply(cfg: ExperimentConfig) -> None:
        setattr(cfg.reward, attr, 0.0)
    return apply


def _global_tracking(cfg: ExperimentConfig) -> None:
    cfg.global_targets = True


def _no_imu_noise(cfg: ExperimentConfig) -> None:
    cfg.student_noise = False


def _no_push(cfg: ExperimentConfig) -> None:
    cfg.sim.push_max_speed = 0.0


def _rare_hard_push(cfg: ExperimentConfig) -> None:
    cfg.sim.push_interval = 5.0
    cfg.sim.push_max_speed = 1.0


VARIANTS = {
    "full": lambda cfg: None,
    "track-sigma-0.15": _set_track_sigma(0.15),
    "track-sigma-0.3": _set_track_sigma(0.3),
    "track-sigma-0.6": _set_track_sigma(0.6),
    "track-sigma-1.2": _set_track_sigma(1.2),
    "w/o-com": _zero("com_weight"),
    "w/o-contact-penalty": _zero("contact_mismatch_weight"),
    "w/o-close-feet": _zero("close_feet_weight"),
    "global-tracking": _global_tracking,
    "w/o-imu-noise": _no_imu_noise,
    "w/o-push": _no_push,
    "push-5s-1m/s": _rare_hard_push,
}

_TABLE_COLUMNS = (("Succ", "success_rate"), ("Cont", "cont"),
                  ("Slip", "slip"), ("Air", "air"), ("Act", "act"),
                  ("E_pos", "e_pos"), ("E_vel", "e_vel"), ("E_acc", "e_acc"))


def apply_variant(base: ExperimentConfig, name: str) -> ExperimentConfig:
    """Deep-copied config with one named override applied; the base never
    mutates. Each variant changes exactly the quantity its name states."""
    try:
        mutate = VARIANTS[name]
    except KeyError:
        raise ValueError(f"unknown variant {name!r}; known: "
                         f"{', '.join(sorted(VARIANTS))}") from None
    cfg = copy.deepcopy(base)
    mutate(cfg)
    return cfg


def variant_slug(name: str) -> str:
    """Filesystem-safe variant name."""
    return name.replace("/", "-").replace(" ", "-")


def comparison_csv(reports: dict[str, MetricsReport]) -> str:
    """One row per variant, full float precision so reruns hash identically."""
    lines = ["variant," + ",".join(h for h, _ in _TABLE_COLUMNS)]
    for name, report in reports.items():
        cells = [repr(float(getattr(report, attr)))
                 for _, attr in _TABLE_COLUMNS]
        lines.append(",".join([name] + cells))
    return "\n".join(lines) + "\n"


def ablation_run(base: ExperimentConfig, variants: list[str], *,
                 seeds: tuple[int, ...] = (0, 1, 2),
                 out_dir: Path | str | None = None,
                 progress=None) -> dict[str, MetricsReport]:
    """Train and score every variant; one report per variant.

    Each variant trains one teacher+student per seed and pools the episodes
    from all seeds into a single report. Evaluation seeds are shared across
    variants, so each variant faces the identical push and noise sequences
    and differences come only from the policies.
    """
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ValueError(f"unknown variants {unknown}; known: "
                         f"{', '.join(sorted(VARIANTS))}")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    reports: dict[str, MetricsReport] = {}
    for name in variants:
        cfg = apply_variant(base, name)
        cfg_hash = canonical_hash(cfg)
        traces: list[EpisodeTrace] = []
        for seed in seeds:
            if progress is not None:
                progress(f"variant {name}: seed {seed}")
            bundle = run_pipeline(cfg, seed=seed, progress=progress)
            _, seed_traces = evaluate_config(
                cfg, bundle["student"], bundle["skeleton"], bundle["clip"],
                master_seed=seed, config_hash=cfg_hash,
                progress=progress)
            for t in seed_traces:
                t.events["train_seed"] = seed
            traces.extend(seed_traces)
        reports[name] = compute_metrics(
            traces, config_hash=cfg_hash,
            config_echo={"variant": name, "seeds": list(seeds),
                         "episodes_per_seed": cfg.eval.episodes,
                         "push_interval": cfg.eval.push_interval,
                         "push_max_speed": cfg.eval.push_max_speed})
        if out is not None:
            slug = variant_slug(name)
            save_traces(out / f"{slug}.traces.jsonl", traces)
            (out / f"{slug}.report.json").write_text(
                reports[name].to_json() + "\n")
    if out is not None:
        (out / "comparison.csv").write_text(comparison_csv(reports))
        (out / "comparison.json").write_text(json.dumps(
            {"variants": list(reports),
             "reports": {k: r.to_dict() for k, r in reports.items()}},
            indent=2, sort_keys=True) + "\n")
    return reports
