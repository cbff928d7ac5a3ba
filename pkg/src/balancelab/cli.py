"""Command-line entry point wiring the pipeline stages together.

Each experiment lives in its own directory named after the task, seed, and a
content hash of the pipeline-relevant config, so distinct configurations can
never collide and rerunning an identical one reproduces identical bytes.
Inside: ``config/`` (the resolved config and its hash), ``motions/`` (refined
clips), ``checkpoints/``, ``logs/`` (training CSVs), ``reports/`` (metrics,
traces, figures).

Commands fail with a JSON error line on stderr; a missing upstream artifact
names the stage that produces it. Exit codes: 0 success, 2 bad invocation,
3 missing prerequisite, 1 anything else.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .config import (ExperimentConfig, canonical_hash, desk_preset,
                     resolve_skeleton)
from .distill import distill_student
from .envs import BalanceEnv
from .metrics import (VARIANTS, ablation_run, comparison_csv, evaluate,
                      eval_sim_config, save_traces)
from .nets import load_checkpoint, save_checkpoint
from .observation import layout_fingerprint
from .ppo import train_teacher
from .refine import refine_pipeline, synthesize_source_motion
from .report import consolidate
from .skeleton import load_clip, save_clip

OUT_ENV_VAR = "BALANCELAB_OUT"
SUBDIRS = ("config", "motions", "checkpoints", "logs", "reports")


class MissingStage(RuntimeError):
    def __init__(self, stage: str, artifact: Path):
        super().__init__(f"missing artifact {artifact}; "
                         f"run the {stage!r} stage first")
        self.stage = stage
        self.artifact = artifact


def experiment_id(cfg: ExperimentConfig) -> str:
    """Directory-naming hash over everything that shapes trained artifacts.

    Evaluation settings and the output root are excluded: changing the
    episode budget must still find the checkpoints it is scoring.
    """
    doc = cfg.to_dict()
    doc.pop("eval", None)
    doc.pop("out_dir", None)
    return f"{cfg.task}-s{cfg.seed}-{canonical_hash(doc)[:12]}"


def experiment_dir(cfg: ExperimentConfig) -> Path:
    return Path(cfg.out_dir) / experiment_id(cfg)


def prepare_dir(cfg: ExperimentConfig) -> Path:
    exp = experiment_dir(cfg)
    for sub in SUBDIRS:
        (exp / sub).mkdir(parents=True, exist_ok=True)
    cfg.save(exp / "config" / "config.json")
    (exp / "config" / "config.hash").write_text(canonical_hash(cfg) + "\n")
    return exp


def _echo(command: str, cfg: ExperimentConfig, outputs: list[Path],
          exp: Path, **extra) -> None:
    doc = {"command": command, "config_hash": canonical_hash(cfg),
           "experiment": str(exp),
           "outputs": [str(p) for p in outputs], **extra}
    print(json.dumps(doc))


# -- stages ----------------------------------------------------------------

def cmd_refine(cfg: ExperimentConfig, exp: Path) -> list[Path]:
    skel = resolve_skeleton(cfg)
    source = synthesize_source_motion(cfg.task, cfg.artifacts)
    clip, report = refine_pipeline(source, skel, cfg.refine)
    clip_path = exp / "motions" / "refined.json"
    save_clip(clip, clip_path)
    report_path = exp / "reports" / "refine.json"
    report_path.write_text(json.dumps(
        {"config_hash": canonical_hash(cfg), **report.as_dict()},
        indent=2, sort_keys=True) + "\n")
    return [clip_path, report_path]


def _load_refined(cfg: ExperimentConfig, exp: Path):
    clip_path = exp / "motions" / "refined.json"
    if not clip_path.exists():
        raise MissingStage("refine", clip_path)
    return load_clip(clip_path)


def cmd_train(cfg: ExperimentConfig, exp: Path, progress=None) -> list[Path]:
    skel = resolve_skeleton(cfg)
    clip = _load_refined(cfg, exp)

    def make_env(seed: int) -> BalanceEnv:
        return BalanceEnv(skel, clip, sim_cfg=cfg.sim, reward_cfg=cfg.reward,
                          mode="teacher", batch=cfg.ppo.num_envs,
                          reward_scale=cfg.reward_scale, master_seed=seed)

    teacher, log = train_teacher(make_env, cfg.ppo, seed=cfg.seed,
                                 progress=progress)
    ckpt = exp / "checkpoints" / "teacher.npz"
    save_checkpoint(ckpt, teacher["policy"], teacher["norm"],
                    value=teacher["value"],
                    config_hash=canonical_hash(cfg),
                    layout_hash=layout_fingerprint(skel, "teacher"))
    log_path = exp / "logs" / "teacher.csv"
    log.to_csv(log_path)
    return [ckpt, log_path]


def cmd_distill(cfg: ExperimentConfig, exp: Path, progress=None) -> list[Path]:
    skel = resolve_skeleton(cfg)
    clip = _load_refined(cfg, exp)
    teacher_path = exp / "checkpoints" / "teacher.npz"
    if not teacher_path.exists():
        raise MissingStage("train", teacher_path)
    teacher = load_checkpoint(
        teacher_path, expect_layout_hash=layout_fingerprint(skel, "teacher"))

    def make_env(seed: int) -> BalanceEnv:
        return BalanceEnv(skel, clip, sim_cfg=cfg.sim, reward_cfg=cfg.reward,
                          mode="student", batch=cfg.ppo.num_envs,
                          reward_scale=cfg.reward_scale,
                          noise_enabled=cfg.student_noise,
                          ou_theta=cfg.ou_theta, ou_sigma=cfg.ou_sigma,
                          master_seed=seed,
                          global_targets=cfg.global_targets)

    student, log = distill_student(teacher, make_env, cfg.dagger,
                                   seed=cfg.seed, progress=progress)
    ckpt = exp / "checkpoints" / "student.npz"
    save_checkpoint(ckpt, student["policy"], student["norm"],
                    config_hash=canonical_hash(cfg),
                    layout_hash=layout_fingerprint(skel, "student"))
    log_path = exp / "logs" / "distill.csv"
    log.to_csv(log_path)
    return [ckpt, log_path]


def cmd_eval(cfg: ExperimentConfig, exp: Path, progress=None) -> list[Path]:
    skel = resolve_skeleton(cfg)
    clip = _load_refined(cfg, exp)
    student_path = exp / "checkpoints" / "student.npz"
    if not student_path.exists():
        raise MissingStage("distill", student_path)
    student = load_checkpoint(student_path)
    report, traces = evaluate(
        student["policy"], student["norm"], skel, clip,
        episodes=cfg.eval.episodes, master_seed=cfg.seed,
        sim_cfg=eval_sim_config(cfg), reward_cfg=cfg.reward,
        mode="student", batch=cfg.eval.batch,
        ou_theta=cfg.ou_theta, ou_sigma=cfg.ou_sigma,
        layout_hash=student["layout_hash"],
        config_hash=canonical_hash(cfg), progress=progress)
    report_path = exp / "reports" / "eval.report.json"
    report_path.write_text(report.to_json() + "\n")
    traces_path = exp / "reports" / "eval.traces.jsonl"
    save_traces(traces_path, traces)
    return [report_path, traces_path]


def cmd_ablate(cfg: ExperimentConfig, exp: Path, variants: list[str],
               progress=None) -> list[Path]:
    out = exp / "reports" / "ablation"
    seeds = (cfg.seed, cfg.seed + 1, cfg.seed + 2)
    reports = ablation_run(cfg, variants, seeds=seeds, out_dir=out,
                           progress=progress)
    sys.stdout.write(comparison_csv(reports))
    return [out / "comparison.csv", out / "comparison.json"]


def cmd_report(exp: Path) -> list[Path]:
    if not (exp / "config" / "config.json").exists():
        raise MissingStage("refine", exp / "config" / "config.json")
    manifest = consolidate(exp)
    return [exp / rel for rel in manifest["written"]]


# -- argument handling -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    group = common.add_mutually_exclusive_group()
    group.add_argument("--config", type=Path,
                       help="experiment config JSON")
    group.add_argument("--desk-preset", action="store_true",
                       help="start from the tabletop-scale preset")
    common.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    common.add_argument("--out", type=Path, default=None,
                        help=f"output root (default ${OUT_ENV_VAR} or "
                             f"the config's out_dir)")

    parser = argparse.ArgumentParser(
        prog="balancelab",
        description="Balance-task pipeline: refine a reference motion, "
                    "train a teacher, distill a deployable student, "
                    "evaluate, and ablate.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("refine", parents=[common],
                   help="synthesize and refine the reference motion")
    sub.add_parser("train", parents=[common],
                   help="train the teacher policy on the refined motion")
    sub.add_parser("distill", parents=[common],
                   help="distill the teacher into a deployable student")
    p_eval = sub.add_parser("eval", parents=[common],
                            help="score the student under pushes and noise")
    p_eval.add_argument("--episodes", type=int, default=None,
                        help="override the evaluation episode count")
    p_abl = sub.add_parser("ablate", parents=[common],
                           help="train and score named config variants")
    p_abl.add_argument("--variants", type=str, default=None,
                       help="comma-separated variant names (default: all); "
                            f"known: {', '.join(sorted(VARIANTS))}")
    p_abl.add_argument("--episodes", type=int, default=None,
                       help="override episodes per seed")
    p_rep = sub.add_parser("report", parents=[common],
                           help="re-render tables and figures from artifacts")
    p_rep.add_argument("--dir", type=Path, default=None,
                       help="experiment directory (skips config resolution)")
    return parser


def resolve_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.load(args.config)
    elif args.desk_preset:
        cfg = desk_preset()
    else:
        cfg = ExperimentConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out is not None:
        cfg.out_dir = str(args.out)
    elif os.environ.get(OUT_ENV_VAR):
        cfg.out_dir = os.environ[OUT_ENV_VAR]
    if getattr(args, "episodes", None) is not None:
        cfg.eval.episodes = args.episodes
    return cfg


def _fail(code: int, **doc) -> int:
    sys.stderr.write(json.dumps(doc) + "\n")
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    progress = lambda msg: print(msg, file=sys.stderr, flush=True)  # noqa: E731
    try:
        if args.command == "report" and args.dir is not None:
            outputs = cmd_report(args.dir)
            print(json.dumps({"command": "report",
                              "experiment": str(args.dir),
                              "outputs": [str(p) for p in outputs]}))
            return 0
        cfg = resolve_config(args)
        exp = prepare_dir(cfg)
        if args.command == "refine":
            outputs = cmd_refine(cfg, exp)
        elif args.command == "train":
            outputs = cmd_train(cfg, exp, progress)
        elif args.command == "distill":
            outputs = cmd_distill(cfg, exp, progress)
        elif args.command == "eval":
            outputs = cmd_eval(cfg, exp, progress)
        elif args.command == "ablate":
            names = (args.variants.split(",") if args.variants
                     else list(VARIANTS))
            names = [n.strip() for n in names if n.strip()]
            outputs = cmd_ablate(cfg, exp, names, progress)
        else:
            outputs = cmd_report(exp)
        _echo(args.command, cfg, outputs, exp)
        return 0
    except MissingStage as e:
        return _fail(3, error=str(e), missing_stage=e.stage,
                     artifact=str(e.artifact))
    except (ValueError, FileNotFoundError) as e:
        return _fail(2, error=str(e))
    except np.linalg.LinAlgError as e:
        return _fail(1, error=f"numerical failure: {e}")


if __name__ == "__main__":
    sys.exit(main())
