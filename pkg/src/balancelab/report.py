"""Rendering of experiment outputs: figures plus their CSV twins.

Every plot is written from data that also exists as a delimited file in the
same directory, so the figures are a convenience view, never the only copy.
Rendering is deterministic: fixed figure sizes, no timestamps in metadata,
identical inputs give identical bytes.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

_SAVE = {"dpi": 120, "metadata": {"Software": "balancelab"}}


def read_csv_rows(path: Path | str) -> list[dict]:
    """Rows with numeric strings parsed back to floats; '' stays ''."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            parsed = {}
            for key, val in row.items():
                try:
                    parsed[key] = float(val)
                except (TypeError, ValueError):
                    parsed[key] = val
            rows.append(parsed)
    return rows


def _column(rows: list[dict], key: str) -> list[float]:
    return [r[key] for r in rows if isinstance(r.get(key), float)]


def _finite(values: list[float]) -> list[float]:
    return [v for v in values if v == v]


def training_figure(rows: list[dict], path: Path | str,
                    title: str = "teacher training") -> None:
    """Return, episode length, losses, and action std over iterations."""
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    it = _column(rows, "iteration")
    panels = [
        ("mean_return", "return per episode"),
        ("mean_episode_length", "episode length (steps)"),
        ("value_loss", "value loss"),
        ("action_std", "action std"),
    ]
    for ax, (key, label) in zip(axes.flat, panels):
        ys = _column(rows, key)
        pairs = [(x, y) for x, y in zip(it, ys) if y == y]
        if pairs:
            ax.plot([p[0] for p in pairs], [p[1] for p in pairs], lw=1.2)
        ax.set_xlabel("iteration")
        ax.set_title(label, fontsize=10)
        ax.grid(alpha=0.3)
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def reward_terms_figure(rows: list[dict], path: Path | str,
                        title: str = "reward terms") -> None:
    """Per-step mean of every logged reward component over training."""
    keys = sorted({k for r in rows for k in r if k.startswith("rew_")})
    fig, ax = plt.subplots(figsize=(9, 5))
    it = _column(rows, "iteration")
    for key in keys:
        ys = _column(rows, key)
        if _finite(ys):
            ax.plot(it[:len(ys)], ys, lw=1.0, label=key[len("rew_"):])
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean per-step contribution")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    if keys:
        ax.legend(fontsize=7, ncol=2)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def distill_figure(rows: list[dict], path: Path | str,
                   title: str = "distillation") -> None:
    """Regression loss and holdout gap on a log scale."""
    fig, ax = plt.subplots(figsize=(7, 4.5))
    it = _column(rows, "iteration")
    for key, label in (("loss", "training loss"),
                       ("holdout_gap", "holdout gap"),
                       ("holdout_gap_before", "holdout gap at start")):
        ys = _column(rows, key)
        if _finite(ys):
            ax.plot(it[:len(ys)], ys, lw=1.2, label=label)
    ax.set_yscale("log")
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean squared action gap")
    ax.set_title(title)
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


_METRIC_PANELS = (("Succ", "success_rate"), ("Cont", "cont"),
                  ("Slip", "slip"), ("Air", "air"), ("Act", "act"),
                  ("E_pos", "e_pos"), ("E_vel", "e_vel"), ("E_acc", "e_acc"))


def metrics_figure(reports: dict[str, dict], path: Path | str,
                   title: str = "evaluation metrics") -> None:
    """One bar panel per metric column, one bar per variant."""
    names = list(reports)
    fig, axes = plt.subplots(2, 4, figsize=(13, 6))
    x = range(len(names))
    for ax, (label, key) in zip(axes.flat, _METRIC_PANELS):
        ax.bar(x, [float(reports[n][key]) for n in names],
               color="tab:blue")
        ax.set_xticks(list(x))
        ax.set_xticklabels(names, rotation=45, ha="right", fontsize=7)
        ax.set_title(label, fontsize=10)
        ax.grid(alpha=0.3, axis="y")
    fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, **_SAVE)
    plt.close(fig)


def consolidate(exp_dir: Path | str) -> dict:
    """Re-derive every table and figure found under an experiment directory.

    Reads only persisted artifacts (training CSVs under ``logs/``, metric
    reports under ``reports/``), so running it on a copied directory
    reproduces the same outputs. Returns a manifest of what was written.
    """
    exp_dir = Path(exp_dir)
    logs = exp_dir / "logs"
    reports_dir = exp_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    written: list[str] = []

    def record(path: Path) -> Path:
        written.append(str(path.relative_to(exp_dir)))
        return path

    for log_csv in sorted(logs.glob("*.csv")) if logs.is_dir() else []:
        rows = read_csv_rows(log_csv)
        stem = log_csv.stem
        if any("holdout_gap" in r for r in rows):
            distill_figure(rows, record(reports_dir / f"{stem}.png"),
                           title=stem)
        else:
            training_figure(rows, record(reports_dir / f"{stem}.png"),
                            title=stem)
            if any(k.startswith("rew_") for r in rows for k in r):
                reward_terms_figure(
                    rows, record(reports_dir / f"{stem}.terms.png"),
                    title=f"{stem} reward terms")

    metric_reports: dict[str, dict] = {}
    for report_json in sorted(reports_dir.glob("*.report.json")):
        name = report_json.name[:-len(".report.json")]
        metric_reports[name] = json.loads(report_json.read_text())
    comparison = exp_dir / "reports" / "comparison.json"
    if comparison.exists():
        doc = json.loads(comparison.read_text())
        for name in doc.get("variants", []):
            metric_reports.setdefault(name, doc["reports"][name])
    if metric_reports:
        metrics_figure(metric_reports,
                       record(reports_dir / "metrics.png"))
        header = ["name"] + [key for _, key in _METRIC_PANELS] + ["episodes"]
        lines = [",".join(header)]
        for name, doc in metric_reports.items():
            cells = [name] + [repr(float(doc[key]))
                              for _, key in _METRIC_PANELS]
            cells.append(str(int(doc["episodes"])))
            lines.append(",".join(cells))
        record(reports_dir / "metrics.csv").write_text(
            "\n".join(lines) + "\n")

    manifest = {"experiment": str(exp_dir), "written": sorted(written)}
    record(reports_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
