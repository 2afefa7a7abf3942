"""Render metrics files into figures and a delimited summary table.

Accepts the metrics.json shapes the other stages emit: a single run
object, a list of runs (ablation tables), or ``{"runs": [...], "mean":
{...}}`` (multi-seed reports). Figures are written as PNG next to a
``summary.csv`` so results can be eyeballed and post-processed without
re-running anything.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import VectnError

LABEL_NAMES = ("negative", "neutral", "positive")


def _normalize_runs(payload) -> list[dict]:
    if isinstance(payload, dict) and "runs" in payload:
        return [r for r in payload["runs"] if "error" not in r]
    if isinstance(payload, dict):
        return [payload]
    if isinstance(payload, list):
        return list(payload)
    raise VectnError(f"unrecognized metrics payload of type {type(payload).__name__}")


def load_metrics_file(path: str | Path) -> list[dict]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise VectnError(f"cannot read metrics file {path}: {exc}") from exc
    runs = _normalize_runs(payload)
    for run in runs:
        run.setdefault("source", Path(path).name)
    return runs


def write_summary_csv(runs: list[dict], path: Path) -> None:
    fields = [
        "source", "variant", "seed", "accuracy", "macro_f1",
        "f1_negative", "f1_neutral", "f1_positive",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        for run in runs:
            per_class = run.get("per_class_f1", [float("nan")] * 3)
            writer.writerow(
                {
                    "source": run.get("source", ""),
                    "variant": run.get("variant", ""),
                    "seed": run.get("seed", ""),
                    "accuracy": run.get("accuracy", ""),
                    "macro_f1": run.get("macro_f1", ""),
                    "f1_negative": per_class[0],
                    "f1_neutral": per_class[1],
                    "f1_positive": per_class[2],
                }
            )


def plot_training_curves(runs: list[dict], path: Path) -> bool:
    """Per-epoch loss and validation macro-F1; skipped (returns False)
    when no run carries epoch records."""
    with_epochs = [r for r in runs if r.get("epochs")]
    if not with_epochs:
        return False
    fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(10, 4))
    for run in with_epochs:
        label = _run_label(run)
        epochs = [rec["epoch"] for rec in run["epochs"]]
        ax_loss.plot(epochs, [rec["train_loss"] for rec in run["epochs"]], label=label)
        ax_f1.plot(epochs, [rec["valid_macro_f1"] for rec in run["epochs"]], label=label)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("train loss")
    ax_f1.set_xlabel("epoch")
    ax_f1.set_ylabel("valid macro-F1")
    ax_f1.set_ylim(0.0, 1.05)
    ax_loss.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def plot_metric_bars(runs: list[dict], path: Path) -> None:
    labels = [_run_label(r) for r in runs]
    x = np.arange(len(runs))
    width = 0.35
    fig, ax = plt.subplots(figsize=(max(6, 1.6 * len(runs)), 4))
    ax.bar(x - width / 2, [r.get("accuracy", 0.0) for r in runs], width, label="accuracy")
    ax.bar(x + width / 2, [r.get("macro_f1", 0.0) for r in runs], width, label="macro-F1")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=20, ha="right")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_confusions(runs: list[dict], path: Path) -> bool:
    with_confusion = [r for r in runs if r.get("confusion")]
    if not with_confusion:
        return False
    n = len(with_confusion)
    fig, axes = plt.subplots(1, n, figsize=(3.2 * n, 3.2), squeeze=False)
    for ax, run in zip(axes[0], with_confusion):
        matrix = np.asarray(run["confusion"])
        ax.imshow(matrix, cmap="Blues")
        for (i, j), value in np.ndenumerate(matrix):
            ax.text(j, i, str(int(value)), ha="center", va="center", fontsize=9)
        ax.set_xticks(range(3))
        ax.set_yticks(range(3))
        ax.set_xticklabels(LABEL_NAMES, rotation=45, ha="right", fontsize=8)
        ax.set_yticklabels(LABEL_NAMES, fontsize=8)
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        ax.set_title(_run_label(run), fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return True


def _run_label(run: dict) -> str:
    parts = []
    if run.get("variant"):
        parts.append(str(run["variant"]))
    if run.get("seed") is not None and run.get("seed") != "":
        parts.append(f"seed{run['seed']}")
    return " ".join(parts) or run.get("source", "run")


def render_report(metrics_paths: list[str | Path], out_dir: str | Path) -> list[Path]:
    """Write summary.csv plus the applicable figures; returns every path
    written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs: list[dict] = []
    for path in metrics_paths:
        runs.extend(load_metrics_file(path))
    if not runs:
        raise VectnError("no successful runs found in the metrics files")

    written: list[Path] = []
    summary = out_dir / "summary.csv"
    write_summary_csv(runs, summary)
    written.append(summary)

    bars = out_dir / "metrics_bars.png"
    plot_metric_bars(runs, bars)
    written.append(bars)

    curves = out_dir / "training_curves.png"
    if plot_training_curves(runs, curves):
        written.append(curves)

    confusion = out_dir / "confusion_matrices.png"
    if plot_confusions(runs, confusion):
        written.append(confusion)
    return written
