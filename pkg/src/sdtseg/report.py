"""Machine-readable reports with rendered figures.

Evaluation emits three artifacts side by side: a versioned JSON document,
a CSV with one row per subject, and a PNG summarizing the metric
distributions. Training logs get the same treatment (CSV + curves).
DSC is reported in percent to match the usual table convention.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

REPORT_SCHEMA = "sdtseg-metrics-report/1"

_METRICS = (("dsc_pct", "DSC (%)"), ("assd_mm", "ASSD (mm)"), ("hd95_mm", "HD95 (mm)"))


def metrics_rows(results) -> list[dict]:
    """Flatten (subject_id, MetricsReport) pairs into report rows."""
    rows = []
    for subject, rep in results:
        rows.append({
            "subject": subject,
            "dsc_pct": 100.0 * rep.dsc,
            "assd_mm": rep.assd_mm,
            "hd95_mm": rep.hd95_mm,
            "n_surface_pred": rep.n_surface_pred,
            "n_surface_ref": rep.n_surface_ref,
        })
    return rows


def aggregate(rows: list[dict]) -> dict:
    out = {}
    for key, _ in _METRICS:
        vals = np.array([r[key] for r in rows], dtype=float)
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def write_metrics_report(rows: list[dict], out_dir, method: str = "proposed") -> dict:
    """Write report.json, report.csv and metrics.png; returns the JSON doc."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "schema": REPORT_SCHEMA,
        "method": method,
        "n_subjects": len(rows),
        "subjects": rows,
        "aggregate": aggregate(rows),
    }
    (out_dir / "report.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")

    with open(out_dir / "report.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)

    _render_metrics_figure(rows, doc["aggregate"], out_dir / "metrics.png", method)
    return doc


def _render_metrics_figure(rows, agg, path, method):
    fig, axes = plt.subplots(1, 3, figsize=(9.5, 3.2))
    for ax, (key, label) in zip(axes, _METRICS):
        vals = [r[key] for r in rows]
        ax.boxplot(vals, widths=0.5)
        jitter = np.linspace(-0.12, 0.12, len(vals))
        ax.plot(1 + jitter, vals, "o", ms=4, alpha=0.6)
        m, s = agg[key]["mean"], agg[key]["std"]
        ax.set_title(f"{label}\n{m:.2f} ± {s:.2f}", fontsize=10)
        ax.set_xticks([])
        ax.grid(alpha=0.3, axis="y")
    fig.suptitle(f"{method} (n={len(rows)})", fontsize=11)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def write_training_report(history: list[dict], out_dir) -> None:
    """Write training_log.csv and curves.png for per-epoch history rows."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "training_log.csv", "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(history[0].keys()))
        writer.writeheader()
        writer.writerows(history)

    epochs = [r["epoch"] for r in history]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(8, 3.2))
    ax1.plot(epochs, [r["train_loss"] for r in history])
    ax1.set_yscale("log")
    ax1.set_xlabel("epoch")
    ax1.set_ylabel("training loss")
    ax1.grid(alpha=0.3)
    ax2.plot(epochs, [r["val_dice"] for r in history], label="validation Dice")
    ax2.plot(epochs, [r["best_val_dice"] for r in history], "--", label="best so far")
    ax2.set_xlabel("epoch")
    ax2.set_ylabel("Dice")
    ax2.set_ylim(0, 1.02)
    ax2.legend(fontsize=8)
    ax2.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_dir / "curves.png", dpi=150)
    plt.close(fig)
