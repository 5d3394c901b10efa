"""Static figure rendering for loss curves and metric bars."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_loss_curves(loss_csv: str | Path, out_png: str | Path) -> Path:
    steps, totals, mses, dms, toks = [], [], [], [], []
    with Path(loss_csv).open() as fh:
        for row in csv.DictReader(fh):
            steps.append(int(row["step"]))
            totals.append(float(row["total"]))
            mses.append(float(row["mse"]))
            dms.append(float(row["dm"]))
            toks.append(float(row["tok"]))
    fig, ax = plt.subplots(figsize=(8, 5))
    ax.plot(steps, totals, label="total", lw=1.2)
    ax.plot(steps, mses, label="mse", lw=0.8)
    ax.plot(steps, dms, label="dm", lw=0.8)
    ax.plot(steps, toks, label="tok", lw=0.8)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_yscale("symlog", linthresh=1e-3)
    ax.legend()
    ax.set_title("training loss")
    fig.tight_layout()
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png


def plot_metric_bars(metrics: dict[str, float], title: str, out_png: str | Path) -> Path:
    names = [k for k, v in metrics.items() if isinstance(v, (int, float))]
    values = [metrics[k] for k in names]
    fig, ax = plt.subplots(figsize=(max(6, 0.9 * len(names)), 4.5))
    ax.bar(range(len(names)), values, color="#4878a8")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=35, ha="right", fontsize=8)
    ax.set_title(title)
    for i, v in enumerate(values):
        ax.text(i, v, f"{v:.3g}", ha="center", va="bottom", fontsize=7)
    fig.tight_layout()
    out_png = Path(out_png)
    out_png.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_png, dpi=120)
    plt.close(fig)
    return out_png
