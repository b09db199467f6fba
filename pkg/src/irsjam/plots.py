"""Figure rendering for run reports: smoothed training curves and sweep
summaries, written as PNG files next to the CSV output."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .harness import moving_average  # noqa: E402

_APPROACH_STYLES = {
    "wolf-phc": dict(color="tab:red", label="WoLF-PHC learning"),
    "q-learning": dict(color="tab:blue", label="fast Q-learning"),
    "greedy": dict(color="tab:green", label="greedy"),
    "no-irs": dict(color="tab:gray", label="optimal PA, no surface"),
    "random": dict(color="tab:purple", label="random actions"),
}


def _style(approach):
    return _APPROACH_STYLES.get(approach, dict(label=approach))


def save_training_curves(records, path, window: int | None = None) -> Path:
    """Smoothed system rate vs training step, one curve per approach (seeds of
    the same approach are averaged)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_approach: dict = {}
    for rec in records:
        by_approach.setdefault(rec.approach, []).append(rec)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for approach, recs in by_approach.items():
        n = min(len(r.rates) for r in recs)
        mean_rates = sum(r.rates[:n] for r in recs) / len(recs)
        w = window or max(1, n // 50)
        ax.plot(moving_average(mean_rates, w), linewidth=1.5, **_style(approach))
    ax.set_xlabel("training step")
    ax.set_ylabel("system rate (bits/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_sweep_curves(summary_rows, path, axis_label: str | None = None) -> Path:
    """Mean final rate vs the swept value, one line per approach with a
    +/- one-standard-deviation band."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    by_approach: dict = {}
    for row in summary_rows:
        if row["axis_value"] == "":
            continue
        by_approach.setdefault(row["approach"], []).append(row)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for approach, rows in by_approach.items():
        rows = sorted(rows, key=lambda r: r["axis_value"])
        xs = [r["axis_value"] for r in rows]
        ys = [r["mean_final_rate"] for r in rows]
        sd = [r["std_final_rate"] for r in rows]
        style = _style(approach)
        ax.errorbar(xs, ys, yerr=sd, marker="o", markersize=4,
                    linewidth=1.5, capsize=3, **style)
    if axis_label is None and summary_rows:
        axis_label = next((r["axis_name"] for r in summary_rows if r["axis_name"]), "")
    ax.set_xlabel(axis_label or "swept value")
    ax.set_ylabel("mean final rate (bits/s/Hz)")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
