"""Report figures rendered next to the delimited output.

Each experiment gets one PNG summarizing its result. Rendering uses the
Agg backend so runs work headless; figures are a reporting convenience
and never feed back into the numbers.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .results import ScenarioResult


def _save(fig, out_dir: str | Path, basename: str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{basename}.png"
    fig.savefig(path, dpi=130, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_sweep(result: ScenarioResult, out_dir: str | Path, basename: str) -> Path:
    cells = result.summary["cells"]
    ids = list(cells)
    fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(ids)), 4.0))
    means = [cells[c]["mean_m"] for c in ids]
    stds = [cells[c]["std_m"] for c in ids]
    x = np.arange(len(ids))
    ax.errorbar(x, means, yerr=stds, fmt="o", capsize=3, label="estimate")
    ax.plot(x, [cells[c]["d_true_m"] for c in ids], "k_", markersize=14, label="true path")
    targets = [cells[c]["d_set_m"] for c in ids]
    if any(t is not None for t in targets):
        tx = [i for i, t in enumerate(targets) if t is not None]
        ax.plot(tx, [targets[i] for i in tx], "r_", markersize=14, label="target")
    ax.set_xticks(x)
    ax.set_xticklabels(ids, rotation=45, ha="right", fontsize=8)
    ax.set_ylabel("distance estimate [m]")
    ax.set_title("distance manipulation per cell")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, out_dir, basename)


def plot_ota(result: ScenarioResult, out_dir: str | Path, basename: str) -> Path:
    return plot_sweep(result, out_dir, basename)


def plot_reciprocity(result: ScenarioResult, out_dir: str | Path, basename: str) -> Path:
    values: dict[str, list[float]] = {}
    for row in result.rows:
        values.setdefault(row["scenario_id"], []).append(row["dissimilarity"])
    fig, ax = plt.subplots(figsize=(7.0, 4.0))
    for arm, vals in values.items():
        ax.hist(vals, bins=30, alpha=0.55, label=arm)
    eps = result.summary["epsilon"]
    ax.axvline(eps, color="k", linestyle="--", label=f"epsilon = {eps:.2f}")
    ax.set_xlabel("dissimilarity [dB domain]")
    ax.set_ylabel("sweeps")
    ax.set_title("reciprocity dissimilarity by arm")
    ax.legend(fontsize=8)
    ax.grid(alpha=0.3)
    return _save(fig, out_dir, basename)


def plot_rss(result: ScenarioResult, out_dir: str | Path, basename: str) -> Path:
    series: dict[str, list[tuple[float, float]]] = {}
    for row in result.rows:
        if row["rep"] != 0:
            continue
        preset, mode, _ = row["scenario_id"].split(":", 2)
        series.setdefault(f"{preset}:{mode}", []).append((row["d_true_m"], row["rss_dbm"]))
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, pts in series.items():
        pts = sorted(pts)
        style = "--" if label.endswith(":relay") else "-"
        ax.plot([p[0] for p in pts], [p[1] for p in pts], style, label=label, linewidth=1.2)
    thresholds = result.summary["thresholds_dbm"]
    for name, level in thresholds.items():
        ax.axhline(level, color="k", alpha=0.4, linewidth=0.8)
        ax.annotate(name, (ax.get_xlim()[1], level), fontsize=7, va="bottom", ha="right")
    ax.set_xlabel("distance to receiving station [m]")
    ax.set_ylabel("received power [dBm]")
    ax.set_title("signal strength vs distance, direct and relayed")
    ax.legend(fontsize=7, ncols=2)
    ax.grid(alpha=0.3)
    return _save(fig, out_dir, basename)


def plot_trace(trace_run, out_dir: str | Path, basename: str) -> Path:
    steps = trace_run.trace.steps
    times = [s.time_us for s in steps]
    detector = [1 if s.detector else 0 for s in steps]
    direction = [1 if s.direction.value == "a->b" else 0 for s in steps]
    fig, axes = plt.subplots(2, 1, figsize=(9.0, 4.0), sharex=True)
    axes[0].step(times, detector, where="post")
    axes[0].set_ylabel("detector")
    axes[0].set_yticks([0, 1])
    axes[0].set_yticklabels(["idle", "assert"])
    axes[1].step(times, direction, where="post", color="tab:orange")
    axes[1].set_ylabel("direction")
    axes[1].set_yticks([0, 1])
    axes[1].set_yticklabels(["b->a", "a->b"])
    axes[1].set_xlabel("time [us]")
    axes[0].set_title("switch detector and direction trace")
    for ax in axes:
        ax.grid(alpha=0.3)
    return _save(fig, out_dir, basename)


PLOTTERS = {
    "sweep": plot_sweep,
    "ota": plot_ota,
    "reciprocity": plot_reciprocity,
    "rss": plot_rss,
}
