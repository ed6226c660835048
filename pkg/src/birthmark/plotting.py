"""Figure rendering for reports and benchmarks.

All figures render headless (Agg) straight to files next to the
delimited outputs; nothing here ever opens a window.
"""

from __future__ import annotations

from pathlib import Path
from typing import Dict, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

FIG_SIZE = (7.0, 4.2)
DPI = 130


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def timing_histogram_figure(bins: Dict[int, int], path, warn_below: int = 10) -> Path:
    """Records per 10-minute posting bin with the low-traffic floor."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    if bins:
        epochs = sorted(bins)
        counts = [bins[e] for e in epochs]
        labels = [e - epochs[0] for e in epochs]
        colors = ["#c0392b" if c < warn_below else "#2c3e50" for c in counts]
        ax.bar(labels, counts, color=colors, width=0.8)
    ax.axhline(warn_below, color="#c0392b", linestyle="--", linewidth=1,
               label=f"anonymity floor ({warn_below})")
    ax.set_xlabel("posting bin (10-minute epochs, relative)")
    ax.set_ylabel("records per bin")
    ax.set_title("Temporal anonymity sets")
    ax.legend(loc="upper right")
    return _save(fig, Path(path))


def evasion_curve_figure(points: List[dict], path) -> Path:
    """Measured tamper detection rate against the analytic all-miss bound."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    fractions = [p["tamper_fraction"] for p in points]
    rates = [p["detection_rate"] for p in points]
    bounds = [1.0 - p["all_miss_bound"] for p in points]
    ax.plot(fractions, rates, "o-", color="#2c3e50", label="measured detection rate")
    ax.plot(fractions, bounds, "s--", color="#7f8c8d",
            label="1 - analytic all-miss bound")
    ax.set_xlabel("tampered area fraction")
    ax.set_ylabel("audit failure rate")
    ax.set_ylim(-0.05, 1.05)
    ax.set_title("Deviation-audit evasion curve (100 patches of 64x64)")
    ax.legend(loc="lower right")
    return _save(fig, Path(path))


def attack_matrix_figure(outcomes: List, path) -> Path:
    """One bar per attack row: defended or breached."""
    fig, ax = plt.subplots(figsize=(7.0, max(2.5, 0.38 * len(outcomes))))
    names = [o.name for o in outcomes]
    values = [1 if o.defended else 0 for o in outcomes]
    colors = ["#27ae60" if v else "#c0392b" for v in values]
    y = np.arange(len(names))
    ax.barh(y, [1] * len(names), color=colors, height=0.6)
    ax.set_yticks(y)
    ax.set_yticklabels(names, fontsize=8)
    ax.set_xticks([])
    ax.invert_yaxis()
    for i, v in enumerate(values):
        ax.text(0.5, i, "DEFENDED" if v else "BREACHED", va="center", ha="center",
                color="white", fontsize=8, fontweight="bold")
    ax.set_title("Attack-defense matrix")
    return _save(fig, Path(path))


def latency_figure(samples_ms: Dict[str, List[float]], path, title: str) -> Path:
    """Latency distributions with p50/p95/p99 markers."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    for label, samples in samples_ms.items():
        data = np.sort(np.asarray(samples))
        cdf = np.arange(1, len(data) + 1) / len(data)
        ax.plot(data, cdf, label=label)
        for q, style in ((0.50, ":"), (0.95, "--"), (0.99, "-.")):
            ax.axvline(float(np.quantile(data, q)), linestyle=style, alpha=0.25, color="gray")
    ax.set_xlabel("latency (ms)")
    ax.set_ylabel("fraction of operations")
    ax.set_title(title)
    ax.legend(loc="lower right")
    return _save(fig, Path(path))


def scaling_figure(sizes_mp: List[float], p50_ms: List[float], path) -> Path:
    """Camera-side authentication latency versus image size."""
    fig, ax = plt.subplots(figsize=FIG_SIZE)
    ax.plot(sizes_mp, p50_ms, "o-", color="#2c3e50")
    ax.set_xlabel("image size (megapixels)")
    ax.set_ylabel("median auth delta (ms)")
    ax.set_title("Camera authentication scaling")
    return _save(fig, Path(path))


def report_figures(report, out_dir) -> List[Path]:
    """Standard figure set for a security report."""
    out = Path(out_dir)
    written = []
    written.append(attack_matrix_figure(report.outcomes, out / "attack_matrix.png"))
    if report.evasion:
        written.append(evasion_curve_figure(report.evasion, out / "evasion_curve.png"))
    for outcome in report.outcomes:
        if outcome.name == "timing-correlation" and "bins" in outcome.evidence:
            bins = {int(k): v for k, v in outcome.evidence["bins"].items()}
            written.append(timing_histogram_figure(bins, out / "timing_anonymity.png"))
    return written
