"""Report figures: class-distribution and duration panels per track group.

Rendered headless (Agg) straight to files next to the JSON/CSV reports.
Layout follows the two-row report convention: normalized counts on top,
duration statistics below, one column per track group.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalstats import DistributionReport
from .labels import ALL_LABELS, LabelTrack

LABEL_COLORS = {
    "None": "#9e9e9e",
    "SB": "#1f77b4",
    "MB": "#ff7f0e",
    "CRS": "#2ca02c",
    "HS": "#d62728",
}


def distribution_figure(
    reports: Sequence[DistributionReport], out_path: str | Path
) -> Path:
    """Bar panels of normalized counts (top) and mean duration (bottom)."""
    n = len(reports)
    fig, axes = plt.subplots(2, n, figsize=(4.0 * n, 6.0), squeeze=False)
    names = [l.value for l in ALL_LABELS]
    colors = [LABEL_COLORS[v] for v in names]
    for col, report in enumerate(reports):
        counts = [report.per_label[l].normalized_count for l in ALL_LABELS]
        means = [report.per_label[l].mean_s or 0.0 for l in ALL_LABELS]
        ax = axes[0][col]
        ax.bar(names, counts, color=colors)
        ax.set_title(report.group)
        ax.set_ylim(0, 1)
        if col == 0:
            ax.set_ylabel("normalized count")
        ax = axes[1][col]
        ax.bar(names, means, color=colors)
        if col == 0:
            ax.set_ylabel("mean duration (s)")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def duration_box_figure(
    tracks: dict[str, LabelTrack], out_path: str | Path
) -> Path:
    """Box plots of segment durations per label, one panel per track group."""
    n = len(tracks)
    fig, axes = plt.subplots(1, n, figsize=(4.0 * n, 4.0), squeeze=False)
    for col, (name, track) in enumerate(tracks.items()):
        data, positions, names = [], [], []
        for k, label in enumerate(ALL_LABELS):
            durs = [s.duration_s for s in track.segments if s.label == label]
            if durs:
                data.append(durs)
                positions.append(k)
                names.append(label.value)
        ax = axes[0][col]
        if data:
            ax.boxplot(data, positions=positions, widths=0.6)
        ax.set_xticks(range(len(ALL_LABELS)))
        ax.set_xticklabels([l.value for l in ALL_LABELS])
        ax.set_title(name)
        if col == 0:
            ax.set_ylabel("duration (s)")
        ax.set_yscale("log")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def frame_profile_figure(
    times_s: np.ndarray,
    rms_norm: np.ndarray,
    energy_delta: np.ndarray,
    energy_norm: np.ndarray,
    thr_rms: float,
    thr_delta: float,
    thr_rel: float,
    events: Sequence[tuple[float, float]],
    out_path: str | Path,
) -> Path:
    """Detection-feature panels with thresholds and detected spans."""
    fig, axes = plt.subplots(3, 1, figsize=(10, 7), sharex=True)
    series = [
        (rms_norm, thr_rms, "normalized RMS"),
        (energy_delta, thr_delta, "frame-to-frame energy diff (dB)"),
        (energy_norm, thr_rel, "energy rel. baseline (dB)"),
    ]
    for ax, (values, thr, title) in zip(axes, series):
        ax.plot(times_s, values, linewidth=0.6, color="#1f77b4")
        ax.axhline(thr, color="#d62728", linewidth=0.8, linestyle="--")
        for a, b in events:
            ax.axvspan(a, b, color="#2ca02c", alpha=0.15)
        ax.set_ylabel(title, fontsize=8)
    axes[-1].set_xlabel("time (s)")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
