"""Quantitative comparison of label tracks and classifier scores.

Covers four report families: per-label distribution statistics, event-level
agreement between a reference and a candidate track, one-vs-rest AUROC of
classifier scores, and the expert-adjustment summary comparing automatic
labels against their reviewed version.

Event matching is greedy one-to-one on descending interval IoU with a 0.3
cutoff by default; the cutoff tolerates the known boundary truncation of
long multi-burst events while rejecting accidental overlaps.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.stats import rankdata

from .classify import ClassProbabilities
from .labels import ALL_LABELS, EVENT_LABELS, LabelTrack, PatternLabel, Segment

DEFAULT_IOU_MIN = 0.3


class EvalError(Exception):
    pass


def interval_iou(a: tuple[float, float], b: tuple[float, float]) -> float:
    inter = max(0.0, min(a[1], b[1]) - max(a[0], b[0]))
    union = max(a[1], b[1]) - min(a[0], b[0])
    return inter / union if union > 0 else 0.0


def match_events(
    reference: Sequence[Segment],
    candidate: Sequence[Segment],
    iou_min: float = DEFAULT_IOU_MIN,
) -> list[tuple[int, int, float]]:
    """Greedy one-to-one matching by descending IoU; ties break on indices."""
    pairs = []
    for i, r in enumerate(reference):
        for j, c in enumerate(candidate):
            v = interval_iou((r.start_s, r.end_s), (c.start_s, c.end_s))
            if v >= iou_min:
                pairs.append((v, i, j))
    pairs.sort(key=lambda t: (-t[0], t[1], t[2]))
    used_ref: set[int] = set()
    used_cand: set[int] = set()
    matches = []
    for v, i, j in pairs:
        if i in used_ref or j in used_cand:
            continue
        used_ref.add(i)
        used_cand.add(j)
        matches.append((i, j, v))
    return matches


# ---------------------------------------------------------------------------
# distribution reports

@dataclass(frozen=True)
class LabelStats:
    count: int
    normalized_count: float
    mean_s: Optional[float] = None
    median_s: Optional[float] = None
    p95_s: Optional[float] = None
    max_s: Optional[float] = None


@dataclass(frozen=True)
class DistributionReport:
    group: str  # Original | Predicted | Auto | ExpertAdjusted
    per_label: dict[PatternLabel, LabelStats]
    total_segments: int
    empty: bool = False

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "group": self.group,
            "total_segments": self.total_segments,
            "empty": self.empty,
            "per_label": {
                label.value: {
                    "count": st.count,
                    "normalized_count": st.normalized_count,
                    "mean_s": st.mean_s,
                    "median_s": st.median_s,
                    "p95_s": st.p95_s,
                    "max_s": st.max_s,
                }
                for label, st in self.per_label.items()
            },
        }


def distribution(track: LabelTrack, group: str = "Auto") -> DistributionReport:
    """Per-label normalized counts and duration statistics (None included)."""
    total = len(track.segments)
    per_label: dict[PatternLabel, LabelStats] = {}
    for label in ALL_LABELS:
        durs = np.array(
            [seg.duration_s for seg in track.segments if seg.label == label]
        )
        if durs.size:
            per_label[label] = LabelStats(
                count=int(durs.size),
                normalized_count=durs.size / total,
                mean_s=round(float(durs.mean()), 3),
                median_s=round(float(np.median(durs)), 3),
                p95_s=round(float(np.percentile(durs, 95)), 3),
                max_s=round(float(durs.max()), 3),
            )
        else:
            per_label[label] = LabelStats(count=0, normalized_count=0.0)
    return DistributionReport(
        group=group, per_label=per_label, total_segments=total, empty=total == 0
    )


# ---------------------------------------------------------------------------
# agreement between two tracks

@dataclass(frozen=True)
class AgreementReport:
    matched_events: int
    missed: int
    spurious: int
    iou_min: float
    boundary_mae_ms: Optional[float]
    confusion: dict[PatternLabel, dict[PatternLabel, int]]
    prevalence_order_preserved: bool

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "matched_events": self.matched_events,
            "missed": self.missed,
            "spurious": self.spurious,
            "iou_min": self.iou_min,
            "boundary_mae_ms": self.boundary_mae_ms,
            "confusion": {
                r.value: {c.value: n for c, n in row.items()}
                for r, row in self.confusion.items()
            },
            "prevalence_order_preserved": self.prevalence_order_preserved,
        }


def _prevalence_order(track: LabelTrack) -> tuple[PatternLabel, ...]:
    counts = {label: 0 for label in ALL_LABELS}
    for seg in track.segments:
        counts[seg.label] += 1
    return tuple(
        sorted(ALL_LABELS, key=lambda l: (-counts[l], ALL_LABELS.index(l)))
    )


def agreement(
    reference: LabelTrack,
    candidate: LabelTrack,
    iou_min: float = DEFAULT_IOU_MIN,
    span_tolerance_s: float = 1.0,
) -> AgreementReport:
    """Event-level agreement; None segments are excluded from matching."""
    if reference.segments and candidate.segments:
        if abs(reference.span_end_s - candidate.span_end_s) > span_tolerance_s:
            raise EvalError(
                f"span mismatch: reference ends at {reference.span_end_s:.3f}s, "
                f"candidate at {candidate.span_end_s:.3f}s"
            )
    ref_events = reference.events()
    cand_events = candidate.events()
    matches = match_events(ref_events, cand_events, iou_min)

    boundary_err = []
    confusion = {r: {c: 0 for c in EVENT_LABELS} for r in EVENT_LABELS}
    for i, j, _ in matches:
        r, c = ref_events[i], cand_events[j]
        boundary_err.append(
            (abs(r.start_s - c.start_s) + abs(r.end_s - c.end_s)) / 2.0 * 1000.0
        )
        confusion[r.label][c.label] += 1

    return AgreementReport(
        matched_events=len(matches),
        missed=len(ref_events) - len(matches),
        spurious=len(cand_events) - len(matches),
        iou_min=iou_min,
        boundary_mae_ms=round(float(np.mean(boundary_err)), 3) if boundary_err else None,
        confusion=confusion,
        prevalence_order_preserved=(
            _prevalence_order(reference) == _prevalence_order(candidate)
        ),
    )


# ---------------------------------------------------------------------------
# AUROC

@dataclass(frozen=True)
class AurocReport:
    per_class: dict[PatternLabel, Optional[float]]
    macro: Optional[float]
    skipped: dict[PatternLabel, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "per_class": {l.value: v for l, v in self.per_class.items()},
            "macro": self.macro,
            "skipped": {l.value: why for l, why in self.skipped.items()},
        }


def _auroc_binary(scores: np.ndarray, positives: np.ndarray) -> float:
    """Normalized Mann-Whitney U with average ranks; ties count one half."""
    n_pos = int(positives.sum())
    n_neg = len(positives) - n_pos
    ranks = rankdata(scores, method="average")
    u = float(ranks[positives].sum()) - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def auroc(
    labels: Sequence[PatternLabel], scores: Sequence[ClassProbabilities]
) -> AurocReport:
    """One-vs-rest AUROC per class plus the macro average.

    Classes without both a positive and a negative example are skipped with
    a note; if no class is evaluable the macro is reported as undefined.
    """
    if len(labels) != len(scores):
        raise EvalError("labels and scores lengths differ")
    per_class: dict[PatternLabel, Optional[float]] = {}
    skipped: dict[PatternLabel, str] = {}
    for cls in EVENT_LABELS:
        positives = np.array([lab is cls for lab in labels])
        n_pos = int(positives.sum())
        n_neg = len(labels) - n_pos
        if n_pos == 0 or n_neg == 0:
            per_class[cls] = None
            skipped[cls] = f"{n_pos} positive / {n_neg} negative examples"
            continue
        class_scores = np.array([s.probs[cls] for s in scores])
        per_class[cls] = _auroc_binary(class_scores, positives)
    evaluated = [v for v in per_class.values() if v is not None]
    macro = float(np.mean(evaluated)) if evaluated else None
    return AurocReport(per_class=per_class, macro=macro, skipped=skipped)


# ---------------------------------------------------------------------------
# expert-adjustment report

@dataclass(frozen=True)
class AdjustmentRow:
    auto_count: int
    expert_count: int
    mean_dur_auto_s: Optional[float]
    mean_dur_expert_s: Optional[float]


@dataclass(frozen=True)
class AdjustmentReport:
    per_label: dict[PatternLabel, AdjustmentRow]
    pct_removed_or_merged: float
    review_time_s: Optional[float] = None
    manual_baseline_s: Optional[float] = None

    @property
    def time_reduction_pct(self) -> Optional[float]:
        if self.review_time_s is None or not self.manual_baseline_s:
            return None
        return 100.0 * (1.0 - self.review_time_s / self.manual_baseline_s)

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "per_label": {
                l.value: {
                    "auto_count": row.auto_count,
                    "expert_count": row.expert_count,
                    "mean_dur_auto_s": row.mean_dur_auto_s,
                    "mean_dur_expert_s": row.mean_dur_expert_s,
                }
                for l, row in self.per_label.items()
            },
            "pct_removed_or_merged": self.pct_removed_or_merged,
            "review_time_s": self.review_time_s,
            "manual_baseline_s": self.manual_baseline_s,
            "time_reduction_pct": self.time_reduction_pct,
        }


def adjustment_report(
    auto: LabelTrack,
    expert: LabelTrack,
    review_time_s: Optional[float] = None,
    manual_baseline_s: Optional[float] = None,
    iou_min: float = DEFAULT_IOU_MIN,
    span_tolerance_s: float = 1.0,
) -> AdjustmentReport:
    """Class-wise comparison of automatic versus expert-adjusted labels.

    pct_removed_or_merged counts, over the automatic events: those with no
    expert counterpart at the IoU cutoff (removed), plus, for every expert
    segment that absorbed k >= 2 automatic events, k - 1 of them (merged).
    """
    if auto.segments and expert.segments:
        if abs(auto.span_end_s - expert.span_end_s) > span_tolerance_s:
            raise EvalError(
                f"span mismatch: auto ends at {auto.span_end_s:.3f}s, "
                f"expert at {expert.span_end_s:.3f}s"
            )
    per_label: dict[PatternLabel, AdjustmentRow] = {}
    for label in ALL_LABELS:
        auto_durs = [s.duration_s for s in auto.segments if s.label == label]
        exp_durs = [s.duration_s for s in expert.segments if s.label == label]
        per_label[label] = AdjustmentRow(
            auto_count=len(auto_durs),
            expert_count=len(exp_durs),
            mean_dur_auto_s=round(float(np.mean(auto_durs)), 3) if auto_durs else None,
            mean_dur_expert_s=round(float(np.mean(exp_durs)), 3) if exp_durs else None,
        )

    auto_events = auto.events()
    expert_events = expert.events()
    removed = 0
    absorbed: dict[int, int] = {}
    for a in auto_events:
        best_j, best_iou = None, 0.0
        for j, e in enumerate(expert_events):
            v = interval_iou((a.start_s, a.end_s), (e.start_s, e.end_s))
            if v > best_iou:
                best_j, best_iou = j, v
        if best_j is None or best_iou < iou_min:
            removed += 1
        else:
            absorbed[best_j] = absorbed.get(best_j, 0) + 1
    merged = sum(k - 1 for k in absorbed.values() if k >= 2)
    n_auto = len(auto_events)
    pct = 100.0 * (removed + merged) / n_auto if n_auto else 0.0

    return AdjustmentReport(
        per_label=per_label,
        pct_removed_or_merged=pct,
        review_time_s=review_time_s,
        manual_baseline_s=manual_baseline_s,
    )


# ---------------------------------------------------------------------------
# serialization helpers

def report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def distribution_csv(report: DistributionReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["group", "label", "count", "normalized_count", "mean_s", "median_s", "p95_s", "max_s"]
    )
    for label in ALL_LABELS:
        st = report.per_label[label]
        writer.writerow(
            [
                report.group,
                label.value,
                st.count,
                f"{st.normalized_count:.6f}",
                st.mean_s,
                st.median_s,
                st.p95_s,
                st.max_s,
            ]
        )
    return buf.getvalue()


def adjustment_csv(report: AdjustmentReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["label", "auto_count", "expert_count", "mean_dur_auto_s", "mean_dur_expert_s"]
    )
    for label in ALL_LABELS:
        row = report.per_label[label]
        writer.writerow(
            [label.value, row.auto_count, row.expert_count, row.mean_dur_auto_s, row.mean_dur_expert_s]
        )
    writer.writerow(["pct_removed_or_merged", f"{report.pct_removed_or_merged:.3f}", "", "", ""])
    return buf.getvalue()


def duration_histogram_csv(track: LabelTrack, bin_ms: float = 50.0, max_ms: float = 4000.0) -> str:
    """Plot-ready per-label histogram of segment durations."""
    edges = np.arange(0.0, max_ms + bin_ms, bin_ms)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["label", "bin_lo_ms", "bin_hi_ms", "count"])
    for label in ALL_LABELS:
        durs = np.array(
            [seg.duration_s * 1000.0 for seg in track.segments if seg.label == label]
        )
        hist, _ = np.histogram(durs, bins=edges)
        for k, n in enumerate(hist):
            writer.writerow([label.value, f"{edges[k]:.0f}", f"{edges[k + 1]:.0f}", int(n)])
    return buf.getvalue()
