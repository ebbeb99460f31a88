"""Temporal refinement of label tracks: ordering, gap filling, merging.

Segments are ordered chronologically, every gap longer than the fill
threshold (including the recording's leading and trailing edges) receives
an explicit None segment, and runs of adjacent same-label segments are
merged into one spanning segment. Gaps at or below the threshold stay
unlabeled: absorbing them into neighbors would distort the event-duration
statistics the evaluation measures.

Time comparisons are made on integer microseconds so that the 100 ms
threshold behaves exactly at the boundary regardless of float rounding
(label files carry 6 decimals, so microseconds are lossless).
"""

from __future__ import annotations

from dataclasses import dataclass

from .labels import LabelTrack, PatternLabel, Segment


class PostprocError(Exception):
    pass


@dataclass(frozen=True)
class PostprocConfig:
    gap_fill_min_ms: float = 100.0
    merge_max_gap_ms: float = 0.0  # 0 = merge only strictly adjacent segments
    fill_label: PatternLabel = PatternLabel.NONE

    def __post_init__(self) -> None:
        if self.gap_fill_min_ms < 0:
            raise ValueError("gap_fill_min_ms must be >= 0")
        if self.merge_max_gap_ms < 0:
            raise ValueError("merge_max_gap_ms must be >= 0")


def _us(t_s: float) -> int:
    return int(round(t_s * 1_000_000))


def refine(
    track: LabelTrack,
    total_duration_s: float,
    cfg: PostprocConfig = PostprocConfig(),
) -> LabelTrack:
    """Sort, fill gaps with None, and merge adjacent same-label segments."""
    total_us = _us(total_duration_s)
    for seg in track.segments:
        if _us(seg.end_s) > total_us:
            raise PostprocError(
                f"segment ending at {seg.end_s}s exceeds the recording "
                f"duration {total_duration_s}s"
            )

    fill_min_us = _us(cfg.gap_fill_min_ms / 1000.0)
    merge_max_us = _us(cfg.merge_max_gap_ms / 1000.0)

    # 1-2) chronological order (LabelTrack construction sorts) + gap fill
    filled: list[Segment] = []
    cursor_us = 0
    for seg in track.segments:
        gap = _us(seg.start_s) - cursor_us
        if gap > fill_min_us:
            filled.append(Segment(cursor_us / 1e6, seg.start_s, cfg.fill_label))
        filled.append(seg)
        cursor_us = _us(seg.end_s)
    if total_us - cursor_us > fill_min_us:
        filled.append(Segment(cursor_us / 1e6, total_duration_s, cfg.fill_label))

    # 3) merge runs of adjacent same-label segments
    merged: list[Segment] = []
    for seg in filled:
        if (
            merged
            and seg.label == merged[-1].label
            and _us(seg.start_s) - _us(merged[-1].end_s) <= merge_max_us
        ):
            prev = merged[-1]
            conf = None
            if prev.confidence is not None and seg.confidence is not None:
                conf = max(prev.confidence, seg.confidence)
            merged[-1] = Segment(prev.start_s, seg.end_s, prev.label, confidence=conf)
        else:
            merged.append(seg)

    return LabelTrack(tuple(merged), source=track.source)


def refine_idempotent_check(
    track: LabelTrack,
    total_duration_s: float,
    cfg: PostprocConfig = PostprocConfig(),
) -> bool:
    """True iff refine(refine(t)) == refine(t) for this input."""
    once = refine(track, total_duration_s, cfg)
    twice = refine(once, total_duration_s, cfg)
    return once == twice
