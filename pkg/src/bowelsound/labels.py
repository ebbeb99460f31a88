"""Bowel-sound pattern taxonomy and Audacity-style label tracks.

A label track is an ordered, non-overlapping list of labeled time segments.
The on-disk format is the plain Audacity label text: one segment per line,
``start<TAB>end<TAB>label`` with seconds given to 6 decimal places.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional


class LabelTrackError(Exception):
    """Raised for malformed label data (bad lines, overlaps, unknown labels)."""


class PatternLabel(str, Enum):
    """The four clinically defined bowel-sound patterns plus the non-event label."""

    SB = "SB"
    MB = "MB"
    CRS = "CRS"
    HS = "HS"
    NONE = "None"

    @classmethod
    def parse(cls, text: str) -> "PatternLabel":
        for member in cls:
            if member.value == text:
                return member
        raise LabelTrackError(f"unknown label {text!r}")


# Canonical ordering used for deterministic tie-breaking everywhere.
EVENT_LABELS = (PatternLabel.SB, PatternLabel.MB, PatternLabel.CRS, PatternLabel.HS)
ALL_LABELS = EVENT_LABELS + (PatternLabel.NONE,)


@dataclass(frozen=True)
class PatternSpec:
    """Nominal duration bounds and temporal structure of one pattern."""

    label: PatternLabel
    min_ms: float
    max_ms: float
    structure: str


PATTERN_SPECS = {
    PatternLabel.SB: PatternSpec(PatternLabel.SB, 10.0, 30.0, "impulsive"),
    PatternLabel.MB: PatternSpec(PatternLabel.MB, 40.0, 1500.0, "burst-group"),
    PatternLabel.CRS: PatternSpec(PatternLabel.CRS, 200.0, 4000.0, "continuous"),
    PatternLabel.HS: PatternSpec(PatternLabel.HS, 50.0, 1500.0, "harmonic"),
}


class TrackSource(str, Enum):
    MANUAL = "manual"
    PREDICTED = "predicted"
    AUTO = "auto"
    EXPERT_ADJUSTED = "expert-adjusted"


@dataclass(frozen=True)
class Segment:
    """A labeled time interval. ``confidence`` is optional and not serialized."""

    start_s: float
    end_s: float
    label: PatternLabel
    confidence: Optional[float] = None

    def __post_init__(self) -> None:
        if not (self.end_s > self.start_s):
            raise LabelTrackError(
                f"segment end {self.end_s} must exceed start {self.start_s}"
            )
        if self.start_s < 0:
            raise LabelTrackError(f"segment start {self.start_s} must be >= 0")
        if self.confidence is not None and not (0.0 <= self.confidence <= 1.0):
            raise LabelTrackError(f"confidence {self.confidence} outside [0, 1]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


@dataclass(frozen=True)
class LabelTrack:
    """Sorted, non-overlapping segments from one channel.

    Construction sorts the input by start time and rejects overlaps, so any
    LabelTrack in circulation satisfies both invariants.
    """

    segments: tuple[Segment, ...] = ()
    source: TrackSource = TrackSource.MANUAL

    def __post_init__(self) -> None:
        ordered = tuple(sorted(self.segments, key=lambda s: (s.start_s, s.end_s)))
        for prev, cur in zip(ordered, ordered[1:]):
            if cur.start_s < prev.end_s:
                raise LabelTrackError(
                    f"overlapping segments: [{prev.start_s}, {prev.end_s}] "
                    f"and [{cur.start_s}, {cur.end_s}]"
                )
        object.__setattr__(self, "segments", ordered)

    def __len__(self) -> int:
        return len(self.segments)

    def __iter__(self):
        return iter(self.segments)

    def events(self) -> tuple[Segment, ...]:
        """Segments excluding the non-event (None) label."""
        return tuple(s for s in self.segments if s.label != PatternLabel.NONE)

    @property
    def span_end_s(self) -> float:
        return self.segments[-1].end_s if self.segments else 0.0


def parse_label_track(text: str, source: TrackSource = TrackSource.MANUAL) -> LabelTrack:
    """Parse Audacity label text into a LabelTrack.

    Each nonempty line must be ``start<TAB>end<TAB>label`` with '.'-separated
    decimal seconds. Unknown labels, end <= start, and overlaps are hard
    errors reported with their line number.
    """
    segments: list[tuple[int, Segment]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip("\r\n")
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise LabelTrackError(
                f"line {lineno}: expected 'start<TAB>end<TAB>label', got {line!r}"
            )
        try:
            start_s = float(parts[0])
            end_s = float(parts[1])
        except ValueError as exc:
            raise LabelTrackError(f"line {lineno}: bad timestamp: {exc}") from None
        label = parts[2].strip()
        try:
            pattern = PatternLabel.parse(label)
        except LabelTrackError:
            raise LabelTrackError(f"line {lineno}: unknown label {label!r}") from None
        try:
            segments.append((lineno, Segment(start_s, end_s, pattern)))
        except LabelTrackError as exc:
            raise LabelTrackError(f"line {lineno}: {exc}") from None

    segments.sort(key=lambda pair: (pair[1].start_s, pair[1].end_s))
    for (_, prev), (lineno, cur) in zip(segments, segments[1:]):
        if cur.start_s < prev.end_s:
            raise LabelTrackError(
                f"line {lineno}: segment [{cur.start_s}, {cur.end_s}] overlaps "
                f"[{prev.start_s}, {prev.end_s}]"
            )
    return LabelTrack(tuple(seg for _, seg in segments), source=source)


def write_label_track(track: LabelTrack) -> str:
    """Serialize to Audacity label text (6-decimal seconds, newline-terminated)."""
    return "".join(
        f"{seg.start_s:.6f}\t{seg.end_s:.6f}\t{seg.label.value}\n"
        for seg in track.segments
    )


def format_event_lines(intervals: Iterable[tuple[float, float]], label: str = "event") -> str:
    """Audacity text for raw, pre-classification intervals (label 'event')."""
    return "".join(f"{a:.6f}\t{b:.6f}\t{label}\n" for a, b in intervals)


def validate_durations(track: LabelTrack) -> list[str]:
    """Warnings for segments whose duration falls outside the nominal pattern bounds.

    None segments are exempt. Violations are warnings, never rejections:
    manually annotated data is known to exceed the nominal ranges.
    """
    warnings = []
    for seg in track.segments:
        spec = PATTERN_SPECS.get(seg.label)
        if spec is None:
            continue
        dur_ms = seg.duration_s * 1000.0
        if dur_ms < spec.min_ms:
            warnings.append(
                f"{spec.label.value} at {seg.start_s:.3f}s lasts {dur_ms:.1f} ms, "
                f"below {spec.min_ms:.0f} ms"
            )
        elif dur_ms > spec.max_ms:
            warnings.append(
                f"{spec.label.value} at {seg.start_s:.3f}s exceeds {spec.max_ms:.0f} ms "
                f"({dur_ms:.1f} ms)"
            )
    return warnings
