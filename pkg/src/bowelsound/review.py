"""Event-sourced expert review sessions over automatic label tracks.

A session freezes the automatic track, then applies expert edits (relabel,
move-boundary, split, merge, delete, insert) to a working copy. Every
accepted edit is appended to a log and bumps a revision counter; replaying
the log over the frozen auto track reproduces the working track exactly.
Invalid edits are rejected without changing any state.
"""

from __future__ import annotations

import time
import uuid
from dataclasses import dataclass, field, replace
from typing import Any, Optional

from .evalstats import AdjustmentReport, adjustment_report
from .labels import LabelTrack, LabelTrackError, PatternLabel, Segment, TrackSource

EDIT_OPS = ("relabel", "move-boundary", "split", "merge", "delete", "insert")


class EditError(Exception):
    """The edit references unknown segments or would corrupt the track."""


class SessionStateError(Exception):
    """Operation not valid in the session's current state."""


@dataclass(frozen=True)
class IdSegment:
    """A working-track segment with a stable per-session id."""

    id: int
    start_s: float
    end_s: float
    label: PatternLabel

    def to_segment(self) -> Segment:
        return Segment(self.start_s, self.end_s, self.label)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "label": self.label.value,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "IdSegment":
        return cls(
            id=int(doc["id"]),
            start_s=float(doc["start_s"]),
            end_s=float(doc["end_s"]),
            label=PatternLabel.parse(doc["label"]),
        )


def _to_label_track(segments: list[IdSegment], source: TrackSource) -> LabelTrack:
    return LabelTrack(tuple(s.to_segment() for s in segments), source=source)


def apply_edit_to_segments(
    segments: list[IdSegment],
    next_id: int,
    edit: dict[str, Any],
    duration_s: float,
) -> tuple[list[IdSegment], int]:
    """Pure edit application; raises EditError and leaves inputs untouched."""
    op = edit.get("op")
    if op not in EDIT_OPS:
        raise EditError(f"unknown edit op {op!r}")
    by_id = {s.id: i for i, s in enumerate(segments)}
    out = list(segments)

    def lookup(key: str = "segment_id") -> int:
        if key not in edit:
            raise EditError(f"edit {op} needs {key}")
        sid = int(edit[key])
        if sid not in by_id:
            raise EditError(f"unknown segment id {sid}")
        return by_id[sid]

    try:
        if op == "relabel":
            i = lookup()
            label = PatternLabel.parse(str(edit["label"]))
            out[i] = replace(out[i], label=label)
        elif op == "move-boundary":
            i = lookup()
            edge = edit.get("edge")
            if edge not in ("start", "end"):
                raise EditError("move-boundary needs edge 'start' or 'end'")
            t = float(edit["t"])
            if not (0.0 <= t <= duration_s):
                raise EditError(f"boundary {t} outside [0, {duration_s}]")
            seg = out[i]
            moved = (
                replace(seg, start_s=t) if edge == "start" else replace(seg, end_s=t)
            )
            if not (moved.end_s > moved.start_s):
                raise EditError("boundary move would empty the segment")
            out[i] = moved
        elif op == "split":
            i = lookup()
            t = float(edit["t"])
            seg = out[i]
            if not (seg.start_s < t < seg.end_s):
                raise EditError(f"split point {t} not inside ({seg.start_s}, {seg.end_s})")
            left = replace(seg, end_s=t)
            right = IdSegment(next_id, t, seg.end_s, seg.label)
            next_id += 1
            out[i : i + 1] = [left, right]
        elif op == "merge":
            ids = edit.get("segment_ids")
            if not isinstance(ids, list) or len(ids) < 2:
                raise EditError("merge needs a list of >= 2 segment ids")
            indices = sorted(by_id[int(sid)] if int(sid) in by_id else -1 for sid in ids)
            if indices[0] < 0:
                raise EditError(f"unknown segment id in merge: {ids}")
            if indices != list(range(indices[0], indices[-1] + 1)):
                raise EditError("merge segments must be consecutive in the track")
            chosen = [out[k] for k in indices]
            labels = {s.label for s in chosen}
            if len(labels) != 1:
                raise EditError("merge segments must share one label")
            merged = IdSegment(
                next_id,
                min(s.start_s for s in chosen),
                max(s.end_s for s in chosen),
                chosen[0].label,
            )
            next_id += 1
            out[indices[0] : indices[-1] + 1] = [merged]
        elif op == "delete":
            i = lookup()
            del out[i]
        elif op == "insert":
            start_s = float(edit["start_s"])
            end_s = float(edit["end_s"])
            if not (0.0 <= start_s < end_s <= duration_s):
                raise EditError(f"insert bounds [{start_s}, {end_s}] invalid")
            label = PatternLabel.parse(str(edit["label"]))
            out.append(IdSegment(next_id, start_s, end_s, label))
            next_id += 1
    except (KeyError, TypeError, ValueError) as exc:
        raise EditError(f"malformed {op} payload: {exc}") from None
    except LabelTrackError as exc:
        raise EditError(str(exc)) from None

    out.sort(key=lambda s: (s.start_s, s.end_s))
    try:
        _to_label_track(out, TrackSource.EXPERT_ADJUSTED)
    except LabelTrackError as exc:
        raise EditError(f"edit would corrupt the track: {exc}") from None
    return out, next_id


def replay_edits(
    auto_segments: list[IdSegment],
    edit_log: list[dict[str, Any]],
    duration_s: float,
) -> list[IdSegment]:
    """Fold the edit log over the frozen auto track."""
    segments = list(auto_segments)
    next_id = max((s.id for s in segments), default=-1) + 1
    for entry in edit_log:
        segments, next_id = apply_edit_to_segments(
            segments, next_id, entry["edit"], duration_s
        )
    return segments


@dataclass
class ReviewSession:
    session_id: str
    recording: str
    quadrant: str
    duration_s: float
    sample_rate: int
    auto_segments: list[IdSegment]
    working_segments: list[IdSegment]
    edit_log: list[dict[str, Any]] = field(default_factory=list)
    revision: int = 0
    next_segment_id: int = 0
    started_at: float = field(default_factory=time.time)
    finished_at: Optional[float] = None

    @classmethod
    def create(
        cls,
        recording: str,
        quadrant: str,
        auto_track: LabelTrack,
        duration_s: float,
        sample_rate: int,
    ) -> "ReviewSession":
        auto = [
            IdSegment(i, seg.start_s, seg.end_s, seg.label)
            for i, seg in enumerate(auto_track.segments)
        ]
        return cls(
            session_id=uuid.uuid4().hex[:12],
            recording=recording,
            quadrant=quadrant,
            duration_s=duration_s,
            sample_rate=sample_rate,
            auto_segments=auto,
            working_segments=list(auto),
            next_segment_id=len(auto),
        )

    @property
    def finished(self) -> bool:
        return self.finished_at is not None

    def auto_track(self) -> LabelTrack:
        return _to_label_track(self.auto_segments, TrackSource.AUTO)

    def working_track(self) -> LabelTrack:
        return _to_label_track(self.working_segments, TrackSource.EXPERT_ADJUSTED)

    def apply_edit(self, edit: dict[str, Any], revision: int) -> None:
        """Validate against the expected revision, then commit atomically."""
        if self.finished:
            raise SessionStateError("session already finished")
        if revision != self.revision:
            raise SessionStateError(
                f"stale revision {revision}; session is at {self.revision}"
            )
        new_segments, new_next = apply_edit_to_segments(
            self.working_segments, self.next_segment_id, edit, self.duration_s
        )
        self.working_segments = new_segments
        self.next_segment_id = new_next
        self.edit_log.append({"edit": dict(edit), "timestamp": time.time()})
        self.revision += 1

    def finish(
        self, manual_baseline_s: Optional[float] = None
    ) -> AdjustmentReport:
        if self.finished:
            raise SessionStateError("session already finished")
        self.finished_at = time.time()
        return adjustment_report(
            self.auto_track(),
            self.working_track(),
            review_time_s=self.finished_at - self.started_at,
            manual_baseline_s=manual_baseline_s,
        )

    def verify_replay(self) -> bool:
        """Event-sourcing invariant: fold(edit_log) over auto == working."""
        replayed = replay_edits(self.auto_segments, self.edit_log, self.duration_s)
        return replayed == self.working_segments

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "session_id": self.session_id,
            "recording": self.recording,
            "quadrant": self.quadrant,
            "duration_s": self.duration_s,
            "sample_rate": self.sample_rate,
            "revision": self.revision,
            "next_segment_id": self.next_segment_id,
            "started_at": self.started_at,
            "finished_at": self.finished_at,
            "auto_track": [s.to_dict() for s in self.auto_segments],
            "working_track": [s.to_dict() for s in self.working_segments],
            "edit_log": self.edit_log,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ReviewSession":
        session = cls(
            session_id=doc["session_id"],
            recording=doc["recording"],
            quadrant=doc["quadrant"],
            duration_s=float(doc["duration_s"]),
            sample_rate=int(doc["sample_rate"]),
            auto_segments=[IdSegment.from_dict(d) for d in doc["auto_track"]],
            working_segments=[IdSegment.from_dict(d) for d in doc["working_track"]],
            edit_log=list(doc.get("edit_log", [])),
            revision=int(doc.get("revision", 0)),
            next_segment_id=int(doc.get("next_segment_id", 0)),
            started_at=float(doc.get("started_at", time.time())),
            finished_at=doc.get("finished_at"),
        )
        return session
