"""Joint onset/sustain/offset event detection over frame features.

A two-state machine walks the 1 ms frame grid:

  - onset (IDLE -> ACTIVE): the normalized RMS and the frame-to-frame
    energy difference both strictly exceed their median thresholds;
  - sustain: the event continues while the energy relative to the baseline
    stays strictly above its threshold, so cluster-like events with
    fluctuating intra-frame amplitude are not fragmented;
  - offset (ACTIVE -> IDLE): declared at the first frame where all three
    parameters sit at or below their thresholds, once hangover_frames
    consecutive such frames confirm it.

Strict inequalities matter: thresholds are medians, so half the frames of
a quiet recording sit at or below them, and strictness keeps the machine
from chattering at the median.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .audio import AudioClip, Recording
from .features import (
    FeatureError,
    FrameFeatureTrack,
    ProfileConfig,
    ThresholdSet,
    analyze_clip,
    thresholds,
    thresholds_pooled,
)


@dataclass(frozen=True)
class DetectorConfig:
    min_event_ms: int = 5
    hangover_frames: int = 20  # consecutive all-below frames confirming an offset

    def __post_init__(self) -> None:
        if self.min_event_ms < 1:
            raise ValueError("min_event_ms must be >= 1")
        if self.hangover_frames < 0:
            raise ValueError("hangover_frames must be >= 0")


@dataclass(frozen=True)
class EventInterval:
    start_s: float
    end_s: float
    peak_energy_norm: float
    frame_span: int

    def __post_init__(self) -> None:
        if not (self.end_s > self.start_s >= 0):
            raise ValueError(f"bad interval [{self.start_s}, {self.end_s}]")

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s


def detect_events(
    track: FrameFeatureTrack,
    thr: ThresholdSet,
    cfg: DetectorConfig = DetectorConfig(),
) -> list[EventInterval]:
    """Run the state machine; returns sorted, disjoint intervals on the 1 ms grid."""
    rms_norm = track.rms_norm
    delta = track.energy_delta
    rel = track.energy_norm
    if rms_norm is None or delta is None or rel is None:
        raise FeatureError("track not normalized; run analyze_clip first")

    onset = (rms_norm > thr.thr_rms) & (delta > thr.thr_energy_delta)
    below = (
        (rms_norm <= thr.thr_rms)
        & (delta <= thr.thr_energy_delta)
        & (rel <= thr.thr_energy_rel)
    )

    need = max(1, cfg.hangover_frames)
    frame_rate = track.frame_rate
    events: list[EventInterval] = []
    active = False
    start = 0
    below_run = 0

    def emit(start_frame: int, end_frame: int) -> None:
        span = end_frame - start_frame
        if span < cfg.min_event_ms:
            return
        events.append(
            EventInterval(
                start_s=start_frame / frame_rate,
                end_s=end_frame / frame_rate,
                peak_energy_norm=float(np.max(rel[start_frame:end_frame])),
                frame_span=span,
            )
        )

    for i in range(track.n_frames):
        if not active:
            if onset[i]:
                active = True
                start = i
                below_run = 0
        else:
            if below[i]:
                below_run += 1
                if below_run >= need:
                    emit(start, i - below_run + 1)
                    active = False
                    below_run = 0
            else:
                below_run = 0

    if active:
        # recording ended mid-event; close at the start of any trailing
        # below-run, otherwise at the final frame
        emit(start, track.n_frames - below_run)
    return events


def detect_clip(
    clip: AudioClip,
    cfg: DetectorConfig = DetectorConfig(),
    profile_cfg: ProfileConfig = ProfileConfig(),
) -> tuple[list[EventInterval], FrameFeatureTrack]:
    """Feature pipeline plus detection for one channel."""
    track = analyze_clip(clip, profile_cfg)
    return detect_events(track, thresholds(track), cfg), track


@dataclass
class RecordingDetection:
    """Per-channel outcome; failed channels report their error separately."""

    events: dict[str, list[EventInterval]] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.failures


def detect_recording(
    rec: Recording,
    cfg: DetectorConfig = DetectorConfig(),
    profile_cfg: ProfileConfig = ProfileConfig(),
    pool_thresholds: bool = False,
    jobs: int = 1,
) -> RecordingDetection:
    """Detect events independently per quadrant channel.

    With pool_thresholds=True the median thresholds are computed over the
    pooled normalized distributions of every analyzable channel instead of
    per channel. Deterministic for fixed inputs regardless of jobs.
    """
    result = RecordingDetection()
    names = list(rec.channels)

    def analyze(name: str):
        return analyze_clip(rec.channels[name], profile_cfg)

    tracks: dict[str, FrameFeatureTrack] = {}
    if jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {name: pool.submit(analyze, name) for name in names}
            for name, fut in futures.items():
                try:
                    tracks[name] = fut.result()
                except FeatureError as exc:
                    result.failures[name] = f"{name}: {exc}"
    else:
        for name in names:
            try:
                tracks[name] = analyze(name)
            except FeatureError as exc:
                result.failures[name] = f"{name}: {exc}"

    pooled = thresholds_pooled(tracks.values()) if (pool_thresholds and tracks) else None
    for name, track in tracks.items():
        thr = pooled if pooled is not None else thresholds(track)
        result.events[name] = detect_events(track, thr, cfg)
    return result
