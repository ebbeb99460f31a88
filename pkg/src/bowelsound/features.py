"""Per-frame amplitude/energy features, dB energy profile, and thresholds.

Analysis runs on non-overlapping 1 ms frames (N = round(fs/1000) samples).
Per frame i the track holds the RMS amplitude and the energy

    rms[i]    = sqrt(sum(x^2) / N)
    energy[i] = sum(x^2)

plus a spectral energy profile in dB referenced to the maximum spectral
magnitude of the whole recording, averaged over frequency bins and smoothed
over time. The median of the smoothed curve serves as the baseline for
normalization, which removes inter-subject level differences: rescaling a
recording by any positive gain leaves every normalized series unchanged.

Detection thresholds are the medians of the normalized frame-wise
distributions (lower of the two central values for even length, so each
threshold is an actual observed value).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .audio import AudioClip

FRAME_RATE = 1000  # detection frames per second


class FeatureError(Exception):
    pass


class SilentBaselineError(FeatureError):
    """The recording is digitally silent; no baseline can be formed."""


@dataclass(frozen=True)
class ProfileConfig:
    """STFT and smoothing parameters for the dB energy profile.

    Each analysis window is centered on its 1 ms frame, so the profile
    rises together with the in-frame RMS at an event onset (a one-sided
    window would make the frame-to-frame energy difference lead or lag
    the RMS jump and break the joint onset criterion).
    """

    win_ms: float = 25.0
    smooth_frames: int = 15  # centered moving average width, odd
    db_floor: float = -100.0

    def __post_init__(self) -> None:
        if self.smooth_frames < 1 or self.smooth_frames % 2 == 0:
            raise ValueError("smooth_frames must be odd and >= 1")
        if self.win_ms <= 0:
            raise ValueError("win_ms must be positive")

    def win_samples(self, sample_rate: int) -> int:
        return int(round(self.win_ms * sample_rate / 1000.0))

    def n_fft(self, sample_rate: int) -> int:
        return 1 << int(np.ceil(np.log2(self.win_samples(sample_rate))))


@dataclass(frozen=True)
class FrameFeatureTrack:
    """All per-frame series plus baselines; series share one length."""

    frame_len_samples: int
    frame_rate: int
    rms: np.ndarray
    energy: np.ndarray
    energy_db: Optional[np.ndarray] = None
    energy_db_smooth: Optional[np.ndarray] = None
    rms_norm: Optional[np.ndarray] = None
    energy_norm: Optional[np.ndarray] = None
    energy_delta: Optional[np.ndarray] = None
    baseline_rms: Optional[float] = None
    baseline_energy: Optional[float] = None
    silent: bool = False

    @property
    def n_frames(self) -> int:
        return len(self.rms)

    def times_s(self) -> np.ndarray:
        return np.arange(self.n_frames) / self.frame_rate


@dataclass(frozen=True)
class ThresholdSet:
    """Median-based detection thresholds (dimensionless, dB/frame, dB)."""

    thr_rms: float
    thr_energy_delta: float
    thr_energy_rel: float


def frame_len(sample_rate: int) -> int:
    return int(round(sample_rate / 1000.0))


def median_low(values: np.ndarray) -> float:
    """Exact order-statistic median; lower of the two central values."""
    values = np.asarray(values)
    if values.size == 0:
        raise FeatureError("median of empty series")
    k = (values.size - 1) // 2
    return float(np.partition(values, k)[k])


def frame_features(clip: AudioClip) -> FrameFeatureTrack:
    """RMS and energy per 1 ms frame; the trailing partial frame is dropped."""
    n = frame_len(clip.sample_rate)
    n_frames = len(clip.samples) // n
    if n_frames < 10:
        raise FeatureError(
            f"clip too short: {n_frames} frames < 10 (need at least 10 ms)"
        )
    framed = clip.samples[: n_frames * n].reshape(n_frames, n)
    energy = np.sum(framed * framed, axis=1)
    rms = np.sqrt(energy / n)
    return FrameFeatureTrack(
        frame_len_samples=n, frame_rate=FRAME_RATE, rms=rms, energy=energy
    )


def _smooth_centered(series: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average with edge-value padding.

    Implemented as an explicit convolution so equal windows produce
    bit-identical outputs (a running-sum filter would accumulate rounding
    drift and break exact gain invariance).
    """
    if width == 1:
        return series.copy()
    half = width // 2
    padded = np.pad(series, half, mode="edge")
    kernel = np.full(width, 1.0 / width)
    return np.convolve(padded, kernel, mode="valid")


def energy_db_profile(
    clip: AudioClip, cfg: ProfileConfig = ProfileConfig()
) -> tuple[np.ndarray, np.ndarray, bool]:
    """dB energy profile over the 1 ms frame grid.

    The magnitude spectrogram is referenced to its global maximum, floored
    at cfg.db_floor, averaged across frequency bins per frame, then smoothed
    with a centered moving average. Returns (raw, smoothed, silent); a
    digitally silent clip yields floor everywhere and silent=True.
    """
    n = frame_len(clip.sample_rate)
    win = cfg.win_samples(clip.sample_rate)
    if len(clip.samples) < win:
        raise FeatureError(f"clip shorter than one {cfg.win_ms} ms analysis window")
    n_fft = cfg.n_fft(clip.sample_rate)
    n_frames = len(clip.samples) // n

    # window for frame t spans [t*N + N/2 - win/2, t*N + N/2 + win/2)
    left = win // 2 - n // 2
    padded = np.concatenate(
        [np.zeros(left, dtype=np.float64), clip.samples, np.zeros(win, dtype=np.float64)]
    )
    view = np.lib.stride_tricks.sliding_window_view(padded, win)
    starts = np.arange(n_frames) * n
    window = np.hanning(win)

    chunk = max(1, (1 << 22) // max(n_fft, 1))  # cap scratch memory ~64 MB

    global_max = 0.0
    for lo in range(0, n_frames, chunk):
        frames = view[starts[lo : lo + chunk]] * window
        mags = np.abs(np.fft.rfft(frames, n_fft, axis=1))
        m = float(mags.max(initial=0.0))
        if m > global_max:
            global_max = m

    if global_max == 0.0:
        raw = np.full(n_frames, cfg.db_floor)
        return raw, raw.copy(), True

    raw = np.empty(n_frames, dtype=np.float64)
    for lo in range(0, n_frames, chunk):
        frames = view[starts[lo : lo + chunk]] * window
        mags = np.abs(np.fft.rfft(frames, n_fft, axis=1))
        with np.errstate(divide="ignore"):
            db = 20.0 * np.log10(mags / global_max)
        np.maximum(db, cfg.db_floor, out=db)
        raw[lo : lo + len(frames)] = db.mean(axis=1)

    smooth = _smooth_centered(raw, cfg.smooth_frames)
    return raw, smooth, False


def normalize(track: FrameFeatureTrack) -> FrameFeatureTrack:
    """Baseline-normalize a track populated with energy profile series.

    The baseline energy is the median of the smoothed dB profile; the RMS
    baseline is the mean RMS over the non-event frames (those at or below
    the baseline energy). Energy normalization is the dB difference to the
    baseline, so the threshold comparison is invariant to the recording's
    absolute level.
    """
    if track.energy_db_smooth is None:
        raise FeatureError("track has no energy profile; run energy_db_profile first")
    esm = track.energy_db_smooth
    baseline_energy = median_low(esm)
    quiet = esm <= baseline_energy
    baseline_rms = float(np.mean(track.rms[quiet]))
    if baseline_rms == 0.0:
        raise SilentBaselineError("silent baseline")
    rms_norm = track.rms / baseline_rms
    energy_norm = esm - baseline_energy
    energy_delta = np.empty_like(esm)
    energy_delta[0] = 0.0
    np.subtract(esm[1:], esm[:-1], out=energy_delta[1:])
    return replace(
        track,
        rms_norm=rms_norm,
        energy_norm=energy_norm,
        energy_delta=energy_delta,
        baseline_rms=baseline_rms,
        baseline_energy=baseline_energy,
    )


def thresholds(track: FrameFeatureTrack) -> ThresholdSet:
    """Medians of the normalized frame-wise distributions."""
    if track.rms_norm is None or track.energy_delta is None or track.energy_norm is None:
        raise FeatureError("track not normalized; run normalize first")
    return ThresholdSet(
        thr_rms=median_low(track.rms_norm),
        thr_energy_delta=median_low(track.energy_delta),
        thr_energy_rel=median_low(track.energy_norm),
    )


def thresholds_pooled(tracks: Iterable[FrameFeatureTrack]) -> ThresholdSet:
    """Thresholds from the pooled normalized distributions of several channels."""
    tracks = list(tracks)
    if not tracks:
        raise FeatureError("no tracks to pool")
    return ThresholdSet(
        thr_rms=median_low(np.concatenate([t.rms_norm for t in tracks])),
        thr_energy_delta=median_low(np.concatenate([t.energy_delta for t in tracks])),
        thr_energy_rel=median_low(np.concatenate([t.energy_norm for t in tracks])),
    )


def analyze_clip(clip: AudioClip, cfg: ProfileConfig = ProfileConfig()) -> FrameFeatureTrack:
    """Full feature pipeline: framing, dB profile, and normalization."""
    track = frame_features(clip)
    raw, smooth, silent = energy_db_profile(clip, cfg)
    track = replace(track, energy_db=raw, energy_db_smooth=smooth, silent=silent)
    return normalize(track)


def track_to_csv(track: FrameFeatureTrack) -> str:
    """One row per frame with all derived series, for external plotting."""
    if track.rms_norm is None:
        raise FeatureError("track not normalized; run normalize first")
    lines = ["index,time_s,rms,energy,energy_db_smooth,rms_norm,energy_norm,energy_delta"]
    times = track.times_s()
    for i in range(track.n_frames):
        lines.append(
            f"{i},{times[i]:.3f},{track.rms[i]:.9g},{track.energy[i]:.9g},"
            f"{track.energy_db_smooth[i]:.6f},{track.rms_norm[i]:.9g},"
            f"{track.energy_norm[i]:.6f},{track.energy_delta[i]:.6f}"
        )
    return "\n".join(lines) + "\n"
