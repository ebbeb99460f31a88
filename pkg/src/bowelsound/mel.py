"""Log mel-spectrogram features for pattern classification.

128 mel bands over 25 ms Hann windows with a 10 ms hop. Framing is
left-aligned without centering, so a clip of L samples yields exactly
1 + floor((L - win) / hop) frames. Per-band mean-variance normalization
statistics are computed over a training corpus and applied to every patch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .audio import AudioClip

LOG_FLOOR = 1e-10


class MelError(Exception):
    pass


@dataclass(frozen=True)
class MelConfig:
    n_mels: int = 128
    win_ms: float = 25.0
    hop_ms: float = 10.0
    fmin_hz: float = 0.0
    fmax_hz: Optional[float] = None  # defaults to Nyquist

    def win_samples(self, sample_rate: int) -> int:
        return int(round(self.win_ms * sample_rate / 1000.0))

    def hop_samples(self, sample_rate: int) -> int:
        return int(round(self.hop_ms * sample_rate / 1000.0))

    def n_fft(self, sample_rate: int) -> int:
        # lower-bounded so 128 triangular filters never collapse onto
        # an empty bin range at low sample rates
        win = self.win_samples(sample_rate)
        return max(1 << int(np.ceil(np.log2(win))), 512)

    def to_dict(self) -> dict:
        return {
            "n_mels": self.n_mels,
            "win_ms": self.win_ms,
            "hop_ms": self.hop_ms,
            "fmin_hz": self.fmin_hz,
            "fmax_hz": self.fmax_hz,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "MelConfig":
        return cls(
            n_mels=int(doc.get("n_mels", 128)),
            win_ms=float(doc.get("win_ms", 25.0)),
            hop_ms=float(doc.get("hop_ms", 10.0)),
            fmin_hz=float(doc.get("fmin_hz", 0.0)),
            fmax_hz=doc.get("fmax_hz"),
        )


def hz_to_mel(f: np.ndarray | float) -> np.ndarray | float:
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m: np.ndarray | float) -> np.ndarray | float:
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(cfg: MelConfig, sample_rate: int) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft // 2 + 1)."""
    n_fft = cfg.n_fft(sample_rate)
    fmax = cfg.fmax_hz if cfg.fmax_hz is not None else sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(fmax), cfg.n_mels + 2)
    hz_pts = mel_to_hz(mel_pts)
    bin_freqs = np.fft.rfftfreq(n_fft, 1.0 / sample_rate)

    fb = np.zeros((cfg.n_mels, len(bin_freqs)))
    for m in range(cfg.n_mels):
        lo, center, hi = hz_pts[m], hz_pts[m + 1], hz_pts[m + 2]
        up = (bin_freqs - lo) / max(center - lo, 1e-12)
        down = (hi - bin_freqs) / max(hi - center, 1e-12)
        fb[m] = np.maximum(0.0, np.minimum(up, down))
    return fb


def band_center_freqs(cfg: MelConfig, sample_rate: int) -> np.ndarray:
    fmax = cfg.fmax_hz if cfg.fmax_hz is not None else sample_rate / 2.0
    mel_pts = np.linspace(hz_to_mel(cfg.fmin_hz), hz_to_mel(fmax), cfg.n_mels + 2)
    return np.asarray(mel_to_hz(mel_pts[1:-1]), dtype=np.float64)


def log_mel_spectrogram(
    clip: AudioClip,
    cfg: MelConfig = MelConfig(),
    filterbank: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Log mel patch, shape (n_frames, n_mels); natural log of band power."""
    win = cfg.win_samples(clip.sample_rate)
    hop = cfg.hop_samples(clip.sample_rate)
    if len(clip.samples) < win:
        raise MelError(
            f"clip of {len(clip.samples)} samples shorter than the "
            f"{win}-sample analysis window"
        )
    n_frames = 1 + (len(clip.samples) - win) // hop
    n_fft = cfg.n_fft(clip.sample_rate)
    if filterbank is None:
        filterbank = mel_filterbank(cfg, clip.sample_rate)

    idx = np.arange(n_frames)[:, None] * hop + np.arange(win)[None, :]
    frames = clip.samples[idx] * np.hanning(win)
    spec = np.abs(np.fft.rfft(frames, n_fft, axis=1)) ** 2
    mel = spec @ filterbank.T
    return np.log(np.maximum(mel, LOG_FLOOR))


@dataclass(frozen=True)
class BandStats:
    """Per-band normalization statistics pooled over a training set."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, patches: list[np.ndarray]) -> "BandStats":
        if not patches:
            raise MelError("no patches to fit normalization statistics")
        stacked = np.concatenate(patches, axis=0)
        std = stacked.std(axis=0)
        return cls(mean=stacked.mean(axis=0), std=np.where(std > 1e-8, std, 1.0))

    def apply(self, patch: np.ndarray) -> np.ndarray:
        return (patch - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "BandStats":
        return cls(mean=np.asarray(doc["mean"]), std=np.asarray(doc["std"]))
