"""Audio containers and RIFF/WAV I/O for multichannel abdominal recordings.

Channels map positionally onto the four abdominal quadrants
(RUQ, LUQ, RLQ, LLQ). Every channel is analyzed as an independent mono
pipeline; there is no resampling stage, all downstream math is expressed
per 1 ms frame and derives frame length from the sample rate.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import numpy as np

QUADRANTS = ("RUQ", "LUQ", "RLQ", "LLQ")

MIN_SAMPLE_RATE = 2000  # 1 ms frames need at least 2 samples


class AudioIOError(Exception):
    """Base class for audio file problems."""


class CorruptHeaderError(AudioIOError):
    """The RIFF/WAVE structure is damaged or truncated."""


class UnsupportedEncodingError(AudioIOError):
    """The file is valid WAV but not PCM16 or IEEE float32."""


class EmptyAudioError(AudioIOError):
    """The file contains zero audio frames."""


@dataclass(frozen=True)
class AudioClip:
    """Mono waveform with its sample rate.

    Samples loaded from files are normalized to [-1, 1]; the range is
    enforced at the file I/O boundary rather than here so that analysis
    code may operate on rescaled copies (e.g. gain-invariance checks).
    """

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError("AudioClip samples must be 1-D")
        if not np.all(np.isfinite(samples)):
            raise ValueError("AudioClip samples must be finite")
        if int(self.sample_rate) < MIN_SAMPLE_RATE:
            raise ValueError(
                f"sample rate {self.sample_rate} below minimum {MIN_SAMPLE_RATE} Hz"
            )
        samples.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.sample_rate

    def slice(self, start_s: float, end_s: float) -> "AudioClip":
        """Samples in [floor(start_s*fs), floor(end_s*fs)); rate preserved."""
        if not (0.0 <= start_s < end_s <= self.duration_s + 1e-12):
            raise ValueError(
                f"slice bounds [{start_s}, {end_s}] outside [0, {self.duration_s}]"
            )
        lo = int(np.floor(start_s * self.sample_rate))
        hi = int(np.floor(end_s * self.sample_rate))
        return AudioClip(self.samples[lo:hi], self.sample_rate)

    def scaled(self, gain: float) -> "AudioClip":
        return AudioClip(self.samples * gain, self.sample_rate)


@dataclass(frozen=True)
class SubjectMeta:
    cohort: str = "unknown"  # healthy | patient | unknown
    subject_id: str = ""

    def __post_init__(self) -> None:
        if self.cohort not in ("healthy", "patient", "unknown"):
            raise ValueError(f"unknown cohort {self.cohort!r}")


@dataclass(frozen=True)
class Recording:
    """One or more quadrant channels sharing a sample rate."""

    channels: Mapping[str, AudioClip]
    subject_meta: Optional[SubjectMeta] = None

    def __post_init__(self) -> None:
        if not self.channels:
            raise ValueError("Recording needs at least one channel")
        rates = {clip.sample_rate for clip in self.channels.values()}
        if len(rates) != 1:
            raise ValueError(f"channels disagree on sample rate: {sorted(rates)}")
        object.__setattr__(self, "channels", dict(self.channels))

    @property
    def sample_rate(self) -> int:
        return next(iter(self.channels.values())).sample_rate


def _read_exact(fh, n: int, what: str) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CorruptHeaderError(f"truncated file while reading {what}")
    return data


def load_wav(path: str | Path) -> Recording:
    """Load a PCM16 or float32 WAV file of 1-4 channels.

    Integer samples are rescaled to [-1, 1] by the full-scale magnitude
    (32768 for 16-bit). Channel k maps to the k-th quadrant in the order
    RUQ, LUQ, RLQ, LLQ.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        riff = fh.read(12)
        if len(riff) < 12 or riff[:4] != b"RIFF" or riff[8:12] != b"WAVE":
            raise CorruptHeaderError(f"{path}: not a RIFF/WAVE file")

        fmt: Optional[tuple] = None
        data: Optional[bytes] = None
        while True:
            header = fh.read(8)
            if len(header) == 0:
                break
            if len(header) < 8:
                raise CorruptHeaderError(f"{path}: truncated chunk header")
            chunk_id, size = header[:4], struct.unpack("<I", header[4:])[0]
            if chunk_id == b"fmt ":
                body = _read_exact(fh, size, "fmt chunk")
                if size < 16:
                    raise CorruptHeaderError(f"{path}: fmt chunk too short")
                fmt = struct.unpack("<HHIIHH", body[:16])
            elif chunk_id == b"data":
                data = _read_exact(fh, size, "data chunk")
            else:
                fh.seek(size, 1)
            if size & 1:  # chunks are word-aligned with a pad byte
                fh.seek(1, 1)

        if fmt is None or data is None:
            raise CorruptHeaderError(f"{path}: missing fmt or data chunk")

    audio_format, n_channels, sample_rate, _, _, bits = fmt
    if n_channels < 1 or n_channels > 4:
        raise UnsupportedEncodingError(f"{path}: {n_channels} channels (need 1-4)")

    if audio_format == 1 and bits == 16:
        raw = np.frombuffer(data, dtype="<i2")
        samples = raw.astype(np.float64) / 32768.0
    elif audio_format == 3 and bits == 32:
        samples = np.frombuffer(data, dtype="<f4").astype(np.float64)
        if samples.size and np.max(np.abs(samples)) > 1.0 + 1e-6:
            raise UnsupportedEncodingError(
                f"{path}: float samples exceed full scale [-1, 1]"
            )
        samples = np.clip(samples, -1.0, 1.0)
    else:
        raise UnsupportedEncodingError(
            f"{path}: format code {audio_format} at {bits}-bit not supported "
            "(PCM16 or float32 only)"
        )

    if samples.size == 0 or samples.size < n_channels:
        raise EmptyAudioError(f"{path}: zero-length audio data")
    frames = samples.size // n_channels
    deinterleaved = samples[: frames * n_channels].reshape(frames, n_channels)

    channels = {
        QUADRANTS[k]: AudioClip(np.ascontiguousarray(deinterleaved[:, k]), sample_rate)
        for k in range(n_channels)
    }
    return Recording(channels)


def write_wav(
    path: str | Path,
    recording: Recording,
    encoding: str = "pcm16",
    channel_order: Optional[tuple[str, ...]] = None,
) -> None:
    """Write a Recording as PCM16 or float32 WAV, quadrant order preserved."""
    if channel_order is None:
        channel_order = tuple(
            q for q in QUADRANTS if q in recording.channels
        ) or tuple(recording.channels)
    clips = [recording.channels[name] for name in channel_order]
    lengths = {len(c) for c in clips}
    if len(lengths) != 1:
        raise ValueError("channels must share length to interleave")
    stacked = np.stack([c.samples for c in clips], axis=1)
    if np.max(np.abs(stacked), initial=0.0) > 1.0 + 1e-9:
        raise ValueError("samples outside [-1, 1]; rescale before writing")

    if encoding == "pcm16":
        payload = np.clip(np.round(stacked * 32768.0), -32768, 32767).astype("<i2")
        audio_format, bits = 1, 16
    elif encoding == "float32":
        payload = stacked.astype("<f4")
        audio_format, bits = 3, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    raw = payload.tobytes()
    n_channels = stacked.shape[1]
    fs = clips[0].sample_rate
    block_align = n_channels * bits // 8
    header = b"".join(
        [
            b"RIFF",
            struct.pack("<I", 36 + len(raw)),
            b"WAVE",
            b"fmt ",
            struct.pack(
                "<IHHIIHH", 16, audio_format, n_channels, fs, fs * block_align,
                block_align, bits,
            ),
            b"data",
            struct.pack("<I", len(raw)),
        ]
    )
    Path(path).write_bytes(header + raw)


def write_wav_bytes(clip: AudioClip, encoding: str = "pcm16") -> bytes:
    """Single-channel WAV file content as bytes (for serving audio slices)."""
    import io

    tmp = io.BytesIO()
    if encoding == "pcm16":
        payload = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype("<i2")
        audio_format, bits = 1, 16
    elif encoding == "float32":
        payload = clip.samples.astype("<f4")
        audio_format, bits = 3, 32
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    raw = payload.tobytes()
    fs = clip.sample_rate
    block_align = bits // 8
    tmp.write(b"RIFF")
    tmp.write(struct.pack("<I", 36 + len(raw)))
    tmp.write(b"WAVE")
    tmp.write(b"fmt ")
    tmp.write(struct.pack("<IHHIIHH", 16, audio_format, 1, fs, fs * block_align, block_align, bits))
    tmp.write(b"data")
    tmp.write(struct.pack("<I", len(raw)))
    tmp.write(raw)
    return tmp.getvalue()
