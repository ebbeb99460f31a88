"""Deterministic synthetic recordings with scripted bowel-sound events.

Each pattern is rendered with its defining temporal structure:

  SB   exponentially damped sinusoid, one amplitude lobe, 10-30 ms
  MB   2-6 damped bursts separated by short sub-floor gaps, 40-1500 ms total
  CRS  amplitude-modulated band-limited noise with the modulation trough
       kept well above the floor (no silent intervals), 200-4000 ms
  HS   stack of 3-4 harmonics of a common fundamental, 50-1500 ms

Events sit on a constant-envelope dither floor: a single 1 ms noise pattern
tiled for the whole recording. Because the tile repeats exactly once per
analysis frame, every pure-floor frame carries bit-identical features, the
median thresholds sit exactly at the floor level, and the strict onset
inequalities can never fire outside a scripted event. A "white" floor mode
(plain Gaussian noise) is available for statistics-oriented tests.

Spectral parameters (center frequencies, fundamentals, modulation rates)
are synthetic conventions chosen in the audible low band, not physiological
claims. Everything is reproducible from the script seed.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

from .audio import AudioClip, Recording
from .features import frame_len
from .labels import (
    PATTERN_SPECS,
    LabelTrack,
    PatternLabel,
    Segment,
    TrackSource,
)

MIN_EVENT_SPACING_S = 0.150
MIN_PEAK_SNR_DB = 20.0


class SynthError(Exception):
    pass


def _raised_cosine_edges(n: int, ramp: int) -> np.ndarray:
    env = np.ones(n)
    ramp = min(ramp, n // 2)
    if ramp > 0:
        r = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[:ramp] = r
        env[-ramp:] = r[::-1]
    return env


def _bandpass_noise(n: int, fs: int, lo_hz: float, hi_hz: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=n)
    spec = np.fft.rfft(noise)
    freqs = np.fft.rfftfreq(n, 1.0 / fs)
    spec[(freqs < lo_hz) | (freqs > hi_hz)] = 0.0
    return np.fft.irfft(spec, n)


def _check_duration(label: PatternLabel, duration_ms: float) -> None:
    spec = PATTERN_SPECS[label]
    if not (spec.min_ms <= duration_ms <= spec.max_ms):
        raise SynthError(
            f"{label.value} duration {duration_ms:.1f} ms outside "
            f"[{spec.min_ms:.0f}, {spec.max_ms:.0f}] ms"
        )


def event_duration_ms(label: PatternLabel, params: dict[str, Any]) -> float:
    """Nominal duration implied by the parameters, without rendering."""
    if label in (PatternLabel.SB, PatternLabel.CRS, PatternLabel.HS):
        return float(params["duration_ms"])
    if label == PatternLabel.MB:
        bursts = [float(b) for b in params["burst_ms"]]
        gaps = [float(g) for g in params["gap_ms"]]
        if len(gaps) != len(bursts) - 1:
            raise SynthError("MB needs exactly one gap between consecutive bursts")
        return sum(bursts) + sum(gaps)
    raise SynthError(f"cannot synthesize label {label.value}")


def synth_event(label: PatternLabel, params: dict[str, Any], fs: int) -> AudioClip:
    """Render one event at unit peak amplitude; duration follows the params.

    Noise-based patterns read params["seed"] (default 0) so that a given
    parameter set always renders identical samples.
    """
    duration_ms = event_duration_ms(label, params)
    _check_duration(label, duration_ms)
    n = int(round(duration_ms * fs / 1000.0))
    t = np.arange(n) / fs

    if label == PatternLabel.SB:
        freq = float(params.get("freq_hz", 400.0))
        if not (150.0 <= freq <= 800.0):
            raise SynthError(f"SB center frequency {freq} Hz outside [150, 800]")
        tau = (duration_ms / 1000.0) / 5.0
        x = np.sin(2 * np.pi * freq * t) * np.exp(-t / tau)
    elif label == PatternLabel.MB:
        bursts = [float(b) for b in params["burst_ms"]]
        gaps = [float(g) for g in params["gap_ms"]]
        if not (2 <= len(bursts) <= 6):
            raise SynthError(f"MB needs 2-6 bursts, got {len(bursts)}")
        for g in gaps:
            if not (30.0 <= g <= 200.0):
                raise SynthError(f"MB gap {g} ms outside [30, 200]")
        freq = float(params.get("freq_hz", 400.0))
        x = np.zeros(n)
        offset_ms = 0.0
        for k, burst_ms in enumerate(bursts):
            if not (10.0 <= burst_ms <= 30.0):
                raise SynthError(f"MB burst {burst_ms} ms outside [10, 30]")
            sub = synth_event(
                PatternLabel.SB,
                {"duration_ms": burst_ms, "freq_hz": freq},
                fs,
            ).samples
            i0 = int(round(offset_ms * fs / 1000.0))
            x[i0 : i0 + len(sub)] = sub[: max(0, n - i0)]
            offset_ms += burst_ms + (gaps[k] if k < len(gaps) else 0.0)
    elif label == PatternLabel.CRS:
        seed = int(params.get("seed", 0))
        lo, hi = params.get("band_hz", (100.0, 1000.0))
        hi = min(float(hi), 0.45 * fs)
        mod_rate = float(params.get("mod_rate_hz", 4.0))
        mod_depth = float(params.get("mod_depth", 0.5))
        if not (0.0 <= mod_depth <= 0.8):
            raise SynthError("CRS mod_depth must stay <= 0.8 (no silent intervals)")
        x = _bandpass_noise(n, fs, float(lo), hi, seed)
        env = 1.0 - mod_depth * (0.5 + 0.5 * np.sin(2 * np.pi * mod_rate * t))
        x *= env * _raised_cosine_edges(n, int(0.005 * fs))
    elif label == PatternLabel.HS:
        f0 = float(params.get("f0_hz", 120.0))
        n_harmonics = int(params.get("n_harmonics", 4))
        if not (80.0 <= f0 <= 300.0):
            raise SynthError(f"HS fundamental {f0} Hz outside [80, 300]")
        if n_harmonics not in (3, 4):
            raise SynthError("HS needs 3 or 4 harmonic components")
        if n_harmonics * f0 >= 0.5 * fs:
            raise SynthError(
                f"HS harmonics reach {n_harmonics * f0:.0f} Hz, above Nyquist for fs={fs}"
            )
        x = np.zeros(n)
        for k in range(1, n_harmonics + 1):
            x += np.sin(2 * np.pi * k * f0 * t) / k
        x *= _raised_cosine_edges(n, int(0.002 * fs))
    else:
        raise SynthError(f"cannot synthesize label {label.value}")

    peak = np.max(np.abs(x))
    if peak > 0:
        x = x / peak
    return AudioClip(x, fs)


@dataclass(frozen=True)
class ScriptEvent:
    label: PatternLabel
    t_start_s: float
    params: dict[str, Any] = field(default_factory=dict)

    @property
    def duration_s(self) -> float:
        return event_duration_ms(self.label, self.params) / 1000.0

    @property
    def t_end_s(self) -> float:
        return self.t_start_s + self.duration_s


@dataclass(frozen=True)
class SynthScript:
    """Blueprint of one synthetic channel: floor plus scripted events."""

    seed: int
    fs: int
    duration_s: float
    noise_floor_db: float = -60.0
    floor_mode: str = "periodic"  # periodic (constant-envelope dither) | white
    events: tuple[ScriptEvent, ...] = ()

    def __post_init__(self) -> None:
        if self.floor_mode not in ("periodic", "white"):
            raise SynthError(f"unknown floor mode {self.floor_mode!r}")
        if self.noise_floor_db >= 0:
            raise SynthError("noise_floor_db must be negative (dB rel full scale)")
        ordered = tuple(sorted(self.events, key=lambda e: e.t_start_s))
        for ev in ordered:
            _check_duration(ev.label, ev.duration_s * 1000.0)
            if ev.t_start_s < 0 or ev.t_end_s > self.duration_s:
                raise SynthError(
                    f"event at {ev.t_start_s:.3f}s falls outside the recording"
                )
        for a, b in zip(ordered, ordered[1:]):
            if b.t_start_s - a.t_end_s < MIN_EVENT_SPACING_S - 1e-9:
                raise SynthError(
                    f"events at {a.t_start_s:.3f}s and {b.t_start_s:.3f}s closer "
                    f"than {MIN_EVENT_SPACING_S * 1000:.0f} ms"
                )
        object.__setattr__(self, "events", ordered)

    def to_json(self) -> str:
        return json.dumps(
            {
                "v": 1,
                "seed": self.seed,
                "fs": self.fs,
                "duration_s": self.duration_s,
                "noise_floor_db": self.noise_floor_db,
                "floor_mode": self.floor_mode,
                "events": [
                    {
                        "label": ev.label.value,
                        "t_start_s": ev.t_start_s,
                        "params": ev.params,
                    }
                    for ev in self.events
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "SynthScript":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SynthError(f"bad script JSON: {exc}") from None
        try:
            events = tuple(
                ScriptEvent(
                    label=PatternLabel.parse(ev["label"]),
                    t_start_s=float(ev["t_start_s"]),
                    params=dict(ev.get("params", {})),
                )
                for ev in doc.get("events", [])
            )
            return cls(
                seed=int(doc["seed"]),
                fs=int(doc["fs"]),
                duration_s=float(doc["duration_s"]),
                noise_floor_db=float(doc.get("noise_floor_db", -60.0)),
                floor_mode=str(doc.get("floor_mode", "periodic")),
                events=events,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SynthError(f"bad script field: {exc}") from None


def render(script: SynthScript) -> tuple[Recording, LabelTrack]:
    """Render a script to audio plus its ground-truth label track.

    Bit-identical output for a given script. Every event is asserted to
    reach at least 20 dB peak SNR over the floor.
    """
    rng = np.random.default_rng(script.seed)
    fs = script.fs
    n_samples = int(round(script.duration_s * fs))
    floor_amp = 10.0 ** (script.noise_floor_db / 20.0)

    if script.floor_mode == "periodic":
        n = frame_len(fs)
        tile = rng.normal(size=n)
        tile *= floor_amp / math.sqrt(float(np.mean(tile * tile)))
        reps = n_samples // n + 1
        samples = np.tile(tile, reps)[:n_samples]
    else:
        samples = rng.normal(size=n_samples) * floor_amp

    segments = []
    for ev in script.events:
        params = dict(ev.params)
        if ev.label in (PatternLabel.CRS,) and "seed" not in params:
            params["seed"] = int(rng.integers(0, 2**31 - 1))
        clip = synth_event(ev.label, params, fs)
        snr_db = float(params.get("snr_db", 30.0))
        if snr_db < MIN_PEAK_SNR_DB:
            raise SynthError(
                f"event at {ev.t_start_s:.3f}s has peak SNR {snr_db} dB < "
                f"{MIN_PEAK_SNR_DB} dB"
            )
        peak_amp = floor_amp * 10.0 ** (snr_db / 20.0)
        i0 = int(round(ev.t_start_s * fs))
        samples[i0 : i0 + len(clip)] += clip.samples * peak_amp
        segments.append(Segment(ev.t_start_s, ev.t_end_s, ev.label))

    recording = Recording({"RUQ": AudioClip(samples, fs)})
    truth = LabelTrack(tuple(segments), source=TrackSource.MANUAL)
    return recording, truth


def _draw_params(
    label: PatternLabel, rng: np.random.Generator, max_gap_ms: float
) -> dict[str, Any]:
    if label == PatternLabel.SB:
        return {
            "duration_ms": float(rng.uniform(10.0, 30.0)),
            "freq_hz": float(rng.uniform(150.0, 800.0)),
        }
    if label == PatternLabel.MB:
        k = int(rng.integers(2, 7))
        return {
            "burst_ms": [float(rng.uniform(10.0, 30.0)) for _ in range(k)],
            "gap_ms": [float(rng.uniform(30.0, max_gap_ms)) for _ in range(k - 1)],
            "freq_hz": float(rng.uniform(150.0, 800.0)),
        }
    if label == PatternLabel.CRS:
        return {
            "duration_ms": float(rng.uniform(200.0, 2000.0)),
            "mod_rate_hz": float(rng.uniform(2.0, 6.0)),
            "mod_depth": float(rng.uniform(0.3, 0.6)),
            "seed": int(rng.integers(0, 2**31 - 1)),
        }
    if label == PatternLabel.HS:
        f0 = float(rng.uniform(80.0, 300.0))
        return {
            "duration_ms": float(rng.uniform(50.0, 800.0)),
            "f0_hz": f0,
            "n_harmonics": int(rng.integers(3, 5)),
        }
    raise SynthError(f"cannot draw params for {label.value}")


def make_script(
    seed: int,
    fs: int,
    counts: dict[PatternLabel, int],
    noise_floor_db: float = -60.0,
    snr_db_range: tuple[float, float] = (24.0, 36.0),
    spacing_s_range: tuple[float, float] = (0.18, 0.45),
    mb_max_gap_ms: float = 38.0,
    duration_s: Optional[float] = None,
) -> SynthScript:
    """Random script with the requested per-class event counts.

    Events are shuffled, placed sequentially with randomized spacing, and
    parameterized within the nominal pattern bounds. MB gaps default to the
    short end of the allowed range (<= 44 ms) so that a multi-burst reads
    as one sustained event on the detector's energy continuity criterion.
    """
    rng = np.random.default_rng(seed)
    order: list[PatternLabel] = []
    for label, k in counts.items():
        order.extend([label] * k)
    rng.shuffle(order)  # type: ignore[arg-type]

    events = []
    t = float(rng.uniform(*spacing_s_range))
    for label in order:
        params = _draw_params(label, rng, mb_max_gap_ms)
        params["snr_db"] = float(rng.uniform(*snr_db_range))
        ev = ScriptEvent(label=label, t_start_s=round(t, 3), params=params)
        events.append(ev)
        t = ev.t_end_s + float(rng.uniform(*spacing_s_range))

    total = t + 0.5 if duration_s is None else duration_s
    if events and total < events[-1].t_end_s + 0.1:
        raise SynthError(
            f"duration {total:.1f}s too short for the scripted events"
        )
    return SynthScript(
        seed=seed,
        fs=fs,
        duration_s=float(total),
        noise_floor_db=noise_floor_db,
        events=tuple(events),
    )


def healthy_cohort_counts(n_events: int) -> dict[PatternLabel, int]:
    """Event counts following the healthy-cohort class mix among events
    (SB:MB:CRS:HS = 43:5:2.9:0.1), with at least one event per class."""
    weights = {
        PatternLabel.SB: 43.0,
        PatternLabel.MB: 5.0,
        PatternLabel.CRS: 2.9,
        PatternLabel.HS: 0.1,
    }
    total_w = sum(weights.values())
    counts = {
        label: max(1, int(round(n_events * w / total_w)))
        for label, w in weights.items()
    }
    # adjust the dominant class so the total matches exactly
    diff = n_events - sum(counts.values())
    counts[PatternLabel.SB] += diff
    return counts
