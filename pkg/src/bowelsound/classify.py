"""Pattern classification backends for detected events.

Three interchangeable backends assign one of {SB, MB, CRS, HS} to an event:

  * rule: a deterministic decision tree over duration, amplitude-lobe
    structure, internal silent gaps, and harmonic spectral peaks;
  * spectral: a trainable multinomial linear model over pooled log-mel
    band statistics plus log-duration;
  * external: an out-of-process model reached over the line-JSON adapter
    protocol (see adapters), standing in for large pretrained networks.

Cohort-conditional model selection routes healthy/patient recordings to
their cohort-specific model and unknown cohorts to the combined one.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np
from scipy.signal import find_peaks

from .audio import AudioClip
from .detect import EventInterval
from .features import frame_len
from .labels import (
    EVENT_LABELS,
    LabelTrack,
    PatternLabel,
    Segment,
    TrackSource,
)
from .mel import BandStats, MelConfig, log_mel_spectrogram

ANALYSIS_WINDOW_S = 4.1  # CRS maximum plus margin; fixed-size mel patches


class ClassifyError(Exception):
    pass


@dataclass(frozen=True)
class ClassProbabilities:
    """Scores over the four event patterns; always a valid simplex."""

    probs: dict[PatternLabel, float]

    def __post_init__(self) -> None:
        if set(self.probs) != set(EVENT_LABELS):
            raise ClassifyError(
                f"probabilities must cover exactly {[l.value for l in EVENT_LABELS]}"
            )
        total = sum(self.probs.values())
        if abs(total - 1.0) > 1e-6:
            raise ClassifyError(f"probabilities sum to {total}, not 1")
        for label, p in self.probs.items():
            if not (-1e-9 <= p <= 1.0 + 1e-9):
                raise ClassifyError(f"probability {p} for {label.value} outside [0, 1]")

    @property
    def argmax(self) -> PatternLabel:
        # ties resolve in the fixed order SB < MB < CRS < HS
        best = EVENT_LABELS[0]
        for label in EVENT_LABELS[1:]:
            if self.probs[label] > self.probs[best]:
                best = label
        return best

    @property
    def confidence(self) -> float:
        return self.probs[self.argmax]

    @classmethod
    def winner(cls, label: PatternLabel, p: float = 0.7) -> "ClassProbabilities":
        rest = (1.0 - p) / (len(EVENT_LABELS) - 1)
        return cls({l: (p if l is label else rest) for l in EVENT_LABELS})

    @classmethod
    def from_scores(cls, scores: dict[str, float]) -> "ClassProbabilities":
        return cls({PatternLabel.parse(k): float(v) for k, v in scores.items()})


class Backend(Protocol):
    def classify(self, clip: AudioClip, interval: EventInterval) -> ClassProbabilities: ...


# ---------------------------------------------------------------------------
# rule-based classifier

DURATION_CENTROIDS_MS = {
    PatternLabel.SB: 20.0,
    PatternLabel.MB: 770.0,
    PatternLabel.CRS: 2100.0,
    PatternLabel.HS: 775.0,
}

GAP_MIN_MS = 10.0  # silent gap that separates amplitude lobes
LOBE_LEVEL = 0.1  # envelope fraction of peak counting as active
HARMONIC_WIN_MS = 50.0
HARMONIC_F0_RANGE = (60.0, 350.0)
HARMONIC_CONCENTRATION = 0.6  # comb power fraction of total window power


def _envelope_runs(env: np.ndarray) -> tuple[int, list[int]]:
    """Number of active lobes and the lengths (frames) of internal gaps."""
    active = env > LOBE_LEVEL * float(np.max(env))
    lobes = 0
    gaps: list[int] = []
    run_start = None
    last_active_end = None
    for i, a in enumerate(active):
        if a and run_start is None:
            run_start = i
            if lobes > 0 and last_active_end is not None:
                gaps.append(i - last_active_end)
            lobes += 1
        elif not a and run_start is not None:
            last_active_end = i
            run_start = None
    return lobes, gaps


def _harmonic_windows(x: np.ndarray, fs: int) -> list[bool]:
    """Per 50 ms window (25 ms hop): is the power concentrated on >= 3
    near-integer multiples of one fundamental?

    Noise bands also show spectral peaks, so peak positions alone are not
    discriminative; a harmonic stack is recognized by its comb of teeth
    capturing the bulk of the window's power.
    """
    win = int(round(HARMONIC_WIN_MS * fs / 1000.0))
    hop = win // 2
    if len(x) < win:
        return []
    n_fft = 4 * (1 << int(np.ceil(np.log2(win))))
    freqs = np.fft.rfftfreq(n_fft, 1.0 / fs)
    hann = np.hanning(win)
    flags = []
    for start in range(0, len(x) - win + 1, hop):
        spec = np.abs(np.fft.rfft(x[start : start + win] * hann, n_fft))
        flags.append(_has_harmonic_stack(spec * spec, freqs, mainlobe_hz=fs / win))
    return flags


def _comb_teeth_power(
    power: np.ndarray, freqs: np.ndarray, f0: float, mainlobe_hz: float, max_order: int = 6
) -> list[float]:
    teeth = []
    for k in range(1, max_order + 1):
        center = k * f0
        if center >= freqs[-1]:
            break
        # tooth covers the analysis window's mainlobe around the line,
        # capped so neighboring teeth cannot touch
        tol = min(mainlobe_hz, 0.45 * f0)
        lo = np.searchsorted(freqs, center - tol)
        hi = np.searchsorted(freqs, center + tol)
        teeth.append(float(power[lo:hi].sum()))
    return teeth


def _has_harmonic_stack(power: np.ndarray, freqs: np.ndarray, mainlobe_hz: float) -> bool:
    total = float(power.sum())
    if total <= 0:
        return False
    lo, hi = HARMONIC_F0_RANGE
    band = (freqs >= lo) & (freqs <= hi)
    band_power = np.where(band, power, 0.0)
    candidates = set()
    peak_indices, _ = find_peaks(band_power, height=0.01 * power.max())
    order = np.argsort(power[peak_indices])[::-1][:4]
    for idx in np.asarray(peak_indices)[order]:
        candidates.add(float(freqs[idx]))
    top = float(freqs[int(np.argmax(power))])
    for k in (1, 2, 3, 4):
        if lo <= top / k <= hi:
            candidates.add(top / k)
    for f0 in candidates:
        teeth = _comb_teeth_power(power, freqs, f0, mainlobe_hz)
        if not teeth:
            continue
        comb = sum(teeth)
        strongest = max(teeth)
        strong_teeth = sum(1 for t in teeth if t >= 0.02 * strongest)
        if comb / total >= HARMONIC_CONCENTRATION and strong_teeth >= 3:
            return True
    return False


def rule_classify(clip: AudioClip, interval: EventInterval) -> ClassProbabilities:
    """Deterministic decision tree over the event's structure.

    Order: harmonic stack sustained >= 50 ms -> HS; short single-lobe
    (< 40 ms) -> SB; >= 2 lobes separated by >= 10 ms silent gaps -> MB;
    long (>= 200 ms) with no gaps -> CRS; otherwise the nearest duration
    centroid. The winner receives probability 0.7, the rest split 0.3.
    """
    n = frame_len(clip.sample_rate)
    event = clip.slice(interval.start_s, min(interval.end_s, clip.duration_s))
    n_frames = len(event.samples) // n
    if n_frames < 2:
        raise ClassifyError(
            f"interval [{interval.start_s}, {interval.end_s}] spans "
            f"{n_frames} frames; need at least 2"
        )
    duration_ms = interval.duration_s * 1000.0

    framed = event.samples[: n_frames * n].reshape(n_frames, n)
    env = np.sqrt(np.mean(framed * framed, axis=1))
    lobes, gap_frames = _envelope_runs(env)
    silent_gaps = sum(1 for g in gap_frames if g >= GAP_MIN_MS)

    if duration_ms >= HARMONIC_WIN_MS and any(_harmonic_windows(event.samples, clip.sample_rate)):
        return ClassProbabilities.winner(PatternLabel.HS)
    if duration_ms < 40.0 and lobes == 1:
        return ClassProbabilities.winner(PatternLabel.SB)
    if silent_gaps >= 1 and lobes >= 2:
        return ClassProbabilities.winner(PatternLabel.MB)
    if duration_ms >= 200.0 and silent_gaps == 0:
        return ClassProbabilities.winner(PatternLabel.CRS)

    nearest = min(
        EVENT_LABELS,
        key=lambda l: (abs(duration_ms - DURATION_CENTROIDS_MS[l]), EVENT_LABELS.index(l)),
    )
    return ClassProbabilities.winner(nearest)


class RuleBackend:
    def classify(self, clip: AudioClip, interval: EventInterval) -> ClassProbabilities:
        return rule_classify(clip, interval)


# ---------------------------------------------------------------------------
# trainable spectral classifier

def _analysis_slice(clip: AudioClip, start_s: float, end_s: float) -> AudioClip:
    """Event samples padded/truncated right to the fixed analysis window."""
    target = int(round(ANALYSIS_WINDOW_S * clip.sample_rate))
    piece = clip.slice(max(0.0, start_s), min(end_s, clip.duration_s)).samples
    if len(piece) >= target:
        out = piece[:target]
    else:
        out = np.concatenate([piece, np.zeros(target - len(piece))])
    return AudioClip(out, clip.sample_rate)


def _pooled_features(patch: np.ndarray, duration_s: float) -> np.ndarray:
    return np.concatenate(
        [patch.mean(axis=0), patch.std(axis=0), [math.log(max(duration_s, 1e-4))]]
    )


@dataclass
class SpectralModel:
    """Multinomial linear classifier over pooled normalized log-mel stats."""

    cohort: str
    mel: MelConfig
    band_stats: BandStats
    feat_mean: np.ndarray
    feat_std: np.ndarray
    weights: np.ndarray  # (n_classes, n_features + 1), bias last
    val_accuracy: float
    seed: int

    @property
    def model_id(self) -> str:
        return f"spectral-{self.cohort}-{self.weights_hash()[:12]}"

    def weights_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.weights).tobytes())
        h.update(json.dumps(self.mel.to_dict(), sort_keys=True).encode())
        return h.hexdigest()

    def _features(self, clip: AudioClip, start_s: float, end_s: float) -> np.ndarray:
        piece = _analysis_slice(clip, start_s, end_s)
        patch = self.band_stats.apply(log_mel_spectrogram(piece, self.mel))
        feats = _pooled_features(patch, end_s - start_s)
        return (feats - self.feat_mean) / self.feat_std

    def classify(self, clip: AudioClip, interval: EventInterval) -> ClassProbabilities:
        z = self._features(clip, interval.start_s, interval.end_s)
        logits = self.weights[:, :-1] @ z + self.weights[:, -1]
        logits -= logits.max()
        expd = np.exp(logits)
        probs = expd / expd.sum()
        return ClassProbabilities(
            {label: float(p) for label, p in zip(EVENT_LABELS, probs)}
        )

    def save(self, path: str | Path) -> None:
        doc = {
            "v": 1,
            "kind": "spectral-linear",
            "model_id": self.model_id,
            "cohort": self.cohort,
            "seed": self.seed,
            "mel": self.mel.to_dict(),
            "band_stats": self.band_stats.to_dict(),
            "feat_mean": self.feat_mean.tolist(),
            "feat_std": self.feat_std.tolist(),
            "weights": self.weights.tolist(),
            "val_accuracy": self.val_accuracy,
            "labels": [l.value for l in EVENT_LABELS],
        }
        Path(path).write_text(json.dumps(doc))

    @classmethod
    def load(cls, path: str | Path) -> "SpectralModel":
        doc = json.loads(Path(path).read_text())
        if doc.get("kind") != "spectral-linear" or doc.get("v") != 1:
            raise ClassifyError(f"{path}: not a v1 spectral-linear model file")
        return cls(
            cohort=doc["cohort"],
            mel=MelConfig.from_dict(doc["mel"]),
            band_stats=BandStats.from_dict(doc["band_stats"]),
            feat_mean=np.asarray(doc["feat_mean"]),
            feat_std=np.asarray(doc["feat_std"]),
            weights=np.asarray(doc["weights"]),
            val_accuracy=float(doc["val_accuracy"]),
            seed=int(doc.get("seed", 0)),
        )


def _subject_split(
    n_subjects: int, seed: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic subject-level 70/15/15 split."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(n_subjects)
    n_train = max(1, int(round(0.70 * n_subjects)))
    n_val = max(1, int(round(0.15 * n_subjects))) if n_subjects > 2 else 0
    n_train = min(n_train, n_subjects - min(2, n_subjects - n_train))
    train = order[:n_train]
    val = order[n_train : n_train + n_val]
    test = order[n_train + n_val :]
    return train, val, test


def train_spectral(
    corpus: Sequence[tuple[AudioClip, LabelTrack]],
    cohort: str = "unknown",
    mel: MelConfig = MelConfig(),
    seed: int = 0,
    iters: int = 400,
    lr: float = 0.5,
    l2: float = 1e-4,
) -> tuple[SpectralModel, dict]:
    """Train the linear spectral classifier with a subject-level split.

    Each corpus item is one subject's (audio, labels). Returns the model and
    a summary dict with split sizes, validation and test accuracy. Training
    is fully deterministic for a given seed and corpus.
    """
    if not corpus:
        raise ClassifyError("empty corpus")
    per_subject: list[list[tuple[AudioClip, Segment]]] = []
    for clip, track in corpus:
        items = [(clip, seg) for seg in track.events()]
        per_subject.append(items)
    labels_present = {seg.label for items in per_subject for _, seg in items}
    if len(labels_present) < 2:
        raise ClassifyError(
            f"corpus has a single class ({', '.join(l.value for l in labels_present) or 'none'}); "
            "need at least two"
        )

    train_idx, val_idx, test_idx = _subject_split(len(per_subject), seed)

    def collect(indices: np.ndarray) -> list[tuple[AudioClip, Segment]]:
        out: list[tuple[AudioClip, Segment]] = []
        for i in indices:
            out.extend(per_subject[i])
        return out

    train_items = collect(train_idx)
    if not train_items:
        raise ClassifyError("training split is empty")

    def patches(items):
        return [
            log_mel_spectrogram(_analysis_slice(clip, seg.start_s, seg.end_s), mel)
            for clip, seg in items
        ]

    train_patches = patches(train_items)
    band_stats = BandStats.fit(train_patches)

    def featurize(items, raw_patches=None):
        raw_patches = raw_patches if raw_patches is not None else patches(items)
        feats = np.stack(
            [
                _pooled_features(band_stats.apply(p), seg.duration_s)
                for p, (_, seg) in zip(raw_patches, items)
            ]
        )
        y = np.array([EVENT_LABELS.index(seg.label) for _, seg in items])
        return feats, y

    x_train, y_train = featurize(train_items, train_patches)
    feat_mean = x_train.mean(axis=0)
    feat_std = x_train.std(axis=0)
    feat_std = np.where(feat_std > 1e-8, feat_std, 1.0)
    z_train = (x_train - feat_mean) / feat_std

    n_classes = len(EVENT_LABELS)
    w = np.zeros((n_classes, z_train.shape[1] + 1))
    onehot = np.eye(n_classes)[y_train]
    zb = np.concatenate([z_train, np.ones((len(z_train), 1))], axis=1)
    for _ in range(iters):
        logits = zb @ w.T
        logits -= logits.max(axis=1, keepdims=True)
        expd = np.exp(logits)
        probs = expd / expd.sum(axis=1, keepdims=True)
        grad = (probs - onehot).T @ zb / len(zb) + l2 * w
        w -= lr * grad

    model = SpectralModel(
        cohort=cohort,
        mel=mel,
        band_stats=band_stats,
        feat_mean=feat_mean,
        feat_std=feat_std,
        weights=w,
        val_accuracy=0.0,
        seed=seed,
    )

    def accuracy(items) -> Optional[float]:
        if not items:
            return None
        correct = 0
        for clip, seg in items:
            probs = model.classify(
                clip, EventInterval(seg.start_s, seg.end_s, 0.0, 1)
            )
            correct += probs.argmax is seg.label
        return correct / len(items)

    val_acc = accuracy(collect(val_idx))
    test_acc = accuracy(collect(test_idx))
    model.val_accuracy = val_acc if val_acc is not None else float("nan")
    summary = {
        "model_id": model.model_id,
        "n_subjects": len(per_subject),
        "split": {
            "train": len(train_idx),
            "val": len(val_idx),
            "test": len(test_idx),
        },
        "n_train_events": len(train_items),
        "val_accuracy": val_acc,
        "test_accuracy": test_acc,
    }
    return model, summary


# ---------------------------------------------------------------------------
# cohort routing and track-level classification

@dataclass(frozen=True)
class CohortModelSelector:
    """Total mapping cohort -> model id; unknown cohorts use the combined model."""

    healthy: str = "rule"
    patient: str = "rule"
    combined: str = "rule"

    def resolve(self, cohort: str) -> str:
        if cohort == "healthy":
            return self.healthy
        if cohort == "patient":
            return self.patient
        return self.combined

    def to_dict(self) -> dict:
        return {"healthy": self.healthy, "patient": self.patient, "combined": self.combined}

    @classmethod
    def from_dict(cls, doc: dict) -> "CohortModelSelector":
        return cls(
            healthy=doc.get("healthy", "rule"),
            patient=doc.get("patient", "rule"),
            combined=doc.get("combined", "rule"),
        )


class ExternalBackend:
    """Adapter-backed classification with optional local fallback."""

    def __init__(self, adapter, fallback: Optional[Backend] = None):
        self.adapter = adapter
        self.fallback = fallback

    def classify(self, clip: AudioClip, interval: EventInterval) -> ClassProbabilities:
        from .adapters import AdapterError

        piece = clip.slice(interval.start_s, min(interval.end_s, clip.duration_s))
        try:
            return self.adapter.classify(piece)
        except AdapterError:
            if self.fallback is None:
                raise
            return self.fallback.classify(clip, interval)


def classify_track(
    clip: AudioClip,
    events: Sequence[EventInterval],
    backend: Backend,
    source: TrackSource = TrackSource.AUTO,
) -> tuple[LabelTrack, dict[int, str]]:
    """Classify each event into a labeled segment with confidence = max prob.

    A backend failure on one event is recorded in the returned error map and
    leaves the remaining events intact.
    """
    segments = []
    errors: dict[int, str] = {}
    for i, ev in enumerate(events):
        try:
            probs = backend.classify(clip, ev)
        except ClassifyError as exc:
            errors[i] = str(exc)
            continue
        segments.append(
            Segment(ev.start_s, ev.end_s, probs.argmax, confidence=probs.confidence)
        )
    return LabelTrack(tuple(segments), source=source), errors
