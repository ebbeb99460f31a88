"""End-to-end annotation pipeline: detect -> classify -> refine per channel."""

from __future__ import annotations

import hashlib
import json
import shlex
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .audio import Recording
from .classify import (
    Backend,
    CohortModelSelector,
    ExternalBackend,
    RuleBackend,
    SpectralModel,
    classify_track,
)
from .detect import DetectorConfig, detect_recording
from .features import ProfileConfig
from .labels import LabelTrack, TrackSource
from .mel import MelConfig
from .postproc import PostprocConfig, refine


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    detector: DetectorConfig = DetectorConfig()
    postproc: PostprocConfig = PostprocConfig()
    profile: ProfileConfig = ProfileConfig()
    mel: MelConfig = MelConfig()
    backend: str = "rule"  # rule | spectral | external
    adapter: Optional[str] = None  # host:port or cmd:<command line>
    models_dir: Optional[str] = None
    selector: CohortModelSelector = CohortModelSelector()
    cohort: str = "unknown"  # healthy | patient | unknown -> combined model
    pool_thresholds: bool = False
    fallback_to_rule: bool = True

    def __post_init__(self) -> None:
        if self.backend not in ("rule", "spectral", "external"):
            raise PipelineError(f"unknown backend {self.backend!r}")
        if self.cohort not in ("healthy", "patient", "unknown"):
            raise PipelineError(f"unknown cohort {self.cohort!r}")

    def to_dict(self) -> dict:
        return {
            "v": 1,
            "detector": {
                "min_event_ms": self.detector.min_event_ms,
                "hangover_frames": self.detector.hangover_frames,
            },
            "postproc": {
                "gap_fill_min_ms": self.postproc.gap_fill_min_ms,
                "merge_max_gap_ms": self.postproc.merge_max_gap_ms,
            },
            "profile": {
                "win_ms": self.profile.win_ms,
                "smooth_frames": self.profile.smooth_frames,
                "db_floor": self.profile.db_floor,
            },
            "mel": self.mel.to_dict(),
            "backend": self.backend,
            "adapter": self.adapter,
            "models_dir": self.models_dir,
            "selector": self.selector.to_dict(),
            "cohort": self.cohort,
            "pool_thresholds": self.pool_thresholds,
            "fallback_to_rule": self.fallback_to_rule,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        det = doc.get("detector", {})
        post = doc.get("postproc", {})
        prof = doc.get("profile", {})
        return cls(
            detector=DetectorConfig(
                min_event_ms=int(det.get("min_event_ms", 5)),
                hangover_frames=int(det.get("hangover_frames", 3)),
            ),
            postproc=PostprocConfig(
                gap_fill_min_ms=float(post.get("gap_fill_min_ms", 100.0)),
                merge_max_gap_ms=float(post.get("merge_max_gap_ms", 0.0)),
            ),
            profile=ProfileConfig(
                win_ms=float(prof.get("win_ms", 25.0)),
                smooth_frames=int(prof.get("smooth_frames", 15)),
                db_floor=float(prof.get("db_floor", -100.0)),
            ),
            mel=MelConfig.from_dict(doc.get("mel", {})),
            backend=doc.get("backend", "rule"),
            adapter=doc.get("adapter"),
            models_dir=doc.get("models_dir"),
            selector=CohortModelSelector.from_dict(doc.get("selector", {})),
            cohort=doc.get("cohort", "unknown"),
            pool_thresholds=bool(doc.get("pool_thresholds", False)),
            fallback_to_rule=bool(doc.get("fallback_to_rule", True)),
        )

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode()).hexdigest()


def build_backend(cfg: PipelineConfig) -> Backend:
    """Instantiate the classification backend the config asks for.

    For the spectral backend the cohort-conditional selector picks the
    model id (unknown cohort routes to the combined model)."""
    if cfg.backend == "rule":
        return RuleBackend()
    if cfg.backend == "spectral":
        model_id = cfg.selector.resolve(cfg.cohort)
        if cfg.models_dir is None:
            raise PipelineError("spectral backend needs models_dir")
        path = Path(cfg.models_dir) / f"{model_id}.json"
        if not path.exists():
            raise PipelineError(f"model file not found: {path}")
        return SpectralModel.load(path)
    # external
    from .adapters import ExternalAdapter

    if not cfg.adapter:
        raise PipelineError("external backend needs an adapter address")
    if cfg.adapter.startswith("cmd:"):
        adapter = ExternalAdapter.spawn(shlex.split(cfg.adapter[4:]))
    else:
        adapter = ExternalAdapter.connect(cfg.adapter)
    fallback = RuleBackend() if cfg.fallback_to_rule else None
    return ExternalBackend(adapter, fallback=fallback)


@dataclass
class AnnotateResult:
    tracks: dict[str, LabelTrack] = field(default_factory=dict)
    failures: dict[str, str] = field(default_factory=dict)
    event_counts: dict[str, int] = field(default_factory=dict)
    classify_errors: dict[str, dict[int, str]] = field(default_factory=dict)


def annotate_recording(
    rec: Recording,
    cfg: PipelineConfig = PipelineConfig(),
    backend: Optional[Backend] = None,
    jobs: int = 1,
) -> AnnotateResult:
    """Detect, classify, and refine every channel of a recording.

    Channel failures (e.g. a digitally silent channel) are reported in
    ``failures`` without affecting the other channels.
    """
    if backend is None:
        backend = build_backend(cfg)
    detection = detect_recording(
        rec,
        cfg.detector,
        cfg.profile,
        pool_thresholds=cfg.pool_thresholds,
        jobs=jobs,
    )
    result = AnnotateResult(failures=dict(detection.failures))

    def finish_channel(name: str) -> tuple[str, LabelTrack, dict[int, str], int]:
        clip = rec.channels[name]
        events = detection.events[name]
        raw_track, errors = classify_track(clip, events, backend, source=TrackSource.AUTO)
        refined = refine(raw_track, clip.duration_s, cfg.postproc)
        return name, refined, errors, len(events)

    names = list(detection.events)
    if jobs > 1 and len(names) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(finish_channel, names))
    else:
        outcomes = [finish_channel(name) for name in names]
    for name, track, errors, n_events in outcomes:
        result.tracks[name] = track
        result.event_counts[name] = n_events
        if errors:
            result.classify_errors[name] = errors
    return result
