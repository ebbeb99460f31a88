"""Bowel-sound analysis toolkit: detection, classification, reporting, review."""

__version__ = "0.1.0"

from .audio import AudioClip, Recording, load_wav, write_wav
from .detect import DetectorConfig, EventInterval, detect_clip, detect_events, detect_recording
from .features import (
    FrameFeatureTrack,
    ProfileConfig,
    ThresholdSet,
    analyze_clip,
    frame_features,
    normalize,
    thresholds,
)
from .labels import (
    LabelTrack,
    PatternLabel,
    Segment,
    TrackSource,
    parse_label_track,
    validate_durations,
    write_label_track,
)

__all__ = [
    "AudioClip",
    "Recording",
    "load_wav",
    "write_wav",
    "DetectorConfig",
    "EventInterval",
    "detect_clip",
    "detect_events",
    "detect_recording",
    "FrameFeatureTrack",
    "ProfileConfig",
    "ThresholdSet",
    "analyze_clip",
    "frame_features",
    "normalize",
    "thresholds",
    "LabelTrack",
    "PatternLabel",
    "Segment",
    "TrackSource",
    "parse_label_track",
    "validate_durations",
    "write_label_track",
    "__version__",
]
