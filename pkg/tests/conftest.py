import numpy as np
import pytest

from bowelsound.audio import AudioClip
from bowelsound.labels import LabelTrack, PatternLabel, Segment
from bowelsound.synth import ScriptEvent, SynthScript, render


@pytest.fixture(scope="session")
def burst_fixture():
    """Floor plus one 20 ms damped burst at t = 1.000 s."""
    script = SynthScript(
        seed=7,
        fs=8000,
        duration_s=3.0,
        events=(
            ScriptEvent(
                PatternLabel.SB,
                1.0,
                {"duration_ms": 20.0, "freq_hz": 400.0, "snr_db": 30.0},
            ),
        ),
    )
    return render(script)


@pytest.fixture(scope="session")
def noise_clip():
    rng = np.random.default_rng(123)
    return AudioClip(rng.normal(size=8000 * 4) * 0.01, 8000)


def random_track(rng: np.random.Generator, n_max: int = 12) -> LabelTrack:
    """Random valid track with microsecond-grid times."""
    labels = list(PatternLabel)
    n = int(rng.integers(0, n_max + 1))
    segments = []
    t_us = int(rng.integers(0, 200_000))
    for _ in range(n):
        dur_us = int(rng.integers(5_000, 900_000))
        segments.append(
            Segment(
                t_us / 1e6,
                (t_us + dur_us) / 1e6,
                labels[int(rng.integers(0, len(labels)))],
            )
        )
        t_us += dur_us + int(rng.integers(0, 600_000))
    return LabelTrack(tuple(segments))
