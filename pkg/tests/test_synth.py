import json

import numpy as np
import pytest

from bowelsound.detect import detect_clip
from bowelsound.labels import PatternLabel, validate_durations
from bowelsound.synth import (
    ScriptEvent,
    SynthError,
    SynthScript,
    event_duration_ms,
    healthy_cohort_counts,
    make_script,
    render,
    synth_event,
)


def test_sb_exact_length_and_single_lobe():
    clip = synth_event(PatternLabel.SB, {"duration_ms": 20.0, "freq_hz": 400.0}, 8000)
    assert len(clip) == round(0.020 * 8000)
    # single decaying lobe on the 1 ms RMS envelope: once it falls below
    # 10% of its peak it never recovers
    env = np.sqrt(np.mean(clip.samples.reshape(-1, 8) ** 2, axis=1))
    active = env > 0.1 * env.max()
    transitions = np.sum(np.abs(np.diff(active.astype(int))))
    assert transitions <= 1  # one fall, no second rise


def test_hs_spectrum_peaks_at_harmonics():
    fs = 8000
    clip = synth_event(
        PatternLabel.HS, {"duration_ms": 800.0, "f0_hz": 100.0, "n_harmonics": 4}, fs
    )
    spec = np.abs(np.fft.rfft(clip.samples))
    freqs = np.fft.rfftfreq(len(clip.samples), 1.0 / fs)
    bin_hz = freqs[1]
    background = np.median(spec)
    for k in (1, 2, 3, 4):
        lo = np.searchsorted(freqs, k * 100.0 - 1.5 * bin_hz)
        hi = np.searchsorted(freqs, k * 100.0 + 1.5 * bin_hz)
        assert spec[lo:hi].max() > 100.0 * background  # peak within +-1 bin
    # no spurious peak of comparable size away from the harmonics
    mask = np.ones(len(spec), dtype=bool)
    for k in (1, 2, 3, 4):
        center = int(round(k * 100.0 / bin_hz))
        mask[max(0, center - 40) : center + 40] = False
    assert spec[mask].max() < 0.05 * spec.max()


def test_mb_internal_gaps():
    fs = 8000
    clip = synth_event(
        PatternLabel.MB,
        {"burst_ms": [20.0, 20.0, 20.0], "gap_ms": [50.0, 50.0], "freq_hz": 300.0},
        fs,
    )
    env = np.abs(clip.samples).reshape(-1, 8).max(axis=1)
    silent = env < 1e-9  # gaps are exact zeros before the floor is added
    runs = []
    count = 0
    for v in silent:
        count = count + 1 if v else 0
        runs.append(count)
    gap_ends = [
        i for i in range(1, len(runs) - 1) if runs[i] >= 30 and runs[i + 1] == 0
    ]
    assert len(gap_ends) == 2


def test_render_deterministic():
    script = make_script(seed=42, fs=8000, counts={PatternLabel.SB: 5, PatternLabel.MB: 2})
    rec_a, truth_a = render(script)
    rec_b, truth_b = render(script)
    assert np.array_equal(rec_a.channels["RUQ"].samples, rec_b.channels["RUQ"].samples)
    assert truth_a.segments == truth_b.segments


def test_pure_floor_yields_zero_events():
    script = SynthScript(seed=4, fs=8000, duration_s=5.0, events=())
    rec, truth = render(script)
    assert len(truth) == 0
    events, _ = detect_clip(rec.channels["RUQ"])
    assert events == []


def test_ground_truth_durations_valid():
    script = make_script(
        seed=10,
        fs=8000,
        counts={PatternLabel.SB: 20, PatternLabel.MB: 5, PatternLabel.CRS: 3, PatternLabel.HS: 2},
    )
    _, truth = render(script)
    assert validate_durations(truth) == []


def test_events_have_min_peak_snr():
    script = make_script(seed=10, fs=8000, counts={PatternLabel.SB: 10})
    rec, truth = render(script)
    floor_amp = 10.0 ** (script.noise_floor_db / 20.0)
    samples = rec.channels["RUQ"].samples
    fs = script.fs
    for seg in truth.segments:
        span = samples[int(seg.start_s * fs) : int(seg.end_s * fs)]
        snr_db = 20.0 * np.log10(np.max(np.abs(span)) / floor_amp)
        assert snr_db >= 20.0 - 1e-6


def test_low_snr_event_rejected():
    script = SynthScript(
        seed=1,
        fs=8000,
        duration_s=2.0,
        events=(ScriptEvent(PatternLabel.SB, 1.0, {"duration_ms": 20.0, "snr_db": 10.0}),),
    )
    with pytest.raises(SynthError, match="SNR"):
        render(script)


def test_script_rejects_overlap_and_close_spacing():
    with pytest.raises(SynthError, match="closer"):
        SynthScript(
            seed=1,
            fs=8000,
            duration_s=5.0,
            events=(
                ScriptEvent(PatternLabel.SB, 1.0, {"duration_ms": 20.0}),
                ScriptEvent(PatternLabel.SB, 1.05, {"duration_ms": 20.0}),
            ),
        )


def test_script_rejects_out_of_spec_duration():
    with pytest.raises(SynthError, match="outside"):
        SynthScript(
            seed=1,
            fs=8000,
            duration_s=5.0,
            events=(ScriptEvent(PatternLabel.SB, 1.0, {"duration_ms": 120.0}),),
        )


def test_script_json_round_trip():
    script = make_script(seed=3, fs=8000, counts={PatternLabel.SB: 3, PatternLabel.HS: 1})
    again = SynthScript.from_json(script.to_json())
    assert again == script


def test_script_json_rejects_garbage():
    with pytest.raises(SynthError):
        SynthScript.from_json("{not json")
    with pytest.raises(SynthError):
        SynthScript.from_json(json.dumps({"fs": 8000}))


def test_mb_duration_from_params():
    dur = event_duration_ms(
        PatternLabel.MB, {"burst_ms": [20.0, 20.0], "gap_ms": [40.0]}
    )
    assert dur == 80.0


def test_healthy_cohort_counts_sum_and_dominance():
    counts = healthy_cohort_counts(520)
    assert sum(counts.values()) == 520
    assert counts[PatternLabel.SB] > counts[PatternLabel.MB] > counts[PatternLabel.CRS]
    assert counts[PatternLabel.HS] >= 1


def test_white_floor_mode_renders():
    script = SynthScript(seed=2, fs=8000, duration_s=2.0, floor_mode="white", events=())
    rec, _ = render(script)
    samples = rec.channels["RUQ"].samples
    assert np.std(samples) > 0
