import numpy as np
import pytest

from bowelsound.audio import AudioClip
from bowelsound.mel import (
    BandStats,
    MelConfig,
    MelError,
    band_center_freqs,
    hz_to_mel,
    log_mel_spectrogram,
    mel_filterbank,
    mel_to_hz,
)


def test_patch_shape_formula():
    cfg = MelConfig()
    fs = 8000
    rng = np.random.default_rng(1)
    for len_ms in (25, 100, 305, 1000, 4100):
        clip = AudioClip(rng.normal(size=int(len_ms * fs / 1000)) * 0.1, fs)
        patch = log_mel_spectrogram(clip, cfg)
        expected_frames = 1 + (len_ms - 25) // 10
        assert patch.shape == (expected_frames, 128)


def test_too_short_clip_rejected():
    with pytest.raises(MelError):
        log_mel_spectrogram(AudioClip(np.zeros(100), 8000), MelConfig())


def test_mel_scale_round_trip():
    freqs = np.array([0.0, 100.0, 440.0, 3999.0])
    assert np.allclose(mel_to_hz(hz_to_mel(freqs)), freqs, atol=1e-9)


def test_filterbank_covers_all_bands():
    cfg = MelConfig()
    fb = mel_filterbank(cfg, 8000)
    assert fb.shape[0] == 128
    assert np.all(fb.sum(axis=1) > 0)  # no empty filters even at 8 kHz


def test_band_centers_monotone():
    centers = band_center_freqs(MelConfig(), 8000)
    assert len(centers) == 128
    assert np.all(np.diff(centers) > 0)


def test_per_band_normalization_statistics():
    rng = np.random.default_rng(7)
    cfg = MelConfig()
    patches = [
        log_mel_spectrogram(AudioClip(rng.normal(size=4000) * 0.2, 8000), cfg)
        for _ in range(20)
    ]
    stats = BandStats.fit(patches)
    normalized = np.concatenate([stats.apply(p) for p in patches], axis=0)
    assert np.all(np.abs(normalized.mean(axis=0)) < 1e-6)
    assert np.all(np.abs(normalized.std(axis=0) - 1.0) < 1e-6)


def test_band_stats_round_trip():
    stats = BandStats(mean=np.arange(4.0), std=np.ones(4))
    again = BandStats.from_dict(stats.to_dict())
    assert np.array_equal(again.mean, stats.mean)
    assert np.array_equal(again.std, stats.std)
