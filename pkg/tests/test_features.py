import numpy as np
import pytest

from oracles import naive_deltas, naive_mel_energies
from shona_asr.audio import AudioBuffer
from shona_asr.errors import DataError
from shona_asr.features import (FeatureMatrix, MelConfig, compute_deltas, compute_mfcc,
                                extract_features, frame_count, mel_spectrogram, stack_features)

from conftest import make_tone


def test_frame_count_one_second():
    assert frame_count(16000, 400, 160) == 98


def test_frame_count_formula_random_lengths(rng):
    for _ in range(1000):
        n = int(rng.integers(400, 50000))
        assert frame_count(n, 400, 160) == 1 + (n - 400) // 160


def test_too_short_signal_rejected():
    with pytest.raises(DataError, match="shorter than one"):
        compute_mfcc(AudioBuffer(np.zeros(399), 16000))


def test_all_zero_audio_rows_identical():
    feats = compute_mfcc(AudioBuffer(np.zeros(16000), 16000))
    assert feats.values.shape == (98, 13)
    assert np.allclose(feats.values, feats.values[0])


def test_mel_energies_match_naive_dft_oracle_tone(tone_1khz):
    cfg = MelConfig()
    got = mel_spectrogram(tone_1khz, cfg)
    want = naive_mel_energies(tone_1khz.samples, 16000, cfg.n_fft, cfg.n_mels,
                              0.0, 8000.0, 400, 160, cfg.pre_emphasis)
    rms = np.sqrt(np.mean((got - want) ** 2))
    assert rms < 1e-4


def test_mel_energies_match_oracle_random_signals(rng):
    cfg = MelConfig()
    for _ in range(5):
        samples = rng.uniform(-1, 1, int(rng.integers(500, 1200)))
        audio = AudioBuffer(samples, 16000)
        got = mel_spectrogram(audio, cfg)
        want = naive_mel_energies(samples, 16000, cfg.n_fft, cfg.n_mels,
                                  0.0, 8000.0, 400, 160, cfg.pre_emphasis)
        assert np.sqrt(np.mean((got - want) ** 2)) < 1e-4


def test_gain_shifts_only_coefficient_zero():
    loud = make_tone(700.0, amplitude=0.5)
    soft = AudioBuffer(loud.samples * (10.0 ** (-6.0 / 20.0)), 16000)
    a = compute_mfcc(loud).values
    b = compute_mfcc(soft).values
    assert np.max(np.abs(a[:, 1:] - b[:, 1:])) < 1e-6
    assert np.max(np.abs(a[:, 0] - b[:, 0])) > 1e-3


def test_deltas_of_constant_are_zero():
    feats = FeatureMatrix(np.full((20, 13), 3.7), "mfcc13")
    assert np.all(compute_deltas(feats).values == 0.0)


def test_delta_of_linear_ramp_recovers_slope():
    slope = 0.25
    ramp = slope * np.arange(30)[:, None] * np.ones((1, 13))
    deltas = compute_deltas(FeatureMatrix(ramp, "mfcc13")).values
    assert np.allclose(deltas[2:-2], slope)


def test_deltas_match_direct_formula_oracle(rng):
    values = rng.normal(size=(10, 13))
    got = compute_deltas(FeatureMatrix(values, "mfcc13"), window=2).values
    assert np.allclose(got, naive_deltas(values, 2), atol=1e-12)


def test_delta_of_delta_equals_delta2_stream():
    # the third stacked stream is exactly compute_deltas applied twice
    audio = make_tone(500.0, duration_s=0.3)
    mfcc = compute_mfcc(audio)
    delta = compute_deltas(mfcc)
    delta2 = compute_deltas(delta)
    twice = compute_deltas(compute_deltas(mfcc))
    assert np.array_equal(delta2.values, twice.values)
    stacked = stack_features(mfcc, delta, delta2)
    assert stacked.values.shape == (stacked.n_frames, 39)
    full = extract_features(audio)
    assert np.array_equal(full.values, stacked.values)


def test_stack_shapes_and_normalization(rng):
    base = FeatureMatrix(rng.normal(size=(98, 13)), "mfcc13")
    stacked = stack_features(base, compute_deltas(base), compute_deltas(compute_deltas(base)))
    assert stacked.values.shape == (98, 39)
    assert np.all(np.abs(stacked.values.mean(axis=0)) < 1e-6)
    assert np.all(np.abs(stacked.values.var(axis=0) - 1.0) < 1e-4)


def test_stack_constant_column_zeroed_by_variance_floor():
    const = FeatureMatrix(np.full((50, 13), 2.0), "mfcc13")
    stacked = stack_features(const, const, const)
    assert np.all(stacked.values == 0.0)


def test_stack_shape_mismatch_rejected():
    a = FeatureMatrix(np.zeros((10, 13)), "mfcc13")
    b = FeatureMatrix(np.zeros((11, 13)), "mfcc13")
    with pytest.raises(ValueError, match="equal"):
        stack_features(a, b, b)


def test_stack_output_always_finite(rng):
    for _ in range(5):
        values = rng.normal(size=(30, 13)) * rng.uniform(0, 100)
        f = FeatureMatrix(values, "mfcc13")
        out = stack_features(f, compute_deltas(f), compute_deltas(compute_deltas(f)))
        assert np.all(np.isfinite(out.values))


def test_extract_features_end_to_end(tone_1khz):
    feats = extract_features(tone_1khz)
    assert feats.kind == "stacked39"
    assert feats.values.shape == (98, 39)
