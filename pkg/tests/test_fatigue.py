import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import spearmanr

from neuroloop.errors import (ConfigError, DataError, InsufficientDataError,
                              UndefinedMetricError)
from neuroloop.fatigue import (BaselineRule, mpf, mpf_drop_rate, stream_mpf)
from neuroloop.signals import PowerSpectrum, TimeSeries
from neuroloop.synth import FatigueState, PlantConfig, _gen_emg_samples, gen_emg

from oracles import flat_band_centroid, ramp_band_centroid


def band_spectrum(power_fn, f_lo=0.0, f_hi=500.0, df=1.0):
    freqs = np.arange(f_lo, f_hi + df / 2, df)
    return PowerSpectrum(freqs, power_fn(freqs))


class TestMpf:
    def test_flat_band_is_midpoint(self):
        spec = band_spectrum(lambda f: np.where((f >= 60) & (f <= 200), 2.5, 0.0))
        assert mpf(spec) == pytest.approx(flat_band_centroid(60, 200), abs=1e-9)

    def test_linear_ramp_matches_closed_form(self):
        spec = band_spectrum(lambda f: f)
        assert mpf(spec) == pytest.approx(ramp_band_centroid(60, 200), abs=0.5)

    def test_tone_spectrum(self):
        spec = band_spectrum(lambda f: np.where(f == 80.0, 10.0, 0.0))
        assert abs(mpf(spec) - 80.0) <= spec.df

    def test_zero_band_power(self):
        spec = band_spectrum(lambda f: np.where(f < 50, 1.0, 0.0))
        with pytest.raises(UndefinedMetricError):
            mpf(spec)

    def test_grid_not_covering_band(self):
        spec = PowerSpectrum(np.arange(0.0, 100.0), np.ones(100))
        with pytest.raises(ConfigError):
            mpf(spec)

    @given(st.floats(min_value=1e-6, max_value=1e6))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance(self, k):
        freqs = np.arange(0.0, 501.0)
        power = np.exp(-0.5 * ((freqs - 120) / 30.0) ** 2)
        base = mpf(PowerSpectrum(freqs, power))
        scaled = mpf(PowerSpectrum(freqs, k * power))
        assert scaled == pytest.approx(base, abs=1e-9)

    def test_grid_shift_moves_centroid_exactly(self):
        freqs = np.arange(0.0, 501.0)
        power = np.where((freqs >= 70) & (freqs <= 150),
                         np.exp(-0.5 * ((freqs - 110) / 15.0) ** 2), 0.0)
        base = mpf(PowerSpectrum(freqs, power))
        shift = 10.0
        shifted = mpf(PowerSpectrum(freqs + shift, power),
                      f_lo=60 + shift, f_hi=200 + shift)
        assert shifted - base == pytest.approx(shift, abs=1e-9)


class TestDropRate:
    def test_eq1_arithmetic(self):
        assert mpf_drop_rate(100.0, 89.0) == pytest.approx(11.0)

    def test_no_drop(self):
        assert mpf_drop_rate(123.4, 123.4) == 0.0

    def test_negative_allowed(self):
        assert mpf_drop_rate(120.0, 132.0) == pytest.approx(-10.0)

    def test_bad_baseline(self):
        with pytest.raises(DataError):
            mpf_drop_rate(0.0, 100.0)

    @given(st.floats(min_value=1.0, max_value=500.0),
           st.floats(min_value=1.0, max_value=500.0))
    @settings(max_examples=100, deadline=None)
    def test_reciprocal_identity(self, b, r):
        lhs = mpf_drop_rate(b, r) + mpf_drop_rate(r, b) * (r / b)
        assert abs(lhs) < 1e-9


class TestStreamMpf:
    def test_stationary_signal_stays_flat(self):
        for seed in range(10):
            cfg = PlantConfig(seed=seed)
            ts = gen_emg(FatigueState(0.0), cfg, 120.0)
            windows = stream_mpf(ts)
            assert len(windows) == 30
            drops = [w.drop_rate for w in windows if w.drop_rate is not None]
            assert len(drops) == 27
            assert np.mean(np.abs(drops)) < 3.0

    def test_falling_centroid_gives_rising_drop_rate(self):
        cfg = PlantConfig(seed=11)
        parts = []
        levels = np.linspace(0.0, 1.0, 30)
        for i, lv in enumerate(levels):
            parts.append(_gen_emg_samples(float(lv), cfg, 4000, 1000.0, i))
        ts = TimeSeries(np.concatenate(parts), 1000.0)
        drops = [w.drop_rate for w in stream_mpf(ts) if w.drop_rate is not None]
        rho = spearmanr(np.arange(len(drops)), drops).statistic
        assert rho > 0.9

    def test_short_input_all_baseline(self):
        cfg = PlantConfig(seed=0)
        ts = gen_emg(FatigueState(0.0), cfg, 12.0)
        windows = stream_mpf(ts)
        assert len(windows) == 3
        assert all(w.is_baseline_window for w in windows)
        assert all(w.drop_rate is None for w in windows)

    def test_undefined_window_becomes_gap(self):
        cfg = PlantConfig(seed=1)
        good = gen_emg(FatigueState(0.0), cfg, 16.0).samples
        x = np.concatenate([good, np.zeros(4000), good[:8000]])
        windows = stream_mpf(TimeSeries(x, 1000.0))
        gaps = [w for w in windows if w.mpf is None]
        assert len(gaps) == 1
        assert gaps[0].drop_rate is None
        assert sum(w.drop_rate is not None for w in windows) == len(windows) - 4

    def test_too_short_errors(self):
        with pytest.raises(InsufficientDataError):
            stream_mpf(TimeSeries(np.ones(2000), 1000.0))

    def test_bad_rule(self):
        with pytest.raises(ConfigError):
            BaselineRule(scope="per-day")
