import json
import os

import numpy as np
import pytest

from neuroloop.dcmc import (BETA_BAND, DcmcResult, band_summary, dc_matrix,
                            directed_coherence, dominance, fit_mvar,
                            mask_and_normalize, mask_and_normalize_set,
                            select_order, significance_threshold)
from neuroloop.errors import (ConfigError, InsufficientDataError,
                              SingularFitError, StabilityError)
from neuroloop.synth import MvarSpec, gen_mvar, unidirectional_coupling_spec

from oracles import gen_mvar_trials_vec

GOLDEN = json.load(open(os.path.join(os.path.dirname(__file__), "golden",
                                     "stats_golden.json")))

UNI = unidirectional_coupling_spec(f_res=20.0)


def random_stable_spec(rng, order=2):
    coeffs = rng.uniform(-1.0, 1.0, (order, 2, 2))
    spec = MvarSpec(order, coeffs, (float(rng.uniform(0.5, 2.0)),
                                    float(rng.uniform(0.5, 2.0))))
    radius = spec.stability_radius()
    target = rng.uniform(0.3, 0.95)
    scale = radius / target if radius > 0 else 1.0
    for k in range(order):
        coeffs[k] /= scale ** (k + 1)
    return MvarSpec(order, coeffs, spec.noise_var)


def trials_from_series(pair, trial_len=1000):
    x = np.vstack([pair[0].samples, pair[1].samples])
    n = x.shape[1] // trial_len
    return [x[:, i * trial_len:(i + 1) * trial_len] for i in range(n)]


class TestFitMvar:
    def test_recovers_known_coefficients(self):
        eeg, emg = gen_mvar(UNI, 100_000, seed=0)
        model = fit_mvar([np.vstack([eeg.samples, emg.samples])], order=2)
        assert np.max(np.abs(model.coeffs - UNI.coeffs)) < 0.05
        assert model.noise_var[0] == pytest.approx(1.0, rel=0.05)
        assert model.noise_var[1] == pytest.approx(1.0, rel=0.05)

    def test_white_noise_gives_null_model(self):
        rng = np.random.default_rng(1)
        trials = [rng.standard_normal((2, 1000)) * 2.0 for _ in range(60)]
        model = fit_mvar(trials, order=10)
        assert np.max(np.abs(model.coeffs)) < 0.05
        assert model.noise_var[0] == pytest.approx(4.0, rel=0.05)
        assert model.noise_var[1] == pytest.approx(4.0, rel=0.05)
        assert model.n_trials == 60

    def test_bad_order(self):
        with pytest.raises(ConfigError):
            fit_mvar([np.zeros((2, 100))], order=0)

    def test_rank_deficient(self):
        with pytest.raises(SingularFitError):
            fit_mvar([np.zeros((2, 200))], order=3)

    def test_trial_shorter_than_order(self):
        with pytest.raises(ConfigError):
            fit_mvar([np.zeros((2, 5))], order=10)

    def test_consistency_improves_with_samples(self):
        errs = {10_000: [], 100_000: []}
        for seed in range(20):
            for n in errs:
                eeg, emg = gen_mvar(UNI, n, seed=seed)
                model = fit_mvar([np.vstack([eeg.samples, emg.samples])], order=2)
                errs[n].append(np.max(np.abs(model.coeffs - UNI.coeffs)))
        assert np.median(errs[100_000]) < np.median(errs[10_000])

    def test_select_order_finds_ground_truth(self):
        eeg, emg = gen_mvar(UNI, 60_000, seed=5)
        trials = trials_from_series((eeg, emg))
        assert select_order(trials, candidates=range(1, 9)) == 2

    def test_select_order_bad_args(self):
        with pytest.raises(ConfigError):
            select_order([np.zeros((2, 100))], candidates=[])
        with pytest.raises(ConfigError):
            select_order([np.zeros((2, 100))], criterion="mdl")


class TestDirectedCoherence:
    def test_row_normalization_identity(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            spec = random_stable_spec(rng)
            _, dc = dc_matrix(spec)
            assert np.max(np.abs(dc.sum(axis=2) - 1.0)) < 1e-9

    def test_diagonal_model_has_no_cross_coherence(self):
        spec = MvarSpec(1, np.array([[[0.5, 0.0], [0.0, -0.3]]]))
        res = directed_coherence(spec)
        assert np.all(res.dc_desc == 0.0)
        assert np.all(res.dc_asc == 0.0)

    def test_values_in_unit_interval(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            res = directed_coherence(random_stable_spec(rng, order=3))
            for v in (res.dc_desc, res.dc_asc):
                assert np.all((v >= 0.0) & (v <= 1.0))

    def test_unidirectional_peak_and_silent_reverse(self):
        truth = directed_coherence(UNI)
        f_true = truth.freqs[np.argmax(truth.dc_desc)]
        eeg, emg = gen_mvar(UNI, 120_000, seed=7)
        model = fit_mvar(trials_from_series((eeg, emg)), order=2)
        fitted = directed_coherence(model)
        f_fit = fitted.freqs[np.argmax(fitted.dc_desc)]
        assert abs(f_fit - f_true) <= 2.0
        assert np.all(fitted.dc_asc < 0.05)

    def test_unstable_model_rejected(self):
        spec = MvarSpec(1, np.array([[[1.05, 0.0], [0.0, 0.0]]]))
        with pytest.raises(StabilityError):
            directed_coherence(spec)


class TestSignificance:
    def test_deterministic(self):
        a = significance_threshold(10, 250, 5, n_sim=10, seed=3)
        b = significance_threshold(10, 250, 5, n_sim=10, seed=3)
        assert a == b
        c = significance_threshold(10, 250, 5, n_sim=10, seed=4)
        assert a != c

    def test_in_unit_interval(self):
        thr = significance_threshold(10, 250, 5, n_sim=10, seed=0)
        assert 0.0 < thr < 1.0

    def test_too_few_simulations(self):
        with pytest.raises(ConfigError):
            significance_threshold(10, 250, 5, n_sim=1, seed=0)

    def test_monotone_in_trial_count(self):
        for seed in range(20):
            thrs = [significance_threshold(n, 250, 5, n_sim=50, seed=seed)
                    for n in (30, 60, 120)]
            assert thrs[1] <= thrs[0] + 0.02
            assert thrs[2] <= thrs[1] + 0.02


class TestMasking:
    def raw(self, desc, asc):
        freqs = np.arange(1.0, 1.0 + len(desc))
        return DcmcResult(freqs, np.asarray(desc, float), np.asarray(asc, float))

    def test_all_below_threshold(self):
        out = mask_and_normalize(self.raw([0.01, 0.02], [0.005, 0.001]), 0.5)
        assert np.all(out.masked_desc == 0.0) and np.all(out.masked_asc == 0.0)
        assert np.all(out.norm_desc == 0.0) and np.all(out.norm_asc == 0.0)

    def test_single_survivor_normalizes_to_one(self):
        out = mask_and_normalize(self.raw([0.6, 0.01], [0.0, 0.0]), 0.5)
        assert out.norm_desc.tolist() == [1.0, 0.0]

    def test_two_survivors_scale(self):
        out = mask_and_normalize(self.raw([0.4, 0.2], [0.0, 0.0]), 0.1)
        assert out.norm_desc.tolist() == [1.0, 0.5]

    def test_masked_values_at_or_above_threshold(self):
        rng = np.random.default_rng(4)
        res = directed_coherence(random_stable_spec(rng))
        out = mask_and_normalize(res, 0.05)
        for v in (out.masked_desc, out.masked_asc):
            assert np.all((v == 0.0) | (v >= 0.05))

    def test_set_scope_shares_peak(self):
        results = [self.raw([0.8, 0.0], [0.0, 0.0]), self.raw([0.4, 0.0], [0.0, 0.0])]
        out = mask_and_normalize_set(results, 0.1)
        assert out[0].norm_desc[0] == 1.0
        assert out[1].norm_desc[0] == pytest.approx(0.5)

    def test_bad_threshold(self):
        with pytest.raises(ConfigError):
            mask_and_normalize(self.raw([0.1], [0.1]), 1.5)


class TestBandSummary:
    def normalized(self, value, n=1):
        freqs = np.arange(1.0, 101.0)
        flat = np.full(100, value)
        res = DcmcResult(freqs, flat, flat, sig_threshold=0.01,
                         masked_desc=flat, masked_asc=flat,
                         norm_desc=flat, norm_asc=flat)
        return res

    def test_constant_value(self):
        results = [self.normalized(0.5) for _ in range(240)]
        starts = np.arange(240.0)
        desc, asc = band_summary(results, starts, BETA_BAND, 240.0, label="beta")
        assert desc.early_mean == pytest.approx(0.5)
        assert desc.late_mean == pytest.approx(0.5)
        assert asc.direction == "ascending"

    def test_all_masked(self):
        results = [self.normalized(0.0) for _ in range(240)]
        desc, asc = band_summary(results, np.arange(240.0), BETA_BAND, 240.0)
        assert desc.early_mean == 0.0 and asc.late_mean == 0.0

    def test_short_session_rejected(self):
        results = [self.normalized(0.5) for _ in range(100)]
        with pytest.raises(InsufficientDataError):
            band_summary(results, np.arange(100.0), BETA_BAND, 100.0)

    def test_requires_normalized_input(self):
        raw = [DcmcResult(np.arange(1.0, 101.0), np.zeros(100), np.zeros(100))]
        with pytest.raises(ConfigError):
            band_summary(raw * 240, np.arange(240.0), BETA_BAND, 240.0)

    def test_weakened_late_coupling_detected(self):
        # plant with time-varying coupling: late trials at half gain
        strong = unidirectional_coupling_spec(coupling=0.8)
        weak = unidirectional_coupling_spec(coupling=0.4)
        thr = significance_threshold(1, 1000, 2, n_sim=50, seed=0)
        hits = 0
        n_seeds = 100
        for seed in range(n_seeds):
            rng = np.random.default_rng(10_000 + seed)
            early = gen_mvar_trials_vec(strong.coeffs, strong.noise_var, 120, 1000, rng)
            late = gen_mvar_trials_vec(weak.coeffs, weak.noise_var, 120, 1000, rng)
            per_trial = [directed_coherence(fit_mvar([t], 2)) for t in early + late]
            normalized = mask_and_normalize_set(per_trial, thr)
            desc, _ = band_summary(normalized, np.arange(240.0), BETA_BAND, 240.0)
            if desc.late_mean < desc.early_mean:
                hits += 1
        assert hits >= 95


class TestDominance:
    def test_identical_samples(self):
        res = dominance([0.8, 0.9, 0.85], [0.8, 0.9, 0.85])
        assert res.direction == "none"
        assert res.p_value == pytest.approx(1.0)

    def test_descending_dominant_matches_oracle(self):
        g = GOLDEN["dominance"]
        res = dominance(g["desc"], g["asc"])
        assert res.direction == "descending"
        assert res.p_value == pytest.approx(g["p"], abs=1e-8)

    def test_swap_flips_label(self):
        g = GOLDEN["dominance"]
        res = dominance(g["asc"], g["desc"])
        assert res.direction == "ascending"
        assert res.p_value == pytest.approx(g["p"], abs=1e-8)
