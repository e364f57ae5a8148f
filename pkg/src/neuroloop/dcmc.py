"""Directed corticomuscular coherence from a bivariate AR model.

Pipeline: pool 1-s EEG/EMG trials into a least-squares AR fit, evaluate the
spectral transfer function H(f) = A(f)^-1, form the row-normalized directed
coherence in both directions, threshold it against a Monte-Carlo surrogate
line (95th percentile of white-noise fits), and summarize normalized band
activity early versus late in a running trial.

Directions follow the EEG-first channel convention: "descending" is
EEG -> EMG (|DC_21|^2), "ascending" is EMG -> EEG (|DC_12|^2). The row
normalization makes |DC_i1|^2 + |DC_i2|^2 == 1 at every frequency.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import stats
from .errors import (ConfigError, InsufficientDataError, SingularFitError,
                     StabilityError)
from .synth import companion_radius

DEFAULT_ORDER = 10
DEFAULT_FREQS = np.arange(1.0, 101.0)
BETA_BAND = (15.0, 30.0)
GAMMA_BAND = (30.0, 100.0)


@dataclass
class MvarModel:
    """Fitted bivariate AR model; ``noise_var`` is the per-channel residual
    variance of the pooled regression (channel 1 = EEG, channel 2 = EMG)."""

    order: int
    coeffs: np.ndarray            # (order, 2, 2)
    noise_var: tuple[float, float]
    n_trials: int = 0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape != (self.order, 2, 2):
            raise ConfigError(f"coeffs shape {self.coeffs.shape} != ({self.order}, 2, 2)")
        if any(v <= 0 for v in self.noise_var):
            raise ConfigError("residual variances must be positive")

    def stability_radius(self) -> float:
        return companion_radius(self.coeffs)


@dataclass
class DcmcResult:
    """Directed coherence spectra; masked/normalized fields are filled by
    :func:`mask_and_normalize`."""

    freqs: np.ndarray
    dc_desc: np.ndarray           # |DC EEG->EMG|^2 per frequency
    dc_asc: np.ndarray            # |DC EMG->EEG|^2 per frequency
    sig_threshold: float | None = None
    masked_desc: np.ndarray | None = None
    masked_asc: np.ndarray | None = None
    norm_desc: np.ndarray | None = None
    norm_asc: np.ndarray | None = None


@dataclass
class BandSummary:
    band: str
    f_lo: float
    f_hi: float
    direction: str                # "descending" | "ascending"
    early_mean: float
    late_mean: float


@dataclass
class DominanceResult:
    direction: str                # "descending" | "ascending" | "none"
    p_value: float
    statistic: float


def _as_trial(trial) -> np.ndarray:
    x = np.asarray(trial, dtype=float)
    if x.ndim != 2:
        raise ConfigError("each trial must be a (2, n) array or a pair of 1-D arrays")
    if x.shape[0] != 2:
        if x.shape[1] == 2:
            x = x.T
        else:
            raise ConfigError(f"trial shape {x.shape} is not bivariate")
    return x


def _design(trials: Sequence[np.ndarray], p: int, align: int | None = None):
    """Stack lagged regression rows across trials (channels centered per trial)."""
    off = align if align is not None else p
    xs, ys = [], []
    for tr in trials:
        tr = tr - tr.mean(axis=1, keepdims=True)
        n = tr.shape[1]
        if n <= off:
            raise ConfigError(f"trial of {n} samples too short for order {off}")
        d = np.empty((n - off, 2 * p))
        for k in range(1, p + 1):
            d[:, 2 * (k - 1):2 * k] = tr[:, off - k:n - k].T
        xs.append(d)
        ys.append(tr[:, off:].T)
    return np.vstack(xs), np.vstack(ys)


def fit_mvar(trials: Sequence, order: int = DEFAULT_ORDER) -> MvarModel:
    """Least-squares AR estimate pooled over all valid lag windows of all trials."""
    if order <= 0:
        raise ConfigError(f"order must be positive, got {order}")
    trial_arrays = [_as_trial(t) for t in trials]
    if not trial_arrays:
        raise InsufficientDataError("no trials to fit")
    x, y = _design(trial_arrays, order)
    coef, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
    if rank < 2 * order:
        raise SingularFitError(f"rank-deficient regression (rank {rank} < {2 * order})")
    resid = y - x @ coef
    dof = max(1, y.shape[0] - 2 * order)
    sig = (resid ** 2).sum(axis=0) / dof
    coeffs = np.stack([coef[2 * (k - 1):2 * k, :].T for k in range(1, order + 1)])
    return MvarModel(order, coeffs, (float(sig[0]), float(sig[1])),
                     n_trials=len(trial_arrays))


def select_order(
    trials: Sequence,
    candidates: Sequence[int] = range(2, 21),
    criterion: str = "bic",
) -> int:
    """Pick the AR order minimizing penalized log residual covariance.

    All candidates are scored on the same regression sample (aligned at the
    largest candidate) so the criterion values are comparable.
    """
    cand = sorted(set(int(c) for c in candidates))
    if not cand or cand[0] < 1:
        raise ConfigError("candidate orders must be positive")
    if criterion not in ("bic", "aic"):
        raise ConfigError(f"unknown criterion {criterion!r}")
    trial_arrays = [_as_trial(t) for t in trials]
    p_max = cand[-1]
    x_full, y = _design(trial_arrays, p_max)
    n_rows = y.shape[0]
    best_p, best_score = cand[0], math.inf
    for p in cand:
        xp = x_full[:, :2 * p]
        coef, _, _, _ = np.linalg.lstsq(xp, y, rcond=None)
        resid = y - xp @ coef
        cov = (resid.T @ resid) / n_rows
        sign, logdet = np.linalg.slogdet(cov)
        if sign <= 0:
            continue
        n_params = 4 * p
        penalty = (n_params * math.log(n_rows) / n_rows if criterion == "bic"
                   else 2.0 * n_params / n_rows)
        score = logdet + penalty
        if score < best_score - 1e-12:
            best_p, best_score = p, score
    return best_p


def dc_matrix(
    model,
    freqs: np.ndarray | None = None,
    sample_rate: float = 1000.0,
) -> tuple[np.ndarray, np.ndarray]:
    """Squared directed-coherence matrix of a stable AR model.

    A(f) = I - sum_k A_k exp(-i 2 pi f k / fs); H = A^-1; entry (i, m) is
    |sigma_m H_im|^2 normalized by the noise-weighted power of row i, so each
    row sums to 1 at every frequency. Returns (freqs, values) with values of
    shape (n_freqs, 2, 2).
    """
    freqs = DEFAULT_FREQS.copy() if freqs is None else np.asarray(freqs, dtype=float)
    radius = companion_radius(np.asarray(model.coeffs, dtype=float))
    if radius >= 1.0:
        raise StabilityError(f"unstable model: companion spectral radius {radius:.4f}")
    w = 2.0 * np.pi * freqs / sample_rate
    a_f = np.tile(np.eye(2, dtype=complex), (freqs.size, 1, 1))
    for k in range(1, model.order + 1):
        a_f -= model.coeffs[k - 1][None, :, :] * np.exp(-1j * w * k)[:, None, None]
    det = a_f[:, 0, 0] * a_f[:, 1, 1] - a_f[:, 0, 1] * a_f[:, 1, 0]
    bad = np.abs(det) < 1e-300
    if np.any(bad):
        raise SingularFitError(
            f"singular spectral matrix at {freqs[bad][0]:.6g} Hz")
    h_sq = np.empty((freqs.size, 2, 2))
    h_sq[:, 0, 0] = np.abs(a_f[:, 1, 1] / det) ** 2
    h_sq[:, 0, 1] = np.abs(a_f[:, 0, 1] / det) ** 2
    h_sq[:, 1, 0] = np.abs(a_f[:, 1, 0] / det) ** 2
    h_sq[:, 1, 1] = np.abs(a_f[:, 0, 0] / det) ** 2
    weighted = h_sq * np.asarray(model.noise_var)[None, None, :]
    return freqs, weighted / weighted.sum(axis=2, keepdims=True)


def directed_coherence(
    model,
    freqs: np.ndarray | None = None,
    sample_rate: float = 1000.0,
) -> DcmcResult:
    """Squared directed coherence in both directions (EEG channel first).

    ``dc_desc`` is |DC_21|^2 (EEG -> EMG), ``dc_asc`` is |DC_12|^2
    (EMG -> EEG); see :func:`dc_matrix` for the full normalized matrix.
    """
    freqs, dc = dc_matrix(model, freqs, sample_rate)
    return DcmcResult(freqs, dc[:, 1, 0].copy(), dc[:, 0, 1].copy())


def significance_threshold(
    n_trials: int,
    trial_len: int,
    order: int,
    n_sim: int = 50,
    seed: int = 0,
    freqs: np.ndarray | None = None,
    sample_rate: float = 1000.0,
) -> float:
    """95th percentile of directed coherence from independent Gaussian trials.

    Each simulation draws ``n_trials`` fresh unit-variance white trial pairs
    (deterministic stream per (seed, simulation index)), fits the same model
    order and pools |DC|^2 over all frequencies, directions and simulations.
    """
    if n_sim < 2:
        raise ConfigError("need at least 2 simulations")
    if n_trials < 1 or trial_len <= order:
        raise ConfigError("surrogate shape must match a fittable dataset")
    freqs = DEFAULT_FREQS.copy() if freqs is None else np.asarray(freqs, dtype=float)
    pooled = []
    for sim in range(n_sim):
        rng = np.random.default_rng(np.random.SeedSequence([seed, sim]))
        trials = [rng.standard_normal((2, trial_len)) for _ in range(n_trials)]
        model = fit_mvar(trials, order)
        res = directed_coherence(model, freqs, sample_rate)
        pooled.append(res.dc_desc)
        pooled.append(res.dc_asc)
    return float(np.percentile(np.concatenate(pooled), 95.0))


def mask_and_normalize(raw: DcmcResult, threshold: float) -> DcmcResult:
    """Zero sub-threshold bins in both directions, then scale survivors to [0, 1].

    Normalization divides by the maximum surviving value across both
    directions of this result; an all-zero result stays all-zero.
    """
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    masked_d = np.where(raw.dc_desc >= threshold, raw.dc_desc, 0.0)
    masked_a = np.where(raw.dc_asc >= threshold, raw.dc_asc, 0.0)
    peak = max(float(masked_d.max()), float(masked_a.max()))
    scale = 1.0 / peak if peak > 0 else 0.0
    return replace(raw, sig_threshold=threshold,
                   masked_desc=masked_d, masked_asc=masked_a,
                   norm_desc=masked_d * scale, norm_asc=masked_a * scale)


def mask_and_normalize_set(results: Sequence[DcmcResult], threshold: float) -> list[DcmcResult]:
    """Trial-set scope: mask each result, normalize all by the set-wide peak."""
    if not 0.0 < threshold < 1.0:
        raise ConfigError(f"threshold must be in (0, 1), got {threshold}")
    masked = [(np.where(r.dc_desc >= threshold, r.dc_desc, 0.0),
               np.where(r.dc_asc >= threshold, r.dc_asc, 0.0)) for r in results]
    peak = max((max(float(d.max()), float(a.max())) for d, a in masked), default=0.0)
    scale = 1.0 / peak if peak > 0 else 0.0
    return [replace(r, sig_threshold=threshold, masked_desc=d, masked_asc=a,
                    norm_desc=d * scale, norm_asc=a * scale)
            for r, (d, a) in zip(results, masked)]


def band_summary(
    results: Sequence[DcmcResult],
    trial_starts: Sequence[float],
    band: tuple[float, float],
    trial_duration: float,
    label: str = "",
    span: float = 120.0,
) -> tuple[BandSummary, BandSummary]:
    """Mean normalized band dCMC over the first and last ``span`` seconds.

    ``results`` must be normalized (same trial-set scope) and time-ordered
    with ``trial_starts`` in seconds of running time. Returns (descending,
    ascending) summaries.
    """
    if len(results) != len(trial_starts):
        raise ConfigError("results and trial_starts lengths differ")
    if trial_duration < 2 * span:
        raise InsufficientDataError(
            f"running duration {trial_duration} s shorter than two {span} s spans")
    if any(r.norm_desc is None for r in results):
        raise ConfigError("results must be masked and normalized first")
    starts = np.asarray(trial_starts, dtype=float)
    early = [r for r, t in zip(results, starts) if t < span]
    late = [r for r, t in zip(results, starts) if t >= trial_duration - span]
    if not early or not late:
        raise InsufficientDataError("no trials in the early or late span")
    f = results[0].freqs
    sel = (f >= band[0]) & (f <= band[1])
    if not np.any(sel):
        raise ConfigError(f"band {band} outside the frequency grid")

    def mean_of(group, attr):
        return float(np.mean([getattr(r, attr)[sel] for r in group]))

    name = label or f"{band[0]:g}-{band[1]:g}Hz"
    desc = BandSummary(name, band[0], band[1], "descending",
                       mean_of(early, "norm_desc"), mean_of(late, "norm_desc"))
    asc = BandSummary(name, band[0], band[1], "ascending",
                      mean_of(early, "norm_asc"), mean_of(late, "norm_asc"))
    return desc, asc


def dominance(
    desc_means: Sequence[float],
    asc_means: Sequence[float],
    alpha: float = 0.05,
) -> DominanceResult:
    """Unpaired two-sided t-test labelling the dominant pathway (or none)."""
    res = stats.t_test(desc_means, asc_means, paired=False)
    d_mean = float(np.mean(np.asarray(desc_means, dtype=float)))
    a_mean = float(np.mean(np.asarray(asc_means, dtype=float)))
    if res.p_value < alpha and d_mean > a_mean:
        label = "descending"
    elif res.p_value < alpha and a_mean > d_mean:
        label = "ascending"
    else:
        label = "none"
    return DominanceResult(label, res.p_value, res.statistic)
