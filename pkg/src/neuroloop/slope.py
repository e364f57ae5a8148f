"""Resting-state EEG PSD slope and the interhemispheric symmetry index.

Each accepted 5-s segment gets a 1-Hz-bin spectrum over 2-45 Hz; a line is
fitted to log10 power (against log10 frequency by default) and the slopes
are averaged across segments.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, DegenerateDataError, InsufficientDataError
from .signals import SpectrumConfig, TimeSeries, periodogram, segment

FIT_BAND = (2.0, 45.0)


@dataclass
class SlopeResult:
    slope: float
    intercept: float
    r2: float
    n_segments: int
    n_excluded: int = 0
    fit_space: str = "loglog"


def _fit_segment(freqs, power, fit_space):
    x = np.log10(freqs) if fit_space == "loglog" else freqs
    y = np.log10(power)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def psd_slope(
    rest: TimeSeries,
    band: tuple[float, float] = FIT_BAND,
    segment_len: float = 5.0,
    fit_space: str = "loglog",
    reject_spans: tuple[tuple[float, float], ...] = (),
) -> SlopeResult:
    """Mean per-segment spectral slope of a resting-state channel.

    Only accepted 5-s segments contribute (artifact heuristic plus any
    ``reject_spans`` annotations). Segments with a zero-power bin inside the
    band are excluded (counted in ``n_excluded`` with a warning); if nothing
    survives the result is an insufficient-data error.
    """
    if fit_space not in ("loglog", "loglin"):
        raise ConfigError(f"unknown fit space {fit_space!r}")
    if rest.duration < segment_len:
        raise InsufficientDataError(
            f"need at least {segment_len} s of data, have {rest.duration:.3f} s"
        )
    spectrum_cfg = SpectrumConfig()  # 1-s subsegments -> df = 1 Hz
    slopes, intercepts, r2s = [], [], []
    n_excluded = 0
    for ep in segment(rest, segment_len, segment_len, reject_spans=reject_spans):
        if not ep.accepted:
            continue
        spec = periodogram(ep, spectrum_cfg)
        tol = 1e-9
        mask = (spec.freqs >= band[0] - tol) & (spec.freqs <= band[1] + tol)
        f, p = spec.freqs[mask], spec.power[mask]
        if f.size < 2:
            raise ConfigError(f"spectrum grid does not cover {band} Hz")
        if np.any(p <= 0):
            n_excluded += 1
            continue
        s, i, r = _fit_segment(f, p, fit_space)
        slopes.append(s)
        intercepts.append(i)
        r2s.append(r)
    if n_excluded:
        warnings.warn(f"{n_excluded} segment(s) excluded for zero-power bins",
                      stacklevel=2)
    if not slopes:
        raise InsufficientDataError("no usable segments after exclusion")
    return SlopeResult(
        slope=float(np.mean(slopes)),
        intercept=float(np.mean(intercepts)),
        r2=float(np.mean(r2s)),
        n_segments=len(slopes),
        n_excluded=n_excluded,
        fit_space=fit_space,
    )


def slope_si(slope_aff: float, slope_un: float) -> float:
    """Symmetry index (aff - un) / (aff + un); 0 means perfect balance."""
    den = slope_aff + slope_un
    if den == 0:
        raise DegenerateDataError("slopes sum to zero: symmetry index undefined")
    return (slope_aff - slope_un) / den
