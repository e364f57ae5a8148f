"""EMG mean power frequency, its drop rate, and windowed streaming.

The MPF is the spectral centroid of the EMG density over 60-200 Hz; its
percentage drop from a baseline is the control variable of fatigue-gated
training. ``stream_mpf`` produces one value per non-overlapping window
(default 4 s) with the baseline taken from the first windows of the bout.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, InsufficientDataError, UndefinedMetricError
from .signals import PowerSpectrum, SpectrumConfig, TimeSeries, welch_psd

MPF_BAND = (60.0, 200.0)


@dataclass
class BaselineRule:
    """How the baseline MPF is formed.

    ``scope`` is "per-bout" (recomputed from the first ``n_windows`` of every
    running bout) or "first-bout" (bout 0's baseline kept for the whole
    session).
    """

    scope: str = "per-bout"
    n_windows: int = 3

    def __post_init__(self):
        if self.scope not in ("per-bout", "first-bout"):
            raise ConfigError(f"unknown baseline scope {self.scope!r}")
        if self.n_windows < 1:
            raise ConfigError("baseline needs at least one window")


@dataclass
class MpfWindow:
    """One streaming window: MPF in Hz and drop rate in percent.

    ``mpf`` is None for an undefined window (zero band power); such windows
    propagate as flagged gaps. Baseline windows carry no drop rate.
    """

    window_start: float
    mpf: float | None
    drop_rate: float | None
    is_baseline_window: bool


def _mpf_from_grid(freqs: np.ndarray, power: np.ndarray, f_lo: float, f_hi: float) -> float:
    if f_lo >= f_hi:
        raise ConfigError("f_lo must be below f_hi")
    if freqs[0] > f_lo or freqs[-1] < f_hi:
        raise ConfigError(
            f"spectrum grid [{freqs[0]}, {freqs[-1]}] does not cover "
            f"[{f_lo}, {f_hi}] Hz"
        )
    tol = 1e-9
    mask = (freqs >= f_lo - tol) & (freqs <= f_hi + tol)
    f, s = freqs[mask], power[mask]
    if f.size < 2:
        raise ConfigError("fewer than two grid points inside the band")
    # trapezoid on the (uniform) grid, written out to stay cheap per window
    w = np.ones(f.size)
    w[0] = w[-1] = 0.5
    den = float(np.dot(w, s))
    if den <= 0:
        raise UndefinedMetricError("zero band power: MPF undefined")
    return float(np.dot(w, f * s) / den)


def mpf(spectrum: PowerSpectrum, f_lo: float = MPF_BAND[0], f_hi: float = MPF_BAND[1]) -> float:
    """Spectral centroid of the band via trapezoidal integration on the grid."""
    return _mpf_from_grid(spectrum.freqs, spectrum.power, f_lo, f_hi)


def mpf_drop_rate(baseline: float, running: float) -> float:
    """Percentage drop of the running MPF from baseline (negative if it rose)."""
    if baseline <= 0:
        raise DataError(f"baseline MPF must be positive, got {baseline}")
    return 100.0 * (baseline - running) / baseline


class MpfStream:
    """Incremental per-window MPF tracker with bout-aware baseline state.

    Used by the treadmill controller, which owns the stream; a plain batch
    interface is available as :func:`stream_mpf`.
    """

    def __init__(
        self,
        rule: BaselineRule | None = None,
        band: tuple[float, float] = MPF_BAND,
        spectrum_cfg: SpectrumConfig | None = None,
    ):
        self.rule = rule or BaselineRule()
        self.band = band
        self.spectrum_cfg = spectrum_cfg or SpectrumConfig()
        self._baseline_values: list[float] = []
        self._baseline: float | None = None
        self._collecting = True

    def reset_baseline(self) -> None:
        """Start a new bout; per-bout rules recollect the baseline."""
        if self.rule.scope == "per-bout" or self._baseline is None:
            self._baseline_values = []
            self._baseline = None
            self._collecting = True

    def push(self, samples: np.ndarray, sample_rate: float, window_start: float) -> MpfWindow:
        freqs, power = welch_psd(np.asarray(samples, dtype=float), sample_rate,
                                 self.spectrum_cfg)
        try:
            value = _mpf_from_grid(freqs, power, *self.band)
        except UndefinedMetricError:
            return MpfWindow(window_start, None, None, False)
        if self._collecting:
            self._baseline_values.append(value)
            if len(self._baseline_values) >= self.rule.n_windows:
                self._baseline = float(np.mean(self._baseline_values))
                self._collecting = False
            return MpfWindow(window_start, value, None, True)
        return MpfWindow(window_start, value, mpf_drop_rate(self._baseline, value), False)


def stream_mpf(
    ts: TimeSeries,
    window: float = 4.0,
    baseline_rule: BaselineRule | None = None,
    band: tuple[float, float] = MPF_BAND,
    spectrum_cfg: SpectrumConfig | None = None,
) -> list[MpfWindow]:
    """One MPF per non-overlapping window; drop rates once the baseline fills.

    Inputs shorter than baseline+1 windows yield baseline windows only (no
    drop-rate outputs). Undefined windows appear as gaps, never as a crash.
    """
    if window <= 0:
        raise ConfigError("window must be positive")
    if ts.duration < window:
        raise InsufficientDataError(
            f"need at least one {window} s window, have {ts.duration:.3f} s"
        )
    stream = MpfStream(baseline_rule, band, spectrum_cfg)
    n_win = int(round(window * ts.sample_rate))
    out = []
    for start in range(0, ts.samples.size - n_win + 1, n_win):
        t = ts.t0 + start / ts.sample_rate
        out.append(stream.push(ts.samples[start:start + n_win], ts.sample_rate, t))
    return out
