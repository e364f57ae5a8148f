"""Signal containers, preprocessing and power spectral estimation.

Everything downstream (fatigue tracking, complexity, slope fitting, directed
coherence) consumes the three types defined here: ``TimeSeries`` for raw or
preprocessed channels, ``Epoch`` for fixed-length segments with a quality
flag, and ``PowerSpectrum`` for one-sided spectral densities.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import signal as sps

from .errors import ConfigError, DataError, InsufficientDataError

DEFAULT_RATE = 1000.0


@dataclass
class TimeSeries:
    """Uniformly sampled single-channel signal (values in microvolts)."""

    samples: np.ndarray
    sample_rate: float
    channel: str = ""
    t0: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        if self.samples.ndim != 1 or self.samples.size < 1:
            raise DataError("TimeSeries needs a non-empty 1-D sample array")
        if not self.sample_rate > 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        if not np.all(np.isfinite(self.samples)):
            raise DataError(f"non-finite samples in channel {self.channel!r}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class Epoch:
    """Fixed-length segment of a parent channel.

    ``accepted`` is the data-quality flag: rejected epochs are excluded from
    every aggregate statistic.
    """

    channel: str
    start_time: float
    samples: np.ndarray
    sample_rate: float
    accepted: bool = True

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass
class PowerSpectrum:
    """One-sided power spectral density on a uniform frequency grid."""

    freqs: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.power = np.asarray(self.power, dtype=float)
        if self.freqs.shape != self.power.shape or self.freqs.ndim != 1:
            raise DataError("freqs and power must be 1-D arrays of equal length")
        if self.freqs.size >= 2:
            steps = np.diff(self.freqs)
            if not np.all(steps > 0):
                raise DataError("frequency grid must be strictly increasing")
            if not np.allclose(steps, steps[0], rtol=1e-6, atol=1e-9):
                raise DataError("frequency grid must be uniformly spaced")
        if np.any(self.power < 0):
            raise DataError("negative power values")

    @property
    def df(self) -> float:
        return float(self.freqs[1] - self.freqs[0]) if self.freqs.size > 1 else 0.0


@dataclass
class PreprocessConfig:
    """Resample / band-pass / notch settings for raw EEG and EMG."""

    target_rate: float = DEFAULT_RATE
    band: tuple[float, float] = (2.0, 200.0)
    notch: tuple[float, float] = (49.0, 51.0)
    order: int = 4

    def __post_init__(self):
        lo, hi = self.band
        if not (0 < lo < hi):
            raise ConfigError(f"bad band-pass edges {self.band}")
        nlo, nhi = self.notch
        if not (0 < nlo < nhi):
            raise ConfigError(f"bad notch edges {self.notch}")
        if self.target_rate < 2 * hi:
            raise ConfigError(
                f"target rate {self.target_rate} Hz below twice the upper "
                f"passband edge {hi} Hz"
            )


@dataclass(frozen=True)
class SpectrumConfig:
    """Averaged tapered periodogram settings (df = 1 / subsegment)."""

    subsegment: float = 1.0
    overlap: float = 0.5
    window: str = "hann"
    detrend: str = "constant"

    def __post_init__(self):
        if self.subsegment <= 0:
            raise ConfigError("subsegment length must be positive")
        if not 0 <= self.overlap < 1:
            raise ConfigError("overlap must be in [0, 1)")
        if self.detrend not in ("constant", "none"):
            raise ConfigError(f"unsupported detrend {self.detrend!r}")


def _resample(x: np.ndarray, rate_in: float, rate_out: float) -> np.ndarray:
    if np.isclose(rate_in, rate_out):
        return x
    ratio = Fraction(rate_out / rate_in).limit_denominator(10_000)
    return sps.resample_poly(x, ratio.numerator, ratio.denominator)


def preprocess(ts: TimeSeries, cfg: PreprocessConfig | None = None) -> TimeSeries:
    """Resample, zero-phase band-pass and notch-filter a channel.

    Filters are 4th-order Butterworth designs applied forward-backward, so
    passband timing is preserved for later coherence analysis. ``t0`` and the
    channel label carry through; length scales by the rate ratio.
    """
    cfg = cfg or PreprocessConfig()
    x = _resample(ts.samples, ts.sample_rate, cfg.target_rate)
    nyq = cfg.target_rate / 2.0
    lo, hi = cfg.band
    if hi >= nyq:
        raise ConfigError(f"band-pass edge {hi} Hz at or above Nyquist {nyq} Hz")
    sos_bp = sps.butter(cfg.order, [lo / nyq, hi / nyq], btype="bandpass", output="sos")
    x = sps.sosfiltfilt(sos_bp, x)
    nlo, nhi = cfg.notch
    sos_bs = sps.butter(cfg.order, [nlo / nyq, nhi / nyq], btype="bandstop", output="sos")
    x = sps.sosfiltfilt(sos_bs, x)
    return replace(ts, samples=x, sample_rate=cfg.target_rate)


def _mad_rejected(x: np.ndarray, mad_factor: float) -> bool:
    mad = float(np.median(np.abs(x - np.median(x))))
    if mad == 0.0:
        return False  # degenerate scale: keep (constant epochs stay accepted)
    return bool(np.max(np.abs(x)) > mad_factor * mad)


def segment(
    ts: TimeSeries,
    epoch_len: float,
    hop: float | None = None,
    reject_spans: tuple[tuple[float, float], ...] = (),
    auto_reject: bool = True,
    mad_factor: float = 10.0,
) -> list[Epoch]:
    """Cut a channel into epochs of ``epoch_len`` seconds every ``hop`` seconds.

    The trailing partial window is discarded. Epochs overlapping any of
    ``reject_spans`` (absolute seconds) are rejected; with ``auto_reject`` an
    amplitude heuristic also rejects epochs whose peak exceeds ``mad_factor``
    times the epoch's median absolute deviation.
    """
    hop = epoch_len if hop is None else hop
    if epoch_len <= 0 or hop <= 0:
        raise ConfigError("epoch_len and hop must be positive")
    n_len = int(round(epoch_len * ts.sample_rate))
    n_hop = int(round(hop * ts.sample_rate))
    if n_len < 1 or n_hop < 1:
        raise ConfigError("epoch_len/hop below one sample period")
    if ts.samples.size < n_len:
        raise InsufficientDataError(
            f"series of {ts.duration:.3f} s shorter than one {epoch_len} s epoch"
        )
    epochs = []
    for i, start in enumerate(range(0, ts.samples.size - n_len + 1, n_hop)):
        x = ts.samples[start:start + n_len]
        t_start = ts.t0 + start / ts.sample_rate
        t_end = t_start + epoch_len
        accepted = True
        if any(t_start < b and a < t_end for a, b in reject_spans):
            accepted = False
        elif auto_reject and _mad_rejected(x, mad_factor):
            accepted = False
        epochs.append(Epoch(ts.channel, t_start, x, ts.sample_rate, accepted))
    return epochs


@lru_cache(maxsize=64)
def _welch_plan(nperseg: int, overlap: float, window: str, fs: float):
    w = sps.get_window(window, nperseg, fftbins=True)
    step = nperseg - int(nperseg * overlap)
    freqs = np.fft.rfftfreq(nperseg, 1.0 / fs)
    scale = 1.0 / (fs * float(np.sum(w ** 2)))
    return w, max(1, step), freqs, scale


def welch_psd(x: np.ndarray, fs: float, cfg: SpectrumConfig) -> tuple[np.ndarray, np.ndarray]:
    """Welch's averaged modified periodogram (one-sided density).

    Vectorized equivalent of scipy.signal.welch with constant detrend; the
    equivalence is pinned by tests.
    """
    nperseg = int(round(cfg.subsegment * fs))
    if x.size < nperseg:
        raise InsufficientDataError(
            f"signal of {x.size / fs:.3f} s shorter than the "
            f"{cfg.subsegment} s subsegment"
        )
    w, step, freqs, scale = _welch_plan(nperseg, cfg.overlap, cfg.window, fs)
    n_frames = (x.size - nperseg) // step + 1
    starts = np.arange(n_frames) * step
    frames = np.lib.stride_tricks.sliding_window_view(x, nperseg)[starts]
    if cfg.detrend == "constant":
        frames = frames - frames.mean(axis=1, keepdims=True)
    spec = np.fft.rfft(frames * w, axis=1)
    psd = (spec.real ** 2 + spec.imag ** 2).mean(axis=0) * scale
    if nperseg % 2 == 0:
        psd[1:-1] *= 2.0
    else:
        psd[1:] *= 2.0
    return freqs, psd


def periodogram(epoch: Epoch, cfg: SpectrumConfig | None = None) -> PowerSpectrum:
    """Averaged modified periodogram (tapered subsegments at 50% overlap).

    With the default 1-s subsegments the grid runs 0..Nyquist at df = 1 Hz and
    the integral of the density recovers the sample variance (Parseval).
    """
    cfg = cfg or SpectrumConfig()
    if not epoch.accepted:
        raise DataError("cannot estimate a spectrum from a rejected epoch")
    freqs, power = welch_psd(epoch.samples, epoch.sample_rate, cfg)
    return PowerSpectrum(freqs, power)
