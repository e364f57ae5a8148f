"""Ground-truth signal generators.

Two families: a fatiguing-muscle EMG plant (band-limited noise with a
fatigue-dependent spectral centroid) used to close the loop around the
treadmill controller, and a bivariate autoregressive process generator used
to validate the directed-coherence pipeline against known coupling.

Every generator is a pure function of (config, seed, call index) and
reproduces byte-identical output on repeated calls.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, StabilityError
from .signals import DEFAULT_RATE, TimeSeries


@dataclass
class FatigueState:
    """Dimensionless peripheral fatigue level, clamped to [0, 1]."""

    level: float = 0.0

    def __post_init__(self):
        self.level = float(min(1.0, max(0.0, self.level)))


@dataclass
class PlantConfig:
    """Fatiguing-muscle EMG plant parameters.

    The emitted spectrum is a Gaussian bump (``bump_std``) inside
    ``noise_bandwidth`` whose centroid moves affinely with the fatigue level
    from ``baseline_centroid`` (level 0) down to ``min_centroid`` (level 1).
    Fatigue accrues linearly while running and decays exponentially at rest.
    """

    baseline_centroid: float = 130.0
    min_centroid: float = 85.0
    fatigue_gain: float = 0.002      # level per second while running
    recovery_rate: float = 0.005     # 1/s exponential decay while resting
    noise_bandwidth: tuple[float, float] = (60.0, 200.0)
    amplitude: float = 100.0         # target RMS, microvolts
    seed: int = 0
    bump_std: float = 25.0

    def __post_init__(self):
        lo, hi = self.noise_bandwidth
        if not (lo < self.min_centroid < self.baseline_centroid <= hi):
            raise ConfigError(
                "need noise band low edge < min_centroid < baseline_centroid "
                f"<= band high edge, got {self.min_centroid}, "
                f"{self.baseline_centroid} in {self.noise_bandwidth}"
            )
        if self.fatigue_gain < 0 or self.recovery_rate < 0:
            raise ConfigError("fatigue_gain and recovery_rate must be >= 0")
        if self.amplitude <= 0 or self.bump_std <= 0:
            raise ConfigError("amplitude and bump_std must be positive")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        # fail early if the lowest requested centroid cannot be synthesized
        _bump_center(self.min_centroid, self.bump_std, lo, hi)


def plant_step(s: FatigueState, cfg: PlantConfig, running: bool, dt: float) -> FatigueState:
    """Advance the fatigue level by ``dt`` seconds of running or rest."""
    if dt <= 0:
        raise ConfigError("dt must be positive")
    if running:
        return FatigueState(min(1.0, s.level + cfg.fatigue_gain * dt))
    return FatigueState(s.level * math.exp(-cfg.recovery_rate * dt))


def _phi(z: float) -> float:
    return math.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)


def _Phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def _truncated_mean(center: float, std: float, lo: float, hi: float) -> float:
    a = (lo - center) / std
    b = (hi - center) / std
    z = _Phi(b) - _Phi(a)
    if z < 1e-300:
        return lo  # essentially all mass below the band
    return center + std * (_phi(a) - _phi(b)) / z


@lru_cache(maxsize=16)
def _center_table(std: float, lo: float, hi: float):
    """Dense monotone (truncated mean -> bump center) inversion table."""
    from scipy.special import erf as _erf

    centers = np.linspace(lo - 5 * std, hi, 4001)
    a = (lo - centers) / std
    b = (hi - centers) / std
    phi = lambda z: np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
    cdf = lambda z: 0.5 * (1.0 + _erf(z / math.sqrt(2.0)))
    z = np.maximum(cdf(b) - cdf(a), 1e-300)
    means = centers + std * (phi(a) - phi(b)) / z
    return means, centers


def _bump_center(target: float, std: float, lo: float, hi: float) -> float:
    """Bump center whose band-truncated spectral mean equals ``target``.

    Truncation to the noise band pulls the centroid toward the band interior,
    so the center sits below the target near the lower edge. Inverted through
    a cached dense table (the mean is strictly increasing in the center).
    """
    means, centers = _center_table(std, lo, hi)
    if not means[0] < target < means[-1]:
        raise ConfigError(
            f"centroid {target} Hz not achievable inside band ({lo}, {hi}) Hz "
            f"with bump std {std} Hz"
        )
    return float(np.interp(target, means, centers))


@lru_cache(maxsize=64)
def _band_grid(n: int, sample_rate: float, lo: float, hi: float):
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    sel = (f >= lo) & (f <= hi)
    return f, sel


def _gen_emg_samples(
    level: float,
    cfg: PlantConfig,
    n: int,
    sample_rate: float,
    call_index: int,
) -> np.ndarray:
    target = cfg.baseline_centroid - level * (cfg.baseline_centroid - cfg.min_centroid)
    lo, hi = cfg.noise_bandwidth
    center = _bump_center(target, cfg.bump_std, lo, hi)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, call_index]))
    f, sel = _band_grid(n, sample_rate, lo, hi)
    # draw the in-band rFFT bins directly (law identical to rfft of white
    # noise: iid complex Gaussian with per-component variance n/2)
    n_sel = int(np.count_nonzero(sel))
    z = rng.standard_normal(2 * n_sel) * math.sqrt(n / 2.0)
    spec = np.zeros(f.size, dtype=complex)
    spec[sel] = z[:n_sel] + 1j * z[n_sel:]
    spec[sel] *= np.exp(-0.25 * ((f[sel] - center) / cfg.bump_std) ** 2)
    x = np.fft.irfft(spec, n)
    rms = float(np.sqrt(np.mean(x ** 2)))
    if rms > 0:
        x *= cfg.amplitude / rms
    return x


def gen_emg(
    s: FatigueState,
    cfg: PlantConfig,
    duration: float,
    sample_rate: float = DEFAULT_RATE,
    call_index: int = 0,
) -> TimeSeries:
    """Synthesize one EMG burst at the current fatigue level.

    Band-limited Gaussian noise whose spectral centroid over the noise band is
    exactly ``baseline - level * (baseline - min)``; RMS equals
    ``cfg.amplitude``. Deterministic given (cfg.seed, call_index).
    """
    if duration <= 0:
        raise ConfigError("duration must be positive")
    n = int(round(duration * sample_rate))
    x = _gen_emg_samples(s.level, cfg, n, sample_rate, call_index)
    return TimeSeries(x, sample_rate, channel="EMG")


@dataclass
class MvarSpec:
    """Bivariate autoregressive process: X(t) = sum_k A_k X(t-k) + E(t).

    ``coeffs`` has shape (order, 2, 2); ``noise_var`` holds the innovation
    variances of the two channels. Stability (companion spectral radius < 1)
    is checked where it matters: at generation and spectral evaluation.
    """

    order: int
    coeffs: np.ndarray
    noise_var: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.order < 1 or self.coeffs.shape != (self.order, 2, 2):
            raise ConfigError(
                f"coeffs must have shape (order, 2, 2); got {self.coeffs.shape} "
                f"for order {self.order}"
            )
        if any(v <= 0 for v in self.noise_var):
            raise ConfigError("noise variances must be positive")

    def stability_radius(self) -> float:
        return companion_radius(self.coeffs)


def companion_radius(coeffs: np.ndarray) -> float:
    """Spectral radius of the companion matrix of a (p, d, d) coefficient stack."""
    p, d, _ = coeffs.shape
    comp = np.zeros((d * p, d * p))
    comp[:d, :] = np.concatenate(list(coeffs), axis=1)
    if p > 1:
        comp[d:, :-d] = np.eye(d * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def gen_mvar(
    spec: MvarSpec,
    n_samples: int,
    seed: int,
    sample_rate: float = DEFAULT_RATE,
    channels: tuple[str, str] = ("EEG", "EMG"),
) -> tuple[TimeSeries, TimeSeries]:
    """Simulate the bivariate AR process; burn-in of 10*order is discarded."""
    p = spec.order
    if n_samples <= 10 * p:
        raise ConfigError(f"need more than {10 * p} samples for order {p}")
    radius = spec.stability_radius()
    if radius >= 1.0:
        raise StabilityError(f"unstable AR spec: companion spectral radius {radius:.4f}")
    burn = 10 * p
    n = n_samples + burn
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    e = rng.standard_normal((n, 2))
    e[:, 0] *= math.sqrt(spec.noise_var[0])
    e[:, 1] *= math.sqrt(spec.noise_var[1])
    # flattened lag stack: [A_1 | A_2 | ...] against [x(t-1); x(t-2); ...]
    a_flat = np.concatenate(list(spec.coeffs), axis=1)  # (2, 2p)
    x = np.zeros((n + p, 2))  # p zero rows of prehistory
    for t in range(n):
        hist = x[t:t + p][::-1].reshape(-1)
        x[p + t] = a_flat @ hist + e[t]
    out = x[p + burn:]
    return (
        TimeSeries(out[:, 0].copy(), sample_rate, channel=channels[0]),
        TimeSeries(out[:, 1].copy(), sample_rate, channel=channels[1]),
    )


def unidirectional_coupling_spec(
    f_res: float = 20.0,
    sample_rate: float = DEFAULT_RATE,
    pole_radius: float = 0.95,
    coupling: float = 0.8,
    receiver_feedback: float = -0.4,
    noise_var: tuple[float, float] = (1.0, 1.0),
) -> MvarSpec:
    """AR(2) spec where channel 1 drives channel 2 and never the reverse.

    Channel 1 resonates at ``f_res``; channel 2 receives the lagged channel-1
    signal scaled by ``coupling`` plus its own AR(1) dynamics. The block
    triangular structure makes the channel-2 -> channel-1 transfer exactly
    zero, which is what direction-specificity tests need.
    """
    theta = 2 * math.pi * f_res / sample_rate
    a1 = np.array([[2 * pole_radius * math.cos(theta), 0.0],
                   [coupling, receiver_feedback]])
    a2 = np.array([[-pole_radius ** 2, 0.0],
                   [0.0, 0.0]])
    return MvarSpec(order=2, coeffs=np.stack([a1, a2]), noise_var=noise_var)


def gen_powerlaw_noise(
    exponent: float,
    duration: float,
    sample_rate: float = DEFAULT_RATE,
    seed: int = 0,
    band: tuple[float, float] | None = None,
    amplitude: float = 1.0,
) -> TimeSeries:
    """Gaussian noise with power spectrum proportional to f**exponent.

    Optionally band-limited; DC is always zeroed. ``amplitude`` is the target
    RMS. Used as the shaped-spectrum oracle for slope-recovery tests.
    """
    if duration <= 0:
        raise ConfigError("duration must be positive")
    n = int(round(duration * sample_rate))
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    spec = np.fft.rfft(rng.standard_normal(n))
    f = np.fft.rfftfreq(n, 1.0 / sample_rate)
    shape = np.zeros_like(f)
    nz = f > 0
    shape[nz] = f[nz] ** (exponent / 2.0)
    if band is not None:
        shape[(f < band[0]) | (f > band[1])] = 0.0
    x = np.fft.irfft(spec * shape, n)
    rms = float(np.sqrt(np.mean(x ** 2)))
    if rms > 0:
        x *= amplitude / rms
    return TimeSeries(x, sample_rate, channel="SYN")
