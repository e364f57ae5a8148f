"""Statistical battery: KS normality, t-tests, ANOVA, Bonferroni, change rates.

Statistics and p-values are computed from first principles (regularized
incomplete beta via Lentz's continued fraction, asymptotic Kolmogorov
series) so that results can be compared against frozen values from an
independent statistical package without sharing any code path.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (ConfigError, DataError, DegenerateDataError,
                     InsufficientDataError)


@dataclass
class StatResult:
    statistic: float
    p_value: float
    df: float | tuple
    effect_size: float | None = None
    method: str = ""

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise DataError(f"p-value {self.p_value} outside [0, 1]")


@dataclass
class OneWayResult:
    overall: StatResult
    posthoc: np.ndarray | None = None   # pairwise Bonferroni-adjusted p matrix


@dataclass
class TwoWayResult:
    factor_a: StatResult | None
    factor_b: StatResult | None
    interaction: StatResult | None


# --- special functions -----------------------------------------------------

_FPMIN = 1e-300


def _betacf(a: float, b: float, x: float) -> float:
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, 300):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 3e-16:
            break
    return h


def betainc_reg(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta I_x(a, b), accurate to ~1e-14."""
    if a <= 0 or b <= 0:
        raise ConfigError("beta parameters must be positive")
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_bt = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
             + a * math.log(x) + b * math.log1p(-x))
    bt = math.exp(ln_bt)
    if x < (a + 1.0) / (a + b + 2.0):
        return bt * _betacf(a, b, x) / a
    return 1.0 - bt * _betacf(b, a, 1.0 - x) / b


def t_sf_two_sided(t: float, df: float) -> float:
    """Two-sided p from the t distribution."""
    if math.isinf(t):
        return 0.0
    return betainc_reg(df / 2.0, 0.5, df / (df + t * t))


def f_sf(f_stat: float, df1: float, df2: float) -> float:
    """Upper tail of the F distribution."""
    if math.isinf(f_stat):
        return 0.0
    if f_stat <= 0:
        return 1.0
    return betainc_reg(df2 / 2.0, df1 / 2.0, df2 / (df2 + df1 * f_stat))


def kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov distribution tail Q(lambda)."""
    if lam <= 0:
        return 1.0
    total = 0.0
    for j in range(1, 101):
        term = 2.0 * (-1.0) ** (j - 1) * math.exp(-2.0 * j * j * lam * lam)
        total += term
        if abs(term) < 1e-16:
            break
    return min(1.0, max(0.0, total))


def _normal_cdf(z: np.ndarray) -> np.ndarray:
    return np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in z])


# --- operations ------------------------------------------------------------

def change_rate(before: float, after: float) -> float:
    """(before - after) / before, the amino-ratio change fraction."""
    if before == 0:
        raise DataError("change rate undefined for a zero 'before' value")
    return (before - after) / before


def ks_normality(sample: Sequence[float]) -> StatResult:
    """One-sample KS against a normal with the sample's mean and std.

    Parameters are estimated from the data (Lilliefors-style null, noted in
    ``method``); the p-value uses the asymptotic Kolmogorov distribution with
    the usual finite-n effective lambda, so it is conservative for rejection.
    """
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n < 3:
        raise InsufficientDataError("KS normality needs at least 3 values")
    sd = float(np.std(x, ddof=1))
    if sd == 0:
        raise InsufficientDataError("zero-variance sample")
    z = _normal_cdf((x - x.mean()) / sd)
    i = np.arange(1, n + 1)
    d_plus = float(np.max(i / n - z))
    d_minus = float(np.max(z - (i - 1) / n))
    d = max(d_plus, d_minus)
    lam = d * (math.sqrt(n) + 0.12 + 0.11 / math.sqrt(n))
    return StatResult(d, kolmogorov_sf(lam), df=n,
                      method="ks-normality (Lilliefors-style null, asymptotic p)")


def t_test(a: Sequence[float], b: Sequence[float], paired: bool = False) -> StatResult:
    """Two-sided t-test; unpaired uses the pooled-variance form.

    Zero-variance samples with equal means give p = 1 by convention; with
    unequal means they are a degenerate-sample error.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if paired:
        if a.size != b.size:
            raise ConfigError("paired test needs equal-length samples")
        if a.size < 2:
            raise InsufficientDataError("need at least 2 pairs")
        d = a - b
        df = a.size - 1
        sd = float(np.std(d, ddof=1))
        if sd == 0.0:
            if float(np.mean(d)) == 0.0:
                return StatResult(0.0, 1.0, df, method="paired-t")
            raise DegenerateDataError("constant nonzero differences: t undefined")
        t = float(np.mean(d)) / (sd / math.sqrt(a.size))
        return StatResult(t, t_sf_two_sided(t, df), df, method="paired-t")
    if a.size < 2 or b.size < 2:
        raise InsufficientDataError("need at least 2 values per group")
    df = a.size + b.size - 2
    sp2 = (((a.size - 1) * np.var(a, ddof=1) + (b.size - 1) * np.var(b, ddof=1)) / df)
    diff = float(np.mean(a) - np.mean(b))
    if sp2 == 0.0:
        if diff == 0.0:
            return StatResult(0.0, 1.0, df, method="unpaired-t-pooled")
        raise DegenerateDataError("zero pooled variance with unequal means")
    t = diff / math.sqrt(sp2 * (1.0 / a.size + 1.0 / b.size))
    return StatResult(float(t), t_sf_two_sided(float(t), df), df,
                      method="unpaired-t-pooled")


def bonferroni(p_values: Sequence[float], n_comparisons: int | None = None) -> np.ndarray:
    """Multiply by the comparison count and clamp at 1 (order-preserving)."""
    p = np.asarray(p_values, dtype=float)
    m = n_comparisons if n_comparisons is not None else p.size
    if m < 1:
        raise ConfigError("need at least one comparison")
    return np.minimum(1.0, p * m)


def anova_oneway(groups: Sequence[Sequence[float]], posthoc: bool = False) -> OneWayResult:
    """One-way ANOVA with eta-squared; optional Bonferroni post-hoc t matrix."""
    gs = [np.asarray(g, dtype=float) for g in groups]
    if len(gs) < 2:
        raise ConfigError("need at least two groups")
    if any(g.size < 2 for g in gs):
        raise InsufficientDataError("each group needs at least 2 values")
    allx = np.concatenate(gs)
    grand = allx.mean()
    ss_between = float(sum(g.size * (g.mean() - grand) ** 2 for g in gs))
    ss_within = float(sum(np.sum((g - g.mean()) ** 2) for g in gs))
    ss_total = ss_between + ss_within
    if ss_total == 0.0:
        raise DegenerateDataError("all observations identical")
    df_b = len(gs) - 1
    df_w = allx.size - len(gs)
    if ss_within == 0.0:
        f_stat = math.inf
    else:
        f_stat = (ss_between / df_b) / (ss_within / df_w)
    overall = StatResult(f_stat, f_sf(f_stat, df_b, df_w), (df_b, df_w),
                         effect_size=ss_between / ss_total, method="oneway-anova")
    matrix = None
    if posthoc:
        k = len(gs)
        m = k * (k - 1) // 2
        matrix = np.full((k, k), np.nan)
        for i in range(k):
            for j in range(i + 1, k):
                p_raw = t_test(gs[i], gs[j]).p_value
                matrix[i, j] = matrix[j, i] = min(1.0, p_raw * m)
    return OneWayResult(overall, matrix)


def anova_twoway(table) -> TwoWayResult:
    """Balanced two-way ANOVA with partial eta-squared per effect.

    ``table`` is observations indexed [level of A][level of B][replicate];
    ragged (unbalanced) input is rejected. With one replicate per cell the
    interaction mean square serves as the error term and the interaction
    itself is untestable (None); a one-level factor likewise reports None.
    """
    try:
        y = np.asarray(table, dtype=float)
    except ValueError as exc:
        raise ConfigError("unbalanced two-way design is unsupported") from exc
    if y.dtype == object:
        raise ConfigError("unbalanced two-way design is unsupported")
    if y.ndim == 2:
        y = y[:, :, None]
    if y.ndim != 3:
        raise ConfigError("table must be indexed [A][B][replicate]")
    a_lv, b_lv, n = y.shape
    if a_lv < 2:
        raise ConfigError("factor A needs at least two levels")
    grand = y.mean()
    mean_a = y.mean(axis=(1, 2))
    mean_b = y.mean(axis=(0, 2))
    mean_cell = y.mean(axis=2)
    ss_a = b_lv * n * float(np.sum((mean_a - grand) ** 2))
    ss_b = a_lv * n * float(np.sum((mean_b - grand) ** 2))
    ss_cells = n * float(np.sum((mean_cell - grand) ** 2))
    ss_ab = max(0.0, ss_cells - ss_a - ss_b)
    ss_err = float(np.sum((y - mean_cell[:, :, None]) ** 2))
    df_a, df_b = a_lv - 1, b_lv - 1
    df_ab = df_a * df_b
    df_err = a_lv * b_lv * (n - 1)
    if df_err == 0:
        # saturated design: test main effects against the interaction
        ss_err, df_err = ss_ab, df_ab
        ss_ab, df_ab = 0.0, 0
    if df_err == 0:
        raise DegenerateDataError("no error degrees of freedom")
    ms_err = ss_err / df_err

    def effect(ss, df, name):
        if df == 0:
            return None
        if ms_err == 0.0:
            f_stat = math.inf if ss > 0 else 0.0
        else:
            f_stat = (ss / df) / ms_err
        partial = ss / (ss + ss_err) if (ss + ss_err) > 0 else 0.0
        return StatResult(f_stat, f_sf(f_stat, df, df_err), (df, df_err),
                          effect_size=partial, method=f"twoway-anova-{name}")

    return TwoWayResult(effect(ss_a, df_a, "A"), effect(ss_b, df_b, "B"),
                        effect(ss_ab, df_ab, "interaction"))
