"""Lempel-Ziv complexity of EEG epochs and the trial-level LZC drop rate.

Epochs are binarized around their median and parsed with the LZ76
exhaustive-history scheme: each new phrase is the shortest word not seen
anywhere in the preceding history (overlap included). The normalized value
c * log2(n) / n concentrates near 1 for random sequences.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError, InsufficientDataError
from .signals import Epoch


@dataclass
class LzcResult:
    epoch_start: float
    c_raw: int
    c_norm: float


def lz76_phrase_count(bits: Sequence[int] | np.ndarray) -> int:
    """Number of phrases in the LZ76 exhaustive production history.

    Kaspar-Schuster scan; the final phrase counts even when it is
    reproducible from the history.
    """
    s = np.asarray(bits).astype(np.int8).tolist()
    n = len(s)
    if n == 0:
        raise DataError("empty sequence")
    if n == 1:
        return 1
    i, k, l = 0, 1, 1
    c, k_max = 1, 1
    while True:
        if s[i + k - 1] == s[l + k - 1]:
            k += 1
            if l + k > n:
                c += 1
                break
        else:
            if k > k_max:
                k_max = k
            i += 1
            if i == l:
                c += 1
                l += k_max
                if l + 1 > n:
                    break
                i, k, k_max = 0, 1, 1
            else:
                k = 1
    return c


def binarize_by_median(samples: np.ndarray) -> np.ndarray:
    """1 where the sample exceeds the epoch median, 0 otherwise (ties -> 0)."""
    x = np.asarray(samples, dtype=float)
    return (x > np.median(x)).astype(np.int8)


def lzc(epoch: Epoch) -> LzcResult:
    """Median-binarized LZ76 complexity of one accepted epoch."""
    if not epoch.accepted:
        raise DataError("cannot compute LZC of a rejected epoch")
    n = epoch.samples.size
    if n < 2:
        raise DataError("need at least two samples")
    c = lz76_phrase_count(binarize_by_median(epoch.samples))
    return LzcResult(epoch.start_time, c, c * math.log2(n) / n)


def lzc_drop_rate(
    trial_epochs: Sequence[LzcResult],
    trial_duration: float,
    span: float = 120.0,
    use_normalized: bool = True,
) -> float:
    """Percentage LZC decline from the first ``span`` seconds to the last.

    Epochs are assigned to spans by their start time. Requires the trial to
    cover at least two spans and at least one epoch in each.
    """
    if trial_duration < 2 * span:
        raise InsufficientDataError(
            f"trial of {trial_duration} s shorter than two {span} s spans"
        )
    value = (lambda r: r.c_norm) if use_normalized else (lambda r: float(r.c_raw))
    first = [value(r) for r in trial_epochs if r.epoch_start < span]
    last = [value(r) for r in trial_epochs if r.epoch_start >= trial_duration - span]
    if not first or not last:
        raise InsufficientDataError("no accepted epochs in the first or last span")
    begin = float(np.mean(first))
    end = float(np.mean(last))
    return 100.0 * (begin - end) / begin
