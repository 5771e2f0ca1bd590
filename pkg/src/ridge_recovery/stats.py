"""Order statistics used to pick a probe with a typical projection."""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf


class TypicalIndexNotFound(RuntimeError):
    pass


def phi_star(x):
    """CDF of |xi| for standard normal xi: 2 (Phi(x) - 1/2) = erf(x / sqrt(2))."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("phi_star is defined for x >= 0")
    out = erf(x / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


class EmpiricalSample:
    """Empirical distribution of a finite sample."""

    def __init__(self, values):
        v = np.asarray(values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("empty sample")
        self.values = v
        self.sorted = np.sort(v)

    def __len__(self):
        return self.values.size

    def cdf(self, x):
        """Right-continuous empirical CDF."""
        return np.searchsorted(self.sorted, x, side="right") / self.sorted.size


def dkw_condition(sample: EmpiricalSample, n: int | None = None, c: float = 1.0,
                  level: float = 1.0 / 300.0) -> tuple[bool, float]:
    """Compare the sample's empirical CDF with phi_star.

    The sup over the real line is attained at a jump, so both one-sided limits
    of the empirical CDF are checked at every sample point.  The threshold is
    ``level`` plus a finite-dimension slack ``c / n`` (none when n is omitted).
    """
    x = sample.sorted
    m = x.size
    ref = phi_star(np.clip(x, 0.0, None))
    upper = np.arange(1, m + 1) / m
    lower = np.arange(0, m) / m
    gap = float(max(np.max(np.abs(ref - upper)), np.max(np.abs(ref - lower))))
    gap = min(max(gap, 0.0), 1.0)
    slack = 0.0 if n is None else c / n
    return gap <= level + slack, gap


def median(values) -> float:
    """Lower median: the element at sorted index ceil(N/2) - 1."""
    v = np.sort(np.asarray(values, dtype=float).ravel())
    if v.size == 0:
        raise ValueError("median of an empty sequence")
    return float(v[math.ceil(v.size / 2) - 1])


def typical_candidates(K, N2: int | None = None, lo: float = 0.4,
                       hi: float = 0.5) -> np.ndarray:
    K = np.asarray(K)
    N2 = K.size if N2 is None else N2
    frac = K / N2
    return np.flatnonzero((frac >= lo - 1e-12) & (frac <= hi + 1e-12))


def select_typical_index(K, N2: int | None = None) -> int:
    """First index j with 0.4 <= K_j / N2 <= 0.5."""
    J0 = typical_candidates(K, N2)
    if J0.size == 0:
        raise TypicalIndexNotFound("no index with 0.4 <= K_j/N2 <= 0.5")
    return int(J0[0])
