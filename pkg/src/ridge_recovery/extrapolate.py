"""Profiles of f along probe directions.

For a probe vector gamma the oracle is sampled at ``gamma * k / N1`` and a
degree-M least-squares polynomial p is fitted in the grid variable
s = k / N1.  The resulting profile is read as ``t -> p(sqrt(n) t)`` so that it
approximates ``phi(v t)`` with ``v = sqrt(n) <a, gamma>``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .poly import Polynomial, UniformGridSamples, fit_least_squares


@dataclass(frozen=True)
class ExtrapolatedProfile:
    """Fitted profile tied to its probe vector.

    ``poly`` lives on the grid variable s in [-1, 1]; calling the profile with t
    evaluates ``poly(sqrt(n) t)``.  ``valid_halfwidth`` is the t-range covered
    by the sampling grid (1/sqrt(n)); values beyond it are extrapolated.
    """

    gamma: np.ndarray
    poly: Polynomial
    n: int

    @property
    def valid_halfwidth(self) -> float:
        return 1.0 / math.sqrt(self.n)

    def extrapolation_halfwidth(self, sigma: float) -> float:
        """Guaranteed lower bound for min(1, sigma / (2 |v_gamma|)).

        Uses |v_gamma| <= sqrt(n) |gamma| since v_gamma itself is unknown.
        """
        vmax = math.sqrt(self.n) * float(np.linalg.norm(self.gamma))
        return 1.0 if vmax == 0 else min(1.0, sigma / (2.0 * vmax))

    def is_extrapolated(self, t) -> np.ndarray:
        return np.abs(np.asarray(t, dtype=float)) > self.valid_halfwidth * (1 + 1e-12)

    def __call__(self, t):
        return self.poly(math.sqrt(self.n) * np.asarray(t, dtype=float))


def extrapolate_profile(oracle, gamma, config) -> ExtrapolatedProfile:
    """Sample along gamma with 2*N1+1 evaluations and fit a degree-M polynomial."""
    gamma = np.asarray(gamma, dtype=float)
    if np.linalg.norm(gamma) > 1.0 + 1e-12:
        raise ValueError("probe vector must lie in the unit ball")
    N1 = config.N1
    s = np.arange(-N1, N1 + 1) / N1
    y = oracle.evaluate_many(np.outer(s, gamma))
    p = fit_least_squares(UniformGridSamples(N1, y), config.M)
    return ExtrapolatedProfile(gamma=gamma, poly=p, n=gamma.size)


@dataclass(frozen=True)
class BudgetReport:
    """Margins of the degree and noise conditions for the extrapolation step.

    degree condition:  M >= C_sigma * ln(1/omega1)
    noise condition:   ln(1/eps) >= C * (ln(1/omega1) + M ln n)
    """

    degree_lhs: float
    degree_rhs: float
    noise_lhs: float
    noise_rhs: float

    @property
    def degree_ok(self) -> bool:
        return self.degree_lhs >= self.degree_rhs

    @property
    def noise_ok(self) -> bool:
        return self.noise_lhs >= self.noise_rhs

    @property
    def satisfied(self) -> bool:
        return self.degree_ok and self.noise_ok

    @property
    def violations(self) -> list[str]:
        out = []
        if not self.degree_ok:
            out.append("degree")
        if not self.noise_ok:
            out.append("noise")
        return out

    def __str__(self):
        return (
            f"degree: M={self.degree_lhs:g} vs {self.degree_rhs:.4g} "
            f"({'ok' if self.degree_ok else 'VIOLATED'}); "
            f"noise: ln(1/eps)={self.noise_lhs:.4g} vs {self.noise_rhs:.4g} "
            f"({'ok' if self.noise_ok else 'VIOLATED'})"
        )


def check_extrapolation_budget(M: int, epsilon: float, omega1: float, n: int,
                               c_sigma: float = 1.0, c_noise: float = 0.5) -> BudgetReport:
    """Advisory check of (M, eps, omega1, n) against the extrapolation conditions.

    The constants are existential in the analysis, so they are inputs here and
    the report carries margins instead of failing.
    """
    log_w = math.log(1.0 / omega1)
    noise_lhs = math.inf if epsilon == 0 else math.log(1.0 / epsilon)
    return BudgetReport(
        degree_lhs=float(M),
        degree_rhs=c_sigma * log_w,
        noise_lhs=noise_lhs,
        noise_rhs=c_noise * (log_w + M * math.log(n)),
    )


def config_budget(config) -> BudgetReport:
    """Budget check with the constants carried by an AlgorithmConfig."""
    return config.budget()


def interpolation_error_bound(M: int, rho: float, Q: float, epsilon: float,
                              C: float = 1.0) -> float:
    """C M^{3/2} (Q rho^{-M} / (rho - 1) + eps) for |x| <= 1.

    ``psi`` analytic inside the Bernstein ellipse E_rho and bounded by Q there.
    """
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    return C * M ** 1.5 * (Q * rho ** (-M) / (rho - 1.0) + epsilon)


def extrapolation_error_bound(M: int, x: float, rho: float, Q: float,
                              epsilon: float, C: float = 1.0) -> float:
    """Error bound at 1 <= |x| < (rho + 1/rho)/2 for the least-squares fit.

    With r = (|x| + sqrt(x^2 - 1)) / rho the bound is
    C (Q (M^{3/2}/(rho-1) + r/(1-r)) r^M + M^{3/2} (rho r)^M eps).
    """
    ax = abs(x)
    if rho <= 1:
        raise ValueError("rho must exceed 1")
    if not 1.0 <= ax < 0.5 * (rho + 1.0 / rho):
        raise ValueError("x must satisfy 1 <= |x| < (rho + 1/rho)/2")
    r = (ax + math.sqrt(ax * ax - 1.0)) / rho
    m = M ** 1.5
    return C * (Q * (m / (rho - 1.0) + r / (1.0 - r)) * r ** M
                + m * (rho * r) ** M * epsilon)
