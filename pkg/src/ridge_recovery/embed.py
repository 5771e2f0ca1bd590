"""Scale estimation between two fitted profiles.

Profile 1 *embeds* into profile 2 with coefficient lambda >= 1 when
``phi1(t) ~ phi2(+-t / lambda)`` on the working window.  Two estimators are
provided: a brute-force scan over a lambda grid measuring the sup-norm
discrepancy (``embed_grid``), and the fast estimator ``embed_l2`` which
minimizes the L2 mismatch ``S(mu)`` over mu = +-1/lambda in closed form.

Both use the same acceptance test: the sup of |phi1(tau) - phi2(mu tau)| over
the check grid must not exceed ``3 * omega1``.

The orientation flag records the sign of mu.  For a pair of probes it equals
sign(v1 * v2), so that ``sign * lambda`` estimates the signed ratio v2 / v1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .extrapolate import ExtrapolatedProfile
from .poly import (Polynomial, RootFindingError, minimize_scale,
                   mismatch_polynomial, mismatch_value, scale_argument)


@dataclass(frozen=True)
class EmbeddingResult:
    found: bool
    lambda_hat: float
    sign: int
    mismatch: float
    method: str
    s_min: float = math.nan

    @property
    def signed_ratio(self) -> float:
        return self.sign * self.lambda_hat


def working_poly(profile, config) -> Polynomial:
    """Polynomial in tau on [-1, 1] covering the configured t-window.

    ExtrapolatedProfiles are read on |t| <= config.window; bare polynomials are
    taken to be expressed in tau already.
    """
    if isinstance(profile, Polynomial):
        return profile
    if isinstance(profile, ExtrapolatedProfile):
        return scale_argument(profile.poly, math.sqrt(profile.n) * config.window)
    raise TypeError(f"cannot embed object of type {type(profile).__name__}")


def check_grid(config) -> np.ndarray:
    k = int(math.floor(1.0 / config.embed_nu + 1e-9))
    return np.arange(-k, k + 1) * config.embed_nu


def sup_mismatch(q1: Polynomial, q2: Polynomial, mu: float, grid) -> float:
    return float(np.max(np.abs(q1(grid) - q2(mu * grid))))


def embed_l2(phi1, phi2, config, orientation: int | None = None) -> EmbeddingResult:
    """Embedding via the global minimum of the L2 mismatch polynomial.

    ``orientation`` restricts the search to mu >= 0 (+1) or mu <= 0 (-1).
    Falls back to the grid scan when the critical points cannot be found.
    """
    q1, q2 = working_poly(phi1, config), working_poly(phi2, config)
    lo, hi = -1.0, 1.0
    if orientation == 1:
        lo = 0.0
    elif orientation == -1:
        hi = 0.0
    S = mismatch_polynomial(q1, q2)
    try:
        mu, s_min = minimize_scale(S, lo, hi,
                                   value=lambda m: mismatch_value(q1, q2, m))
    except RootFindingError:
        res = embed_grid(phi1, phi2, config, orientation=orientation)
        return res
    sign = -1 if mu < 0 else 1
    lam_max = config.lambda_max
    grid = check_grid(config)
    if abs(mu) * lam_max < 1.0 - 1e-9:
        # beyond the admissible scale range: no embedding
        return EmbeddingResult(False, lam_max, sign,
                               sup_mismatch(q1, q2, sign / lam_max, grid),
                               "l2", s_min)
    lam = min(1.0 / abs(mu), lam_max)
    mismatch = sup_mismatch(q1, q2, sign / lam, grid)
    return EmbeddingResult(mismatch <= 3.0 * config.omega1, lam, sign,
                           mismatch, "l2", s_min)


def _lambda_grid(config) -> np.ndarray:
    count = int(math.floor((config.lambda_max - 1.0) / config.lambda_step + 1e-9))
    return 1.0 + config.lambda_step * np.arange(count + 1)


def embed_grid(phi1, phi2, config, orientation: int | None = None,
               chunk: int = 4096) -> EmbeddingResult:
    """Brute-force scan of lambda over [1, lambda_max] with step config.lambda_step.

    For every lambda on the grid and each orientation the sup discrepancy on
    the check grid is computed; among accepted candidates the one with the
    smallest discrepancy is returned, the positive orientation winning ties.
    """
    q1, q2 = working_poly(phi1, config), working_poly(phi2, config)
    grid = check_grid(config)
    lams = _lambda_grid(config)
    signs = (1, -1) if orientation is None else (orientation,)
    thr = 3.0 * config.omega1

    best = None
    for s in signs:
        target = q1(s * grid)
        for start in range(0, lams.size, chunk):
            lam = lams[start: start + chunk]
            vals = q2(grid[None, :] / lam[:, None])
            d = np.max(np.abs(vals - target[None, :]), axis=1)
            j = int(np.argmin(d))
            if best is None or d[j] < best[0]:
                best = (float(d[j]), float(lam[j]), s)
    mismatch, lam, s = best
    return EmbeddingResult(mismatch <= thr, lam, s, mismatch, "grid")


def lambda_error_bound(delta_r: float, omega: float, L: float, r: float) -> float:
    """Relative error bound 28 omega / Delta_r * ln(2 L r / Delta_r) for a grid embedding.

    Requires the oscillation Delta_r to be at least 14 omega.
    """
    if omega < 0 or delta_r <= 0:
        raise ValueError("need omega >= 0 and delta_r > 0")
    if delta_r < 14.0 * omega * (1 - 1e-12):
        raise ValueError("bound requires delta_r >= 14 * omega")
    if omega == 0:
        return 0.0
    return 28.0 * omega / delta_r * math.log(2.0 * L * r / delta_r)


def uniqueness_gap(theta: float, L: float, r: float, delta: float, Delta: float) -> float:
    """Bound on |1 - theta| when h(t) and h(theta t) agree within delta.

    Returns ln(2 L r / Delta) / floor(Delta / (2 delta)).
    """
    if not 0.0 < theta < 1.0:
        raise ValueError("theta must lie in (0, 1)")
    if delta < 0 or Delta <= 0 or delta > Delta / 2 * (1 + 1e-12):
        raise ValueError("need 0 <= delta <= Delta / 2")
    if delta == 0:
        return 0.0
    k = math.floor(Delta / (2.0 * delta) + 1e-9)
    return math.log(2.0 * L * r / Delta) / k
