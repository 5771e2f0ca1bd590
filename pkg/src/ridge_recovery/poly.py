"""Univariate polynomials on [-1, 1].

Polynomials are stored as Chebyshev coefficient vectors.  Fitting is done by
least squares on uniform grids through a QR factorization of the Chebyshev
design matrix; the mismatch function used to compare two profiles at
different scales is produced as an exact polynomial in the scale parameter.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from numpy.polynomial import chebyshev as cheb
from numpy.polynomial import polynomial as mono
from scipy.linalg import solve_triangular


class IllConditionedFit(ValueError):
    """Raised when the least-squares design matrix is numerically rank deficient."""


class RootFindingError(RuntimeError):
    """Raised when the critical points of a mismatch polynomial cannot be found."""


@dataclass(frozen=True)
class Polynomial:
    """Real polynomial of degree at most ``degree`` in the Chebyshev basis.

    The leading coefficient may vanish, so ``degree`` is an upper bound.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float)).copy()
        if c.ndim != 1 or c.size == 0:
            raise ValueError("coefficients must be a non-empty 1-D sequence")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return self.coeffs.size - 1

    def __call__(self, x):
        return cheb.chebval(x, self.coeffs)

    def derivative(self) -> "Polynomial":
        if self.degree == 0:
            return Polynomial([0.0])
        return Polynomial(cheb.chebder(self.coeffs))

    def to_monomial(self) -> np.ndarray:
        """Power-basis coefficients, lowest order first."""
        return cheb.cheb2poly(self.coeffs)

    @classmethod
    def from_monomial(cls, coeffs) -> "Polynomial":
        return cls(cheb.poly2cheb(np.asarray(coeffs, dtype=float)))

    @classmethod
    def constant(cls, value: float) -> "Polynomial":
        return cls([float(value)])

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())


@dataclass(frozen=True)
class UniformGridSamples:
    """Values observed on the grid ``{k/N : k = -N..N}``."""

    half_count: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).copy()
        if self.half_count < 1:
            raise ValueError("half_count must be positive")
        if v.shape != (2 * self.half_count + 1,):
            raise ValueError(
                f"expected {2 * self.half_count + 1} values, got shape {v.shape}"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def nodes(self) -> np.ndarray:
        n = self.half_count
        return np.arange(-n, n + 1) / n


def eval_poly(p: Polynomial, x):
    return p(x)


def fit_least_squares(samples: UniformGridSamples, degree: int,
                      rcond: float = 1e-12) -> Polynomial:
    """Least-squares polynomial of degree <= ``degree`` on the sample grid.

    The Chebyshev design matrix is factored as QR and the triangular system
    solved directly; the normal equations are never formed.  ``rcond`` bounds
    the admissible ratio between the smallest and largest diagonal entries
    of R.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    x = samples.nodes
    if x.size <= degree:
        raise ValueError(
            f"{x.size} grid points cannot determine a degree-{degree} fit"
        )
    V = cheb.chebvander(x, degree)
    q, r = np.linalg.qr(V, mode="reduced")
    diag = np.abs(np.diag(r))
    if diag.min() <= rcond * diag.max():
        raise IllConditionedFit(
            f"design matrix rank deficient (min/max |R_ii| = {diag.min() / diag.max():.3e})"
        )
    coeffs = solve_triangular(r, q.T @ samples.values, lower=False)
    return Polynomial(coeffs)


def scale_argument(p: Polynomial, mu: float) -> Polynomial:
    """Return q with q(t) = p(mu * t).

    Computed by interpolating p(mu * t) at Chebyshev points, which is exact
    for polynomials up to rounding and avoids the monomial basis.
    """
    mu = float(mu)
    if mu == 1.0:
        return p
    d = p.degree
    if d == 0:
        return p
    return Polynomial(cheb.chebinterpolate(lambda t: p(mu * t), d))


def _power_moments(m: int, dtype=float) -> np.ndarray:
    """Integrals of t**k over [-1, 1] for k = 0..m."""
    k = np.arange(m + 1)
    num = np.where(k % 2 == 0, 2, 0).astype(dtype)
    return num / (k + 1).astype(dtype)


@lru_cache(maxsize=None)
def _basis_maps(d: int) -> tuple[np.ndarray, np.ndarray]:
    """Extended-precision Chebyshev->monomial and monomial->Chebyshev matrices."""
    eye = np.eye(d + 1, dtype=np.longdouble)
    to_mono = np.zeros((d + 1, d + 1), dtype=np.longdouble)
    to_cheb = np.zeros_like(to_mono)
    for j, e in enumerate(eye):
        col = cheb.cheb2poly(e)
        to_mono[: col.size, j] = col
        col = cheb.poly2cheb(e)
        to_cheb[: col.size, j] = col
    return to_mono, to_cheb


def mismatch_polynomial(p1: Polynomial, p2: Polynomial) -> Polynomial:
    """S(mu) = integral over [-1, 1] of (p1(t) - p2(mu t))**2 dt, as a polynomial in mu.

    p2(mu t) is expanded in powers of t with coefficients b_j mu**j and the
    t-integrals are taken term by term, so S has degree <= 2 * deg(p2).  The
    expansion runs in extended precision: monomial coefficients of a degree-d
    Chebyshev series grow like 2**d and cancel in the sums.
    """
    ld = np.longdouble
    a = _basis_maps(p1.degree)[0] @ p1.coeffs.astype(ld)
    b = _basis_maps(p2.degree)[0] @ p2.coeffs.astype(ld)
    da, db = a.size - 1, b.size - 1
    moments = _power_moments(2 * max(da, db), ld)

    s = np.zeros(2 * db + 1, dtype=ld)
    ia = np.arange(da + 1)
    ib = np.arange(db + 1)
    s[0] = a @ moments[ia[:, None] + ia[None, :]] @ a
    # cross term: -2 * sum_j b_j mu^j * integral p1(t) t^j dt
    s[: db + 1] -= 2 * b * (moments[ia[:, None] + ib[None, :]].T @ a)
    # quadratic term: sum_{j,k} b_j b_k mu^{j+k} * integral t^{j+k} dt
    outer = np.outer(b, b) * moments[ib[:, None] + ib[None, :]]
    for j in range(db + 1):
        s[j: j + db + 1] += outer[j]
    return Polynomial((_basis_maps(2 * db)[1] @ s).astype(float))


def _real_roots_in(dp: Polynomial, lo: float, hi: float,
                   imag_tol: float = 1e-9) -> np.ndarray:
    c = np.asarray(dp.coeffs, dtype=float)
    big = np.max(np.abs(c)) if c.size else 0.0
    # negligible leading terms only contribute roots near infinity
    keep = np.flatnonzero(np.abs(c) > 4 * np.finfo(float).eps * big)
    c = c[: keep[-1] + 1] if keep.size else c[:0]
    if c.size <= 1:
        return np.empty(0)
    try:
        roots = cheb.chebroots(c)
    except np.linalg.LinAlgError as exc:
        raise RootFindingError(str(exc)) from exc
    if not np.all(np.isfinite(roots)):
        raise RootFindingError("non-finite roots of the derivative")
    # Newton polish in complex arithmetic: the colleague-matrix eigenvalues of
    # badly scaled derivatives can sit well off the real axis before polishing
    d2 = cheb.chebder(c)
    for _ in range(4):
        f = cheb.chebval(roots, c)
        g = cheb.chebval(roots, d2)
        ok = (g != 0) & np.isfinite(f) & np.isfinite(g)
        roots = np.where(ok, roots - np.divide(f, g, out=np.zeros_like(f), where=ok), roots)
    roots = roots[np.abs(roots.imag) <= imag_tol].real
    return roots[(roots > lo) & (roots < hi)]


def mismatch_value(p1: Polynomial, p2: Polynomial, mu) -> np.ndarray:
    """S(mu) by Gauss-Legendre quadrature of the defining integral (exact degree).

    Near a good match the residual is small and so is the rounding error,
    unlike evaluating the expanded polynomial S whose error is ~eps |p|**2.
    """
    t, w = leggauss(max(p1.degree, p2.degree) + 1)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    r = p1(t)[None, :] - p2(np.multiply.outer(mu, t))
    return (r * r) @ w


def minimize_scale(S: Polynomial, lo: float = -1.0, hi: float = 1.0,
                   rtol: float | None = None, value=None) -> tuple[float, float]:
    """Global minimizer of S on [lo, hi].

    Candidates are the interval ends and the real critical points inside.
    ``value`` optionally evaluates S more accurately than the polynomial
    (see ``mismatch_value``) and is then used to rank candidates.  Ties are
    resolved toward larger |mu|, then toward positive mu.  Without ``value``
    a tie is anything within ``rtol`` (default 4 eps) times the coefficient
    mass of S; with it, within ``rtol`` (default 1e-12) relative to the minimum.
    """
    if not lo < hi:
        raise ValueError("empty interval")
    roots = _real_roots_in(S.derivative(), lo, hi)
    cand = np.concatenate([[lo, hi], roots])
    mass = max(np.abs(S.coeffs).sum(), np.finfo(float).tiny)
    if value is None:
        vals = S(cand)
        smin = vals.min()
        tol = (4 * np.finfo(float).eps if rtol is None else rtol) * mass
    else:
        vals = np.asarray(value(cand), dtype=float)
        smin = vals.min()
        tol = (1e-12 if rtol is None else rtol) * smin + np.finfo(float).eps ** 2 * mass
    tied = np.flatnonzero(vals <= smin + tol)
    order = np.lexsort((-np.sign(cand[tied]), -np.abs(cand[tied])))
    k = tied[order[0]]
    return float(cand[k]), float(vals[k])
