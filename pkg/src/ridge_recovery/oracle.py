"""Synthetic ridge-function oracle and test profiles.

The oracle hides a direction ``a`` and a profile ``phi`` and answers point
queries ``f(x) = phi(<a, x>)`` on the unit ball with bounded noise, counting
every evaluation.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import gammaln

from .poly import Polynomial

NOISE_MODES = ("uniform", "round", "zero")
ERROR_MODES = ("absolute", "relative_value", "relative_sup")


class DomainError(ValueError):
    """Query point outside the unit ball."""


class UnsupportedProfile(TypeError):
    """Operation not available for this profile kind."""


class QuadratureError(RuntimeError):
    pass


def sample_sphere_direction(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform point on S^{n-1} (normalized Gaussian vector)."""
    if n < 1:
        raise ValueError("dimension must be positive")
    while True:
        g = rng.standard_normal(n)
        norm = np.linalg.norm(g)
        if norm > 0:
            return g / norm


@dataclass(frozen=True, eq=False)
class Profile:
    """Univariate profile on [-1, 1].

    ``kind`` is one of ``trig`` (power times trigonometric sum), ``polynomial``,
    ``constant`` or ``custom``.  For ``trig`` the coefficient vector is
    ``(A_0, A_1..A_K2, B_1..B_K2)`` and the profile is

        x**K1 * (A_0/sqrt(2) + sum_k A_k cos(w k x) + B_k sin(w k x))

    with harmonic frequency ``w`` (``frequency``, pi by default).
    """

    kind: str
    K1: int = 0
    K2: int = 0
    coefficients: np.ndarray = field(default_factory=lambda: np.zeros(0))
    frequency: float = math.pi
    func: Callable | None = field(default=None, compare=False, repr=False)
    dfunc: Callable | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("trig", "polynomial", "constant", "custom"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=float)).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)
        if self.kind == "trig" and c.size != 2 * self.K2 + 1:
            raise ValueError("trig profile needs 2*K2+1 coefficients")
        if self.kind == "constant" and c.size != 1:
            raise ValueError("constant profile needs exactly one coefficient")
        if self.kind == "custom" and self.func is None:
            raise ValueError("custom profile needs a callable")

    def __eq__(self, other):
        if not isinstance(other, Profile):
            return NotImplemented
        return (self.kind == other.kind and self.K1 == other.K1 and self.K2 == other.K2
                and self.frequency == other.frequency
                and np.array_equal(self.coefficients, other.coefficients)
                and self.func is other.func)

    def __hash__(self):
        return hash((self.kind, self.K1, self.K2, self.frequency,
                     self.coefficients.tobytes()))

    # -- constructors -----------------------------------------------------
    @classmethod
    def constant(cls, value: float) -> "Profile":
        return cls("constant", coefficients=[value])

    @classmethod
    def polynomial(cls, coeffs) -> "Profile":
        """Polynomial profile from Chebyshev coefficients."""
        return cls("polynomial", coefficients=coeffs)

    @classmethod
    def custom(cls, func, derivative=None) -> "Profile":
        return cls("custom", func=func, dfunc=derivative)

    # -- evaluation -------------------------------------------------------
    def _trig_parts(self, x):
        A0 = self.coefficients[0]
        A = self.coefficients[1: self.K2 + 1]
        B = self.coefficients[self.K2 + 1:]
        w = self.frequency * np.arange(1, self.K2 + 1)
        arg = np.multiply.outer(x, w)
        cos, sin = np.cos(arg), np.sin(arg)
        g = A0 / math.sqrt(2.0) + cos @ A + sin @ B
        dg = (cos * w) @ B - (sin * w) @ A
        return g, dg

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.coefficients[0]) if x.ndim else float(self.coefficients[0])
        if self.kind == "polynomial":
            return Polynomial(self.coefficients)(x)
        if self.kind == "custom":
            return self.func(x)
        g, _ = self._trig_parts(x)
        return x ** self.K1 * g

    def derivative(self) -> Callable:
        """Closed-form derivative as a callable."""
        if self.kind == "constant":
            return lambda x: np.zeros_like(np.asarray(x, dtype=float))
        if self.kind == "polynomial":
            return Polynomial(self.coefficients).derivative()
        if self.kind == "custom":
            if self.dfunc is None:
                raise UnsupportedProfile("custom profile has no derivative")
            return self.dfunc

        def dphi(x):
            x = np.asarray(x, dtype=float)
            g, dg = self._trig_parts(x)
            lead = self.K1 * x ** (self.K1 - 1) * g if self.K1 > 0 else 0.0
            return lead + x ** self.K1 * dg

        return dphi

    def sup_norm(self, points: int = 20001) -> float:
        t = np.linspace(-1.0, 1.0, points)
        return float(np.max(np.abs(self(t))))

    # -- serialization ----------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "custom":
            raise UnsupportedProfile("custom profiles are not serializable")
        return {
            "kind": self.kind,
            "K1": self.K1,
            "K2": self.K2,
            "coefficients": self.coefficients.tolist(),
            "frequency": self.frequency,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Profile":
        return cls(d["kind"], K1=int(d.get("K1", 0)), K2=int(d.get("K2", 0)),
                   coefficients=d["coefficients"],
                   frequency=float(d.get("frequency", math.pi)))


def make_test_profile(K1: int, K2: int, rng: np.random.Generator,
                      frequency: float = math.pi) -> Profile:
    """Random power-times-trigonometric profile with coefficients on the unit sphere."""
    if K1 < 0 or K2 < 1:
        raise ValueError("need K1 >= 0 and K2 >= 1")
    coeffs = sample_sphere_direction(2 * K2 + 1, rng)
    return Profile("trig", K1=K1, K2=K2, coefficients=coeffs, frequency=frequency)


def profile_derivative(phi: Profile) -> Callable:
    return phi.derivative()


def sphere_marginal_density(n: int):
    """Density of one coordinate of the uniform distribution on S^{n-1}."""
    if n < 2:
        raise ValueError("n must be at least 2")
    log_c = gammaln(n / 2) - gammaln((n - 1) / 2) - 0.5 * math.log(math.pi)
    c = math.exp(log_c)
    e = (n - 3) / 2

    def w(t):
        t = np.asarray(t, dtype=float)
        return c * np.clip(1.0 - t * t, 0.0, None) ** e

    return w, c


def _composite_gauss(f, a: float, b: float, panels: int, nodes: int = 20) -> float:
    x, wts = np.polynomial.legendre.leggauss(nodes)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    pts = mid[:, None] + half[:, None] * x[None, :]
    return float(np.sum(half[:, None] * wts[None, :] * f(pts)))


def _adaptive_integral(f, a, b, rtol=1e-10, max_panels=4096):
    panels = 4
    prev = _composite_gauss(f, a, b, panels)
    while panels < max_panels:
        panels *= 2
        cur = _composite_gauss(f, a, b, panels)
        if abs(cur - prev) <= rtol * max(abs(cur), np.finfo(float).tiny):
            return cur
        prev = cur
    raise QuadratureError(f"no convergence with {max_panels} panels")


def alpha_parameter(phi: Profile, n: int) -> float:
    """Sphere average of |phi'(<a, x>)|**2 over x uniform on S^{n-1}.

    Reduces to a one-dimensional integral against the coordinate marginal
    density; it never depends on the direction.  For n < 30 the substitution
    t = sin(theta) removes the endpoint behaviour of the density, for larger
    n the peak at zero is resolved with t = s / sqrt(n).
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    dphi = phi.derivative()
    w, c = sphere_marginal_density(n)
    if n >= 30:
        r = math.sqrt(n)

        def integrand(s):
            t = s / r
            return dphi(t) ** 2 * w(t) / r

        return _adaptive_integral(integrand, -r, r)

    def integrand(theta):
        t = np.sin(theta)
        return dphi(t) ** 2 * c * np.cos(theta) ** (n - 2)

    return _adaptive_integral(integrand, -math.pi / 2, math.pi / 2)


class RidgeOracle:
    """Noisy evaluation access to f(x) = phi(<a, x>) on the unit ball.

    Noise is drawn per evaluation from a generator seeded with ``seed``, so a
    replay with the same seed and the same query sequence is identical.

    ``noise`` selects uniform noise on [-eps, eps], rounding of the value to the
    eps-grid, or no noise.  ``error_mode`` scales the bound: ``absolute`` uses
    eps, ``relative_value`` uses eps * max(1, |f(x)|) and ``relative_sup`` uses
    eps * max(1, sup|phi|).
    """

    def __init__(self, a, profile: Profile, epsilon: float = 0.0,
                 noise: str = "uniform", seed: int | None = 0,
                 error_mode: str = "absolute"):
        a = np.asarray(a, dtype=float)
        norm = np.linalg.norm(a)
        if a.ndim != 1 or norm == 0:
            raise ValueError("direction must be a nonzero vector")
        self.a = a / norm
        self.profile = profile
        if epsilon < 0:
            raise ValueError("epsilon must be nonnegative")
        if noise not in NOISE_MODES:
            raise ValueError(f"noise must be one of {NOISE_MODES}")
        if error_mode not in ERROR_MODES:
            raise ValueError(f"error_mode must be one of {ERROR_MODES}")
        self.epsilon = float(epsilon)
        self.noise = noise
        self.error_mode = error_mode
        self.seed = seed
        self._rng = np.random.default_rng(seed)
        self._sup = None
        self.eval_count = 0

    @property
    def n(self) -> int:
        return self.a.size

    def _bound(self, clean):
        if self.error_mode == "absolute":
            return np.full_like(clean, self.epsilon)
        if self.error_mode == "relative_value":
            return self.epsilon * np.maximum(1.0, np.abs(clean))
        if self._sup is None:
            self._sup = self.profile.sup_norm()
        return np.full_like(clean, self.epsilon * max(1.0, self._sup))

    def _perturb(self, clean):
        if self.noise == "zero" or self.epsilon == 0.0:
            return clean
        bound = self._bound(clean)
        if self.noise == "uniform":
            return clean + bound * self._rng.uniform(-1.0, 1.0, size=clean.shape)
        return np.round(clean / bound) * bound

    def evaluate_many(self, X) -> np.ndarray:
        """Evaluate at each row of X; counts one evaluation per row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n:
            raise ValueError(f"points must have dimension {self.n}")
        if np.any(np.linalg.norm(X, axis=1) > 1.0 + 1e-12):
            raise DomainError("query point outside the unit ball")
        clean = np.asarray(self.profile(X @ self.a), dtype=float)
        self.eval_count += X.shape[0]
        return self._perturb(clean)

    def evaluate(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.ndim != 1:
            raise ValueError("evaluate takes a single point; use evaluate_many")
        return float(self.evaluate_many(x[None, :])[0])

    __call__ = evaluate

    def to_dict(self) -> dict:
        return {
            "profile": self.profile.to_dict(),
            "a": self.a.tolist(),
            "epsilon": self.epsilon,
            "noise": self.noise,
            "error_mode": self.error_mode,
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: dict) -> "RidgeOracle":
        return cls(d["a"], Profile.from_dict(d["profile"]), epsilon=d["epsilon"],
                   noise=d.get("noise", "uniform"), seed=d.get("seed"),
                   error_mode=d.get("error_mode", "absolute"))

    @classmethod
    def from_json(cls, text: str) -> "RidgeOracle":
        return cls.from_dict(json.loads(text))


def evaluate(oracle: RidgeOracle, x) -> float:
    return oracle.evaluate(x)
