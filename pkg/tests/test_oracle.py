import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose

from ridge_recovery.oracle import (DomainError, Profile, QuadratureError, RidgeOracle,
                                   UnsupportedProfile, alpha_parameter, evaluate,
                                   make_test_profile, profile_derivative,
                                   sample_sphere_direction, sphere_marginal_density)
from ridge_recovery.poly import Polynomial


def square():
    return Profile.polynomial(Polynomial.from_monomial([0, 0, 1]).coeffs)


def identity():
    return Profile.polynomial([0.0, 1.0])


class TestEvaluate:
    def test_constant(self):
        orc = RidgeOracle(np.ones(4), Profile.constant(5.0))
        assert evaluate(orc, np.array([0.1, -0.3, 0.2, 0.0])) == 5.0

    def test_linear_on_axis(self):
        orc = RidgeOracle([1, 0, 0], identity())
        assert orc(np.array([0.3, 0.0, 0.0])) == pytest.approx(0.3, abs=1e-15)

    def test_noise_bound(self):
        rng = np.random.default_rng(2)
        a = sample_sphere_direction(10, rng)
        orc = RidgeOracle(a, square(), epsilon=1e-20, seed=4)
        X = rng.standard_normal((200, 10))
        X /= 1.5 * np.linalg.norm(X, axis=1, keepdims=True)
        y = orc.evaluate_many(X)
        assert np.all(np.abs(y - (X @ orc.a) ** 2) <= 1e-20 * (1 + 1e-12))

    def test_domain(self):
        orc = RidgeOracle([1, 0], identity())
        with pytest.raises(DomainError):
            orc(np.array([1.0, 0.1]))
        orc(np.array([1.0 + 1e-13, 0.0]))  # within tolerance

    def test_counter(self):
        orc = RidgeOracle([1, 0], identity())
        orc(np.zeros(2))
        orc.evaluate_many(np.zeros((7, 2)))
        assert orc.eval_count == 8

    def test_direction_normalized(self):
        orc = RidgeOracle([3.0, 4.0], identity())
        assert abs(np.linalg.norm(orc.a) - 1) <= 1e-12

    def test_replay_is_identical(self):
        X = np.full((5, 3), 0.2)
        y1 = RidgeOracle([1, 2, 3], square(), 1e-3, seed=9).evaluate_many(X)
        y2 = RidgeOracle([1, 2, 3], square(), 1e-3, seed=9).evaluate_many(X)
        assert np.array_equal(y1, y2)

    def test_batched_equals_sequential(self):
        X = np.random.default_rng(0).uniform(-0.5, 0.5, (6, 3))
        o1 = RidgeOracle([1, 2, 3], square(), 1e-3, seed=9)
        o2 = RidgeOracle([1, 2, 3], square(), 1e-3, seed=9)
        seq = np.array([o2(x) for x in X])
        # same noise stream; only the inner products may differ in the last bit
        assert_allclose(o1.evaluate_many(X), seq, rtol=1e-14, atol=0)

    @pytest.mark.parametrize("mode", ["uniform", "round", "zero"])
    def test_noise_modes_bounded(self, mode):
        orc = RidgeOracle([1, 0], identity(), epsilon=1e-3, noise=mode, seed=1)
        x = np.linspace(-1, 1, 50)
        y = orc.evaluate_many(np.column_stack([x, np.zeros_like(x)]))
        assert np.all(np.abs(y - x) <= 1e-3 * (1 + 1e-12))
        if mode == "zero":
            assert np.array_equal(y, x)

    def test_relative_mode_scales(self):
        phi = Profile.constant(100.0)
        orc = RidgeOracle([1, 0], phi, epsilon=1e-3, error_mode="relative_value", seed=3)
        y = orc.evaluate_many(np.zeros((200, 2)))
        dev = np.abs(y - 100.0)
        assert dev.max() <= 0.1 and dev.max() > 1e-3

    def test_relative_sup_mode(self):
        phi = Profile.polynomial([0.0, 3.0])
        orc = RidgeOracle([1, 0], phi, epsilon=1e-3, error_mode="relative_sup", seed=3)
        y = orc.evaluate_many(np.zeros((200, 2)))
        assert np.max(np.abs(y)) <= 3e-3 * (1 + 1e-9)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            RidgeOracle([0, 0], identity())
        with pytest.raises(ValueError):
            RidgeOracle([1, 0], identity(), noise="gauss")
        with pytest.raises(ValueError):
            RidgeOracle([1, 0], identity(), epsilon=-1)

    def test_values_bounded_by_sup_plus_eps(self):
        rng = np.random.default_rng(5)
        phi = make_test_profile(8, 7, rng)
        orc = RidgeOracle(sample_sphere_direction(20, rng), phi, epsilon=1e-6, seed=0)
        X = rng.uniform(-1, 1, (500, 20))
        X /= np.maximum(1.0, np.linalg.norm(X, axis=1, keepdims=True))
        assert np.max(np.abs(orc.evaluate_many(X))) <= phi.sup_norm() + 1e-6 + 1e-9

    def test_json_round_trip(self):
        rng = np.random.default_rng(1)
        orc = RidgeOracle(sample_sphere_direction(6, rng), make_test_profile(2, 3, rng),
                          epsilon=1e-8, seed=42)
        back = RidgeOracle.from_json(orc.to_json())
        assert np.array_equal(back.a, orc.a) and back.profile == orc.profile
        X = np.full((3, 6), 0.1)
        assert np.array_equal(back.evaluate_many(X), orc.evaluate_many(X))

    def test_custom_not_serializable(self):
        with pytest.raises(UnsupportedProfile):
            Profile.custom(np.sin).to_dict()


class TestProfiles:
    def test_constant_term_only(self):
        phi = Profile("trig", K1=0, K2=1, coefficients=[math.sqrt(2), 0, 0])
        assert_allclose(phi(np.linspace(-1, 1, 7)), 1.0, atol=1e-15)

    def test_class_sup_bound(self):
        rng = np.random.default_rng(0)
        x = np.linspace(-1, 1, 20001)
        for _ in range(20):
            assert np.max(np.abs(make_test_profile(8, 7, rng)(x))) <= 4.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10), st.integers(1, 8), st.integers(0, 2 ** 32 - 1))
    def test_coefficients_on_sphere(self, K1, K2, seed):
        phi = make_test_profile(K1, K2, np.random.default_rng(seed))
        assert phi.coefficients.size == 2 * K2 + 1
        assert abs(np.linalg.norm(phi.coefficients) - 1) <= 1e-12

    def test_invalid(self):
        with pytest.raises(ValueError):
            make_test_profile(-1, 2, np.random.default_rng(0))
        with pytest.raises(ValueError):
            Profile("trig", K1=0, K2=2, coefficients=[1, 2])

    def test_derivative_constant(self):
        assert np.all(profile_derivative(Profile.constant(2.0))(np.linspace(-1, 1, 5)) == 0)

    def test_derivative_square(self):
        x = np.linspace(-1, 1, 9)
        assert_allclose(profile_derivative(square())(x), 2 * x, atol=1e-14)

    def test_derivative_finite_differences(self):
        phi = make_test_profile(8, 7, np.random.default_rng(3))
        x = np.linspace(-0.98, 0.98, 50)
        h = 1e-6
        fd = (phi(x + h) - phi(x - h)) / (2 * h)
        assert np.max(np.abs(profile_derivative(phi)(x) - fd)) <= 1e-6

    def test_derivative_unsupported(self):
        with pytest.raises(UnsupportedProfile):
            Profile.custom(np.sin).derivative()
        assert Profile.custom(np.sin, np.cos).derivative()(0.0) == 1.0


class TestAlpha:
    @pytest.mark.parametrize("n", [2, 3, 7, 29, 30, 50, 200])
    def test_linear_profile(self, n):
        assert alpha_parameter(identity(), n) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("n", [3, 10, 50, 120])
    def test_square_profile(self, n):
        assert alpha_parameter(square(), n) == pytest.approx(4.0 / n, abs=1e-9)

    def test_density_normalized(self):
        for n in (3, 5, 50):
            w, _ = sphere_marginal_density(n)
            t = np.linspace(-1, 1, 200001)
            assert np.trapezoid(w(t), t) == pytest.approx(1.0, abs=1e-6)

    def test_class_alpha_range(self):
        rng = np.random.default_rng(2024)
        vals = [alpha_parameter(make_test_profile(8, 7, rng), 50) for _ in range(10)]
        assert all(1e-8 <= v <= 1e-4 for v in vals)

    def test_independent_of_direction(self):
        # alpha is a property of the profile alone
        phi = make_test_profile(3, 2, np.random.default_rng(0))
        assert alpha_parameter(phi, 10) == alpha_parameter(phi, 10)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            alpha_parameter(identity(), 1)

    def test_nonconvergence_reported(self):
        wild = Profile.custom(lambda x: np.sin(1e7 * x), lambda x: 1e7 * np.cos(1e7 * x))
        with pytest.raises(QuadratureError):
            alpha_parameter(wild, 5)


class TestSphere:
    def test_one_dimension(self):
        rng = np.random.default_rng(0)
        draws = np.array([sample_sphere_direction(1, rng)[0] for _ in range(2000)])
        assert set(np.unique(draws)) == {-1.0, 1.0}
        assert abs(np.mean(draws > 0) - 0.5) < 0.05

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 200), st.integers(0, 2 ** 32 - 1))
    def test_unit_norm(self, n, seed):
        assert abs(np.linalg.norm(sample_sphere_direction(n, np.random.default_rng(seed))) - 1) <= 1e-12

    def test_mean_near_zero(self):
        rng = np.random.default_rng(1)
        X = np.array([sample_sphere_direction(50, rng) for _ in range(10_000)])
        assert np.max(np.abs(X.mean(axis=0))) <= 0.05
