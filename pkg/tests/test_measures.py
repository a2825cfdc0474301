import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lcmarg.grassmann import Subspace, haar_sample
from lcmarg.measures import (
    FourierBudget, NoDensity, builtin, characteristic_function, chi_moment, convolution, covariance_estimate,
    density_agreement_pvalue, describe, gaussian_smoothing, is_log_concave_on_segments, isotropize, marginal,
    marginal_density_at_zero, parse_measure, product, pushforward, scaled, special_measure_pair,
)

from oracle_values import CUBE2_DIAGONAL_F0, GAUSS4_I_MINUS_1

BUILTINS = [("gaussian", None), ("cube", None), ("lp_ball", 1), ("lp_ball", 2), ("simplex", None),
            ("laplace_product", None)]
DIAGONAL = Subspace.from_basis([[1.0], [1.0]])


class TestBuiltins:
    @pytest.mark.parametrize("name,p", BUILTINS)
    @pytest.mark.parametrize("n", [2, 5])
    def test_isotropic_and_centered(self, name, p, n):
        mu = builtin(name, n, p)
        assert np.allclose(mu.covariance, np.eye(n))
        X = mu.draw(1, 40_000)
        C, se = covariance_estimate(mu, 40_000, 2)
        assert np.all(np.abs(C - np.eye(n)) <= 5 * se + 1e-12)
        assert np.all(np.abs(X.mean(0)) <= 5 * X.std(0) / math.sqrt(len(X)))

    @pytest.mark.parametrize("n", [1, 3, 6])
    def test_cube_density(self, n):
        mu = builtin("cube", n)
        assert mu.density(np.zeros((1, n)))[0] == pytest.approx((2 * math.sqrt(3)) ** -n)
        assert mu.density(np.full((1, n), 1.8))[0] == 0

    @pytest.mark.parametrize("name,p", BUILTINS)
    def test_sampler_matches_density(self, name, p):
        assert density_agreement_pvalue(builtin(name, 3, p), 3) > 0.001

    @pytest.mark.parametrize("name,p", BUILTINS)
    def test_log_concave(self, name, p):
        assert is_log_concave_on_segments(builtin(name, 3, p), 4)

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown measure"):
            builtin("cubee", 3)

    def test_draws_are_reproducible(self):
        mu = builtin("simplex", 4)
        assert np.array_equal(mu.draw(5, 100), mu.draw(5, 100))


class TestConstructions:
    def test_product_covariance_and_density(self):
        mu = product(builtin("cube", 2), builtin("gaussian", 3))
        assert mu.dim == 5 and np.allclose(mu.covariance, np.eye(5))
        x = np.zeros((1, 5))
        assert mu.density(x)[0] == pytest.approx((2 * math.sqrt(3)) ** -2 * (2 * math.pi) ** -1.5)

    def test_convolution_covariance(self):
        mu = convolution(builtin("cube", 3), builtin("gaussian", 3))
        assert np.allclose(mu.covariance, 2 * np.eye(3))
        assert not mu.has_density
        C, se = covariance_estimate(mu, 50_000, 1)
        assert np.all(np.abs(C - 2 * np.eye(3)) <= 5 * se)

    def test_pushforward_density(self):
        A = np.array([[2.0, 0.0], [1.0, 1.0]])
        mu = pushforward(builtin("gaussian", 2), A)
        assert mu.density(np.zeros((1, 2)))[0] == pytest.approx(1 / (2 * math.pi * 2))

    def test_scaled(self):
        mu = scaled(builtin("cube", 2), 3.0)
        assert np.allclose(mu.covariance, 9 * np.eye(2))

    def test_marginal_has_no_density(self):
        mu = marginal(builtin("cube", 4), haar_sample(4, 2, 0))
        assert mu.dim == 2 and not mu.has_density

    def test_isotropize_whitens(self):
        mu = pushforward(builtin("gaussian", 2), np.array([[2.0, 0.0], [1.0, 1.0]]))
        iso = isotropize(mu, 200_000, 1)
        C, se = covariance_estimate(iso, 200_000, 2)
        assert np.all(np.abs(C - np.eye(2)) <= 0.02)

    def test_special_pair(self):
        mu1, mu2 = special_measure_pair(2, 6, 0.3)
        assert (mu1.dim, mu2.dim) == (2, 6)
        with pytest.raises(ValueError):
            special_measure_pair(2, 6, 1.5)


class TestParsing:
    @pytest.mark.parametrize("text", ["cube(4)", "lp_ball(1,3)", "product(cube(2),gaussian(2))",
                                      "smooth(cube(2),0.3)", "scaled(simplex(3),2.0)",
                                      "convolution(cube(3),gaussian(3))"])
    def test_roundtrip(self, text):
        assert describe(parse_measure(text)) == describe(parse_measure(describe(parse_measure(text))))

    @pytest.mark.parametrize("text,msg", [("cubee(4)", "unknown measure"), ("cube(4,2)", "positional"),
                                          ("cube(", "cannot parse"), ("4", "expected a call")])
    def test_errors(self, text, msg):
        with pytest.raises(ValueError, match=msg):
            parse_measure(text)


class TestSmoothing:
    @pytest.mark.parametrize("xi", [0.1, 0.5, 0.9])
    def test_gaussian_is_fixed(self, xi):
        g = builtin("gaussian", 2)
        x = np.random.default_rng(0).standard_normal((10, 2))
        assert np.allclose(gaussian_smoothing(g, xi).log_density(x), g.log_density(x), atol=1e-8)

    @pytest.mark.parametrize("xi", [0.2, 0.7])
    def test_smoothed_cube_stays_isotropic(self, xi):
        mu = gaussian_smoothing(builtin("cube", 2), xi)
        C, se = covariance_estimate(mu, 50_000, 3)
        assert np.all(np.abs(C - np.eye(2)) <= 5 * se)
        assert density_agreement_pvalue(mu, 4) > 0.001

    def test_rejects_non_isotropic(self):
        with pytest.raises(ValueError):
            gaussian_smoothing(scaled(builtin("cube", 2), 2.0), 0.5)


class TestFiberDensity:
    @pytest.mark.parametrize("n,k", [(3, 1), (5, 2), (8, 3)])
    def test_gaussian(self, n, k):
        est = marginal_density_at_zero(builtin("gaussian", n), haar_sample(n, k, 1), 20_000, 2)
        assert est.value == pytest.approx((2 * math.pi) ** (-k / 2), rel=1e-6)

    @pytest.mark.parametrize("n", [3, 6])
    def test_cube_coordinate_hyperplane(self, n):
        est = marginal_density_at_zero(builtin("cube", n), Subspace.coordinate(n, range(n - 1)), 20_000, 0)
        assert est.value == pytest.approx((2 * math.sqrt(3)) ** -(n - 1), rel=1e-10)

    def test_cube2_diagonal(self):
        est = marginal_density_at_zero(builtin("cube", 2), DIAGONAL, 20_000, 0)
        assert est.value == pytest.approx(CUBE2_DIAGONAL_F0, rel=1e-10)

    def test_laplace_coordinate_line(self):
        est = marginal_density_at_zero(builtin("laplace_product", 3), Subspace.coordinate(3, [0]), 20_000, 0)
        assert est.value == pytest.approx(1 / math.sqrt(2), rel=1e-8)

    @pytest.mark.parametrize("name,n,k", [("cube", 8, 1), ("laplace_product", 4, 1), ("cube", 8, 2)])
    def test_fourier_agrees_with_importance_sampling(self, name, n, k):
        mu = builtin(name, n)
        F = haar_sample(n, k, 11)
        fourier = marginal_density_at_zero(mu, F, 20_000, 0)
        assert fourier.method.startswith("fourier")
        sampled = marginal_density_at_zero(mu, F, 400_000, 1, route="importance")
        assert abs(fourier.value - sampled.value) <= 4 * sampled.stderr

    def test_budget_fallback(self):
        # a 2-d fiber through few sinc factors decays too slowly for the Fourier budget
        mu = builtin("cube", 5)
        F = haar_sample(5, 2, 3)
        with pytest.raises(FourierBudget):
            marginal_density_at_zero(mu, F, 20_000, 0, route="fourier")
        assert marginal_density_at_zero(mu, F, 20_000, 0).method != "fourier-2d"

    def test_needs_density(self):
        with pytest.raises(NoDensity):
            marginal_density_at_zero(convolution(builtin("cube", 2), builtin("cube", 2)), DIAGONAL, 1000, 0)


class TestHelpers:
    @settings(max_examples=30, deadline=None)
    @given(st.floats(min_value=-20, max_value=20))
    def test_gaussian_characteristic_function(self, s):
        phi, _ = characteristic_function(builtin("gaussian", 1).descriptor)
        assert phi(np.array([s]))[0] == pytest.approx(math.exp(-s * s / 2), abs=1e-12)

    def test_chi_negative_moment(self):
        assert 1 / chi_moment(4, -1) == pytest.approx(GAUSS4_I_MINUS_1, rel=1e-10)
