import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sp_integrate
from scipy import special

from entry_contest.errors import DomainError, NonConvergenceError
from entry_contest.math_kernel import (
    I_fn,
    J_derivative,
    J_excess,
    J_fn,
    J_monotone_threshold,
    J_step_polynomial,
    J_step_scale,
    Quadrature,
    incomplete_beta,
    integrate,
    integrate_many,
    order_stat_cdf,
    order_stat_pdf,
    rank_mass,
)
from entry_contest.oracle import batch_generator
from entry_contest.priors_costs import make_prior

UNIFORM = make_prior("uniform")


def beta_oracle(x, p, q):
    """Incomplete beta from scipy's regularised function."""
    if p == 0 or q == 0:
        return 0.0
    return special.betainc(p, q, x) * special.beta(p, q)


def J_excess_oracle(x, n1, n2):
    """J - 1 from scipy upper regularised tails, the same sum written independently."""
    total = sum(special.betaincc(i + 1, n2, x) * special.beta(i + 1, n2) for i in range(n1 - n2))
    return math.comb(n1 - 1, n2 - 1) * (n2 - 1) * total


class TestQuadrature:
    def test_polynomial(self):
        assert integrate(lambda x: x**2, 0.0, 1.0) == pytest.approx(1.0 / 3.0, abs=1e-10)

    def test_constant(self):
        q = Quadrature()
        assert abs(integrate(lambda x: 0 * x + 3.5, 0.2, 0.9, q) - 3.5 * 0.7) < q.abs_tol

    def test_order_statistic_density_normalised(self):
        value = integrate(lambda x: order_stat_pdf(2, 4, x, UNIFORM), 0.0, 1.0)
        assert value == pytest.approx(1.0, abs=1e-8)

    def test_endpoints_not_evaluated(self):
        seen = []

        def f(x):
            seen.append(np.asarray(x).copy())
            return 1.0 / np.sqrt(x * (1.0 - x)) * 0 + (1.0 - x) ** 0

        assert integrate(f, 0.0, 1.0) == pytest.approx(1.0, abs=1e-10)
        points = np.concatenate([s.ravel() for s in seen])
        assert np.all((points > 0.0) & (points < 1.0))

    def test_singular_integrand_raises(self):
        with pytest.raises(NonConvergenceError), np.errstate(divide="ignore"):
            integrate(lambda x: 1.0 / (x - 0.5), 0.0, 1.0, Quadrature(max_subdivisions=64))

    def test_many_intervals_match_scipy(self):
        lo = np.array([0.0, 0.1, 0.3])
        hi = np.array([0.5, 0.9, 1.0])
        ours = integrate_many(lambda x: np.exp(-3 * x) * np.sin(7 * x), lo, hi)
        ref = [sp_integrate.quad(lambda x: np.exp(-3 * x) * np.sin(7 * x), a, b)[0] for a, b in zip(lo, hi)]
        np.testing.assert_allclose(ours, ref, atol=1e-10)

    def test_deterministic(self):
        f = lambda x: np.cos(40 * x) ** 2  # noqa: E731
        assert integrate(f, 0.0, 1.0) == integrate(f, 0.0, 1.0)

    def test_invalid_tolerances(self):
        with pytest.raises(DomainError):
            Quadrature(abs_tol=0.0)

    @given(st.floats(-5, 5), st.floats(0.0, 0.5), st.floats(0.5, 1.0))
    def test_linear_exact(self, c, lo, hi):
        value = integrate(lambda x: c * x + 1.0, lo, hi)
        exact = c * (hi**2 - lo**2) / 2 + (hi - lo)
        assert value == pytest.approx(exact, abs=1e-10)


class TestIncompleteBeta:
    def test_flat_integrand(self):
        assert incomplete_beta(0.5, 1, 1) == pytest.approx(0.5, abs=1e-15)

    def test_antiderivative(self):
        assert incomplete_beta(0.3, 2, 1) == pytest.approx(0.045, abs=1e-15)

    def test_zero_parameter_convention(self):
        assert incomplete_beta(0.7, 0, 3) == 0.0
        assert incomplete_beta(0.7, 3, 0) == 0.0

    def test_trapezoid_oracle(self):
        t = np.linspace(0.0, 0.4, 400001)
        ref = np.trapezoid(t**2 * (1 - t), t)
        assert incomplete_beta(0.4, 3, 2) == pytest.approx(ref, abs=1e-10)

    @given(st.floats(1e-6, 1 - 1e-6), st.integers(1, 30), st.integers(1, 30))
    def test_matches_scipy(self, x, p, q):
        assert incomplete_beta(x, p, q) == pytest.approx(beta_oracle(x, p, q), rel=1e-9, abs=1e-300)

    @pytest.mark.parametrize("x", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            incomplete_beta(x, 2, 2)

    def test_integration_by_parts_identity(self):
        x = np.linspace(0.01, 0.99, 99)
        for alpha in range(2, 7):
            for beta in range(2, 7):
                lhs = beta * incomplete_beta(x, alpha, beta)
                rhs = (alpha - 1) * incomplete_beta(x, alpha - 1, beta + 1) - x ** (alpha - 1) * (1 - x) ** beta
                np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestOrderStatistics:
    def test_max_of_four(self):
        assert order_stat_cdf(1, 4, 0.5, UNIFORM) == pytest.approx(0.0625, abs=1e-15)

    def test_zero_rank(self):
        assert order_stat_cdf(0, 7, 0.3, UNIFORM) == 0.0

    def test_rank_past_n(self):
        assert order_stat_cdf(5, 4, 0.3, UNIFORM) == 0.0

    def test_invalid_rank(self):
        with pytest.raises(DomainError):
            order_stat_cdf(6, 4, 0.3, UNIFORM)
        with pytest.raises(DomainError):
            order_stat_pdf(0, 4, 0.3, UNIFORM)

    def test_monte_carlo_median_of_three(self):
        draws = batch_generator(11, 0).random((10**6, 3))
        second = np.sort(draws, axis=1)[:, 1]
        x = 0.5
        empirical = np.mean(second <= x)
        se = math.sqrt(empirical * (1 - empirical) / draws.shape[0])
        assert abs(empirical - order_stat_cdf(2, 3, x, UNIFORM)) < 4 * se

    def test_density_of_max_of_two(self):
        assert order_stat_pdf(1, 2, 0.5, UNIFORM) == pytest.approx(1.0)

    @pytest.mark.parametrize("prior", [make_prior("uniform"), make_prior("power", 2.5)])
    def test_density_is_cdf_derivative(self, prior):
        x = np.linspace(0.05, 0.95, 37)
        h = 1e-6
        for n in (1, 3, 6):
            for ell in range(1, n + 1):
                fd = (order_stat_cdf(ell, n, x + h, prior) - order_stat_cdf(ell, n, x - h, prior)) / (2 * h)
                np.testing.assert_allclose(order_stat_pdf(ell, n, x, prior), fd, atol=1e-6)

    @given(st.integers(1, 20), st.data())
    def test_density_normalised(self, n, data):
        ell = data.draw(st.integers(1, n))
        value = integrate(lambda x: order_stat_pdf(ell, n, x, UNIFORM), 0.0, 1.0)
        assert value == pytest.approx(1.0, abs=1e-8)

    @given(st.integers(1, 20), st.floats(0.01, 0.99))
    def test_rank_masses_partition(self, n, x):
        total = sum(rank_mass(ell, n, x, UNIFORM) for ell in range(1, n + 2))
        assert total == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(1, 15), st.floats(0.01, 0.99))
    def test_rank_mass_is_cdf_difference(self, n, x):
        for ell in range(1, n + 1):
            diff = order_stat_cdf(ell, n, x, UNIFORM) - order_stat_cdf(ell - 1, n, x, UNIFORM)
            assert rank_mass(ell, n, x, UNIFORM) == pytest.approx(diff, abs=1e-12)
        # ranking last among n + 1 players: every one of the n draws is higher
        last = 1.0 - order_stat_cdf(n, n, x, UNIFORM)
        assert rank_mass(n + 1, n, x, UNIFORM) == pytest.approx(last, abs=1e-12)

    @given(st.integers(1, 15), st.floats(0.01, 0.99))
    def test_lower_ranks_are_stochastically_smaller(self, n, x):
        values = [order_stat_cdf(ell, n, x, UNIFORM) for ell in range(1, n + 1)]
        assert np.all(np.diff(values) >= -1e-15)


class TestIJ:
    @pytest.mark.parametrize("n", [2, 5, 10])
    @pytest.mark.parametrize("x", [0.1, 0.5, 0.9])
    def test_no_restriction(self, n, x):
        assert I_fn(x, n, n) == pytest.approx(1.0, abs=1e-15)
        assert J_fn(x, n, n) == pytest.approx(1.0, abs=1e-15)

    def test_two_admitted(self):
        assert I_fn(0.5, 5, 2) == pytest.approx(0.515625, abs=1e-15)
        x = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(I_fn(x, 7, 2), 1 - x + x**6 / 6, atol=1e-14)

    def test_quadrature_oracle(self):
        ref = (1 - 0.4) ** 2 + 2 * sp_integrate.quad(lambda t: t**3 * (1 - t), 0, 0.4)[0]
        assert I_fn(0.4, 6, 3) == pytest.approx(ref, abs=1e-13)

    def test_three_players(self):
        assert J_fn(0.5, 3, 2) == pytest.approx(1.25, abs=1e-15)
        x = np.linspace(0.01, 0.99, 50)
        np.testing.assert_allclose(J_fn(x, 3, 2), x**2 - 2 * x + 2, atol=1e-14)

    def test_limit_at_one(self):
        assert J_fn(1 - 1e-9, 20, 5) == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("n1, n2", [(5, 6), (5, 1), (1, 1)])
    def test_domain(self, n1, n2):
        with pytest.raises(DomainError):
            J_fn(0.5, n1, n2)

    def test_excess_matches_scipy(self):
        x = np.linspace(0.005, 0.995, 100)
        for n1 in (3, 8, 20):
            for n2 in range(2, n1 + 1):
                ref = np.array([J_excess_oracle(v, n1, n2) for v in x])
                np.testing.assert_allclose(J_excess(x, n1, n2), ref, rtol=1e-9, atol=1e-300)

    def test_excess_consistent_with_J(self):
        x = np.linspace(0.01, 0.6, 60)
        for n2 in range(2, 21):
            np.testing.assert_allclose(J_excess(x, 20, n2), J_fn(x, 20, n2) - 1, rtol=1e-9, atol=1e-12)

    def test_derivative(self):
        x = np.linspace(0.05, 0.95, 19)
        h = 1e-6
        for n1, n2 in [(3, 2), (6, 3), (12, 7)]:
            fd = (J_fn(x + h, n1, n2) - J_fn(x - h, n1, n2)) / (2 * h)
            np.testing.assert_allclose(J_derivative(x, n1, n2), fd, rtol=1e-6, atol=1e-7)

    @given(st.integers(3, 20), st.data(), st.floats(0.0, 1.0, exclude_min=True, exclude_max=True))
    def test_step_polynomial(self, n1, data, x):
        n2 = data.draw(st.integers(3, n1))
        step = J_fn(x, n1, n2 - 1) - J_fn(x, n1, n2)
        expected = J_step_scale(n1, n2) * (1 - x) * J_step_polynomial(x, n1, n2) * (1 - x) ** (n2 - 2)
        assert step == pytest.approx(expected, rel=1e-8, abs=1e-10 * J_fn(x, n1, n2 - 1))


class TestJProperties:
    """J never falls below one, decreases in x and decreases in n2 on its upper range."""

    GRID = np.linspace(0.005, 0.995, 200)

    def test_at_least_one(self):
        for n1 in range(2, 21):
            for n2 in range(2, n1 + 1):
                values = J_fn(self.GRID, n1, n2)
                assert np.all(values >= 1 - 1e-12)
                if n2 == n1:
                    assert np.all(np.abs(values - 1) < 1e-12)

    def test_strict_when_restricted(self):
        for n1 in range(3, 21):
            for n2 in range(2, n1):
                assert np.all(J_excess(self.GRID, n1, n2) > 0)

    def test_nonincreasing_in_x(self):
        for n1 in range(2, 21):
            for n2 in range(2, n1 + 1):
                values = J_fn(self.GRID, n1, n2)
                assert np.all(np.diff(values) <= 1e-12)
                if n2 < n1:
                    assert np.all(np.diff(J_excess(self.GRID, n1, n2)) < 0)

    def test_decreasing_in_n2_upper_range(self):
        for n1 in range(3, 21):
            lo = n1 // 2 + 2
            for n2 in range(max(lo, 3), n1 + 1):
                assert np.all(J_fn(self.GRID, n1, n2) < J_fn(self.GRID, n1, n2 - 1) + 1e-9)
                # the exact step is positive: its polynomial factor never vanishes
                assert np.all(J_step_polynomial(self.GRID, n1, n2) > 0)

    def test_decreasing_in_n2_above_threshold(self):
        for n1 in range(3, 21):
            start = J_monotone_threshold(n1)
            x = np.linspace(start, 1.0, 202)[1:-1]
            for n2 in range(3, n1 + 1):
                assert np.all(J_step_polynomial(x, n1, n2) > 0)
                assert np.all(J_fn(x, n1, n2) <= J_fn(x, n1, n2 - 1) + 1e-9)

    def test_threshold_is_a_root(self):
        for n1 in (5, 10, 20):
            root = J_monotone_threshold(n1)
            values = [J_step_polynomial(root, n1, n2) for n2 in range(3, n1 + 1)]
            assert min(abs(v) for v in values) < 1e-9

    def test_not_monotone_in_n2_below_threshold(self):
        x = 0.05
        assert J_fn(x, 20, 3) > J_fn(x, 20, 2)
