import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sp_integrate

from entry_contest.errors import DomainError, SpecError
from entry_contest.math_kernel import integrate
from entry_contest.priors_costs import (
    ContestSpec,
    CostFn,
    Prior,
    clamp_ability,
    custom_prior,
    fit_prizes,
    make_cost,
    make_prior,
    validate_spec,
)

GRID = np.linspace(0.01, 0.99, 99)
PRIORS = [make_prior("uniform"), make_prior("power", 0.5), make_prior("power", 2.0), make_prior("power", 5.0)]
COSTS = [make_cost("linear"), make_cost("power", 2.0), make_cost("power", 5.0)]


class TestPrior:
    def test_uniform_is_power_one(self):
        assert make_prior("power", 1).cdf(0.3) == pytest.approx(0.3)
        assert make_prior("power", 1).is_uniform

    def test_power_density(self):
        assert make_prior("power", 2).pdf(0.5) == pytest.approx(1.0)

    def test_power_inverse(self):
        assert make_prior("power", 0.5).inverse_cdf(0.25) == pytest.approx(0.0625)

    @pytest.mark.parametrize("theta", [0.0, -1.0])
    def test_bad_theta(self, theta):
        with pytest.raises(DomainError):
            make_prior("power", theta)

    def test_unknown_family(self):
        with pytest.raises(DomainError):
            make_prior("normal", 1.0)

    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.label())
    def test_round_trip(self, prior):
        np.testing.assert_allclose(prior.cdf(prior.inverse_cdf(GRID)), GRID, atol=1e-9)
        np.testing.assert_allclose(prior.inverse_cdf(prior.cdf(GRID)), GRID, atol=1e-10)

    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.label())
    def test_density_normalised(self, prior):
        # scipy's QUADPACK copes with the integrable singularity at 0 when theta < 1
        value = sp_integrate.quad(lambda x: float(prior.pdf(x)), 0.0, 1.0, epsabs=1e-12)[0]
        assert value == pytest.approx(1.0, abs=1e-8)
        if prior.theta >= 1:
            assert integrate(prior.pdf, 0.0, 1.0) == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("prior", PRIORS, ids=lambda p: p.label())
    def test_density_is_derivative(self, prior):
        h = 1e-6
        fd = (prior.cdf(GRID + h) - prior.cdf(GRID - h)) / (2 * h)
        np.testing.assert_allclose(prior.pdf(GRID), fd, rtol=1e-6)

    @given(st.floats(0.05, 20.0))
    def test_support_limits(self, theta):
        prior = make_prior("power", theta)
        assert prior.cdf(0.0) == 0.0
        assert prior.cdf(1.0) == 1.0
        assert np.all(np.diff(prior.cdf(GRID)) > 0)
        assert np.all(prior.pdf(GRID) > 0)

    def test_custom(self):
        prior = custom_prior(lambda x: x**3, lambda x: 3 * x**2, lambda u: np.cbrt(u))
        np.testing.assert_allclose(prior.cdf(GRID), make_prior("power", 3).cdf(GRID))
        with pytest.raises(DomainError):
            Prior("custom")


class TestCost:
    def test_linear(self):
        assert make_cost("linear").g(0.7) == pytest.approx(0.7)

    def test_power_inverse(self):
        assert make_cost("power", 5).g_inverse(0.03125) == pytest.approx(0.5)

    def test_power_derivative(self):
        assert make_cost("power", 5).g_prime(1.0) == pytest.approx(5.0)

    def test_bad_exponent(self):
        with pytest.raises(DomainError):
            make_cost("power", 0.5)

    @pytest.mark.parametrize("cost", COSTS, ids=lambda c: c.label())
    def test_inverse_round_trip(self, cost):
        np.testing.assert_allclose(cost.g(cost.g_inverse(GRID)), GRID, atol=1e-9)
        np.testing.assert_allclose(cost.g_inverse(cost.g(GRID)), GRID, atol=1e-10)

    @pytest.mark.parametrize("cost", COSTS, ids=lambda c: c.label())
    def test_shape(self, cost):
        assert cost.g(0.0) == 0.0
        assert np.all(np.diff(cost.g(GRID)) > 0)
        h = 1e-6
        np.testing.assert_allclose(cost.g_prime(GRID), (cost.g(GRID + h) - cost.g(GRID - h)) / (2 * h), rtol=1e-6)


class TestValidateSpec:
    def test_zero_padding(self):
        assert validate_spec(ContestSpec(5, 2, (1.0,))).prizes == (1.0, 0.0)

    def test_too_many_admitted(self):
        with pytest.raises(SpecError, match="n2 > n1"):
            validate_spec(ContestSpec(5, 6, (1.0,)))

    def test_increasing_prizes(self):
        with pytest.raises(SpecError, match="prizes not nonincreasing"):
            validate_spec(ContestSpec(5, 3, (1.0, 2.0)))

    def test_negative_prize(self):
        with pytest.raises(SpecError, match="negative prize"):
            validate_spec(ContestSpec(5, 3, (1.0, -0.5)))

    @pytest.mark.parametrize("n1, n2", [(1, 1), (5, 1), (5, 0)])
    def test_counts(self, n1, n2):
        with pytest.raises(SpecError):
            validate_spec(ContestSpec(n1, n2, (1.0,)))

    def test_trailing_zeros_truncated(self):
        assert validate_spec(ContestSpec(5, 2, (1.0, 0.0, 0.0))).prizes == (1.0, 0.0)
        with pytest.raises(SpecError):
            validate_spec(ContestSpec(5, 2, (1.0, 0.5, 0.5)))

    def test_non_integer_counts(self):
        with pytest.raises(SpecError):
            validate_spec(ContestSpec(5.5, 2, (1.0,)))

    @given(st.integers(2, 30), st.data())
    def test_valid_specs_pass(self, n1, data):
        n2 = data.draw(st.integers(2, n1))
        prizes = sorted(data.draw(st.lists(st.floats(0, 10), min_size=1, max_size=n2)), reverse=True)
        spec = validate_spec(ContestSpec(n1, n2, tuple(prizes)))
        assert len(spec.prizes) == n2
        assert list(spec.prizes[: len(prizes)]) == prizes

    def test_fit_prizes(self):
        assert fit_prizes((3, 2, 1), 2) == (3.0, 2.0)
        assert fit_prizes((1,), 3) == (1.0, 0.0, 0.0)

    def test_clamp(self):
        np.testing.assert_allclose(clamp_ability([0.0, 0.5, 1.0]), [1e-6, 0.5, 1 - 1e-6])

    def test_defaults(self):
        spec = ContestSpec(3, 2)
        assert spec.prior == Prior() and spec.cost == CostFn()
