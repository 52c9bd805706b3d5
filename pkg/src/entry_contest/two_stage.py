"""Two-stage elimination contest: candidate strategies and the deviation gain.

All ``n1`` players exert a first-stage effort; the top ``n2`` advance and then
play the entry-restricted contest. If a symmetric monotone equilibrium
existed, the second stage would follow the restricted-contest effort ``b2``
and the first stage would follow ``b1``. A player who mimics type ``a_tilde``
in stage one changes what the others believe about it, and the derivative of
its overall utility in ``a_tilde`` at the true type tests the candidate.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .equilibrium import EFFORT_QUADRATURE, restricted_effort, restricted_inner
from .errors import DomainError, NegativeArgumentError, NonConvergenceError, SpecError
from .math_kernel import I_u, J_u, integrate, os_cdf_u, os_density_u, rank_mass_density_u, rank_mass_u
from .priors_costs import ContestSpec, CostFn, Prior, validate_spec

_NEGATIVE_SLACK = 1e-12
_SOLVER_XTOL = 1e-12


@dataclass(frozen=True)
class TwoStageSpec:
    """Two-stage contest; the prize on the last admitted rank must be zero.

    ``first_stage_cost`` defaults to the second-stage cost.
    """

    n1: int
    n2: int
    prizes: tuple = (1.0,)
    prior: Prior = field(default_factory=Prior)
    cost: CostFn = field(default_factory=CostFn)
    first_stage_cost: Optional[CostFn] = None

    def __post_init__(self):
        spec = validate_spec(ContestSpec(self.n1, self.n2, self.prizes, self.prior, self.cost))
        if spec.prizes[-1] != 0.0:
            raise SpecError("the prize on the last admitted rank must be zero")
        object.__setattr__(self, "prizes", spec.prizes)

    @property
    def contest(self):
        return ContestSpec(self.n1, self.n2, self.prizes, self.prior, self.cost)

    @property
    def stage_one_cost(self):
        return self.first_stage_cost if self.first_stage_cost is not None else self.cost

    @property
    def prize_array(self):
        return np.asarray(self.prizes, dtype=float)


def _check(a, name="a"):
    if not 0.0 < a < 1.0:
        raise DomainError(f"{name} must lie in (0, 1)")
    return float(a)


def _prize_mass(u, ts):
    """Sum over l < n2 of V_l F̂_(l, n1-1)(u)."""
    total = 0.0
    for ell in range(1, ts.n2):
        if ts.prizes[ell - 1]:
            total = total + ts.prizes[ell - 1] * rank_mass_u(ell, ts.n1 - 1, u)
    return total


def candidate_b2(a, ts):
    """Second-stage candidate effort: the restricted-contest equilibrium."""
    return restricted_effort(_check(a), ts.contest)


def continuation_value(a, ts):
    """Expected second-stage utility of an admitted type ``a`` on the candidate path."""
    a = _check(a)
    u = float(ts.prior.cdf(a))
    n1, n2 = ts.n1, ts.n2
    prize = _prize_mass(u, ts) / float(J_u(u, n1, n2))
    prize += ts.prizes[-1] * (1.0 - u) ** (n2 - 1) / float(I_u(u, n1, n2))
    return float(prize - restricted_inner(a, ts.contest) / a)


def first_stage_integral(a, ts, quad=EFFORT_QUADRATURE):
    """Integral of x dF_(n2, n1-1)(x) over (0, a)."""
    u = float(ts.prior.cdf(_check(a)))
    n2, n = ts.n2, ts.n1 - 1
    return integrate(lambda t: ts.prior.inverse_cdf(t) * os_density_u(n2, n, t), 0.0, u, quad)


def first_stage_integral_sum(a, ts, quad=EFFORT_QUADRATURE):
    """The same integral written as the sum over ranks 1..n2 of x dF̂_(l, n1-1)."""
    u = float(ts.prior.cdf(_check(a)))
    n = ts.n1 - 1

    def integrand(t):
        total = sum(rank_mass_density_u(ell, n, t) for ell in range(1, ts.n2 + 1))
        return ts.prior.inverse_cdf(t) * total

    return integrate(integrand, 0.0, u, quad)


def _first_stage_inner(continuation, a, ts):
    value = continuation * first_stage_integral(a, ts)
    if value < -_NEGATIVE_SLACK * max(1.0, float(np.max(ts.prize_array))):
        raise NegativeArgumentError("negative continuation value in the first stage")
    return max(value, 0.0)


def candidate_b1(a, ts):
    """First-stage candidate effort g1^{-1}(u2(a) * integral of x dF_(n2, n1-1))."""
    a = _check(a)
    inner = _first_stage_inner(continuation_value(a, ts), a, ts)
    return float(ts.stage_one_cost.g_inverse(inner))


def promotion_probability(a_tilde, ts):
    """Probability of reaching the second stage when mimicking type ``a_tilde``."""
    u = float(ts.prior.cdf(_check(a_tilde, "a_tilde")))
    return float(os_cdf_u(ts.n2, ts.n1 - 1, u))


def _deviated_objective(eta, a, u_tilde_J, ts):
    """Second-stage utility of type ``a`` playing ``b2(eta)`` when seen as ``a_tilde``."""
    u = float(ts.prior.cdf(eta))
    return _prize_mass(u, ts) / u_tilde_J - restricted_inner(eta, ts.contest) / a


class DeviatedResponse(NamedTuple):
    ability: float
    effort: float
    value: float


def deviated_second_stage_response(a, a_tilde, ts):
    """Best second-stage reply of type ``a`` whose rivals believe it is ``a_tilde``.

    The search runs over the ability ``eta`` whose equilibrium effort is
    played; effort and ability are linked by the increasing map ``b2``. Brent's
    bounded method (golden section with parabolic steps) maximises the value.
    """
    a = _check(a)
    a_tilde = _check(a_tilde, "a_tilde")
    if not np.any(ts.prize_array):
        return DeviatedResponse(0.0, 0.0, 0.0)
    jt = float(J_u(float(ts.prior.cdf(a_tilde)), ts.n1, ts.n2))
    hi = 1.0 - 1e-9
    result = minimize_scalar(
        lambda eta: -_deviated_objective(eta, a, jt, ts),
        bounds=(1e-9, hi),
        method="bounded",
        options={"xatol": _SOLVER_XTOL, "maxiter": 500},
    )
    if not result.success:
        raise NonConvergenceError(f"second-stage search failed: {result.message}")
    eta = float(result.x)
    return DeviatedResponse(eta, candidate_b2(eta, ts), -float(result.fun))


def deviated_second_stage_best_response(a, a_tilde, ts):
    """Effort of the deviated second-stage best response."""
    return deviated_second_stage_response(a, a_tilde, ts).effort


def deviated_ability_identity(a, a_tilde, ts):
    """Ability ``eta`` solving eta / J(F(eta)) = a / J(F(a_tilde)).

    This first-order condition characterises the deviated response when the
    last admitted rank carries no prize.
    """
    a = _check(a)
    target = a / float(J_u(float(ts.prior.cdf(_check(a_tilde, "a_tilde"))), ts.n1, ts.n2))

    def gap(eta):
        return eta / float(J_u(float(ts.prior.cdf(eta)), ts.n1, ts.n2)) - target

    return brentq(gap, 1e-12, 1.0 - 1e-12, xtol=1e-15)


def deviation_gain(a, a_tilde, ts, mimic_continuation=False):
    """Overall utility of type ``a`` mimicking type ``a_tilde`` in stage one.

    L = P(a_tilde) * u2_dev - g1(b1(a_tilde)) / a, where P is the promotion
    probability and u2_dev the value of the deviated second-stage response.
    By default the first-stage effort is the candidate solution of the
    deviator's own first-order condition, which keeps its own continuation value
    u2(a) fixed: g1(b1(a_tilde)) = u2(a) * integral over (0, a_tilde). With
    ``mimic_continuation=True`` the mimicked type's continuation value u2(a_tilde)
    is used instead, i.e. the literal candidate ``b1(a_tilde)``.
    """
    a = _check(a)
    a_tilde = _check(a_tilde, "a_tilde")
    response = deviated_second_stage_response(a, a_tilde, ts)
    source = a_tilde if mimic_continuation else a
    cost_one = _first_stage_inner(continuation_value(source, ts), a_tilde, ts)
    return promotion_probability(a_tilde, ts) * response.value - cost_one / a


def on_path_utility(a, ts):
    """Candidate equilibrium utility: P(a) u2(a) - g1(b1(a)) / a."""
    a = _check(a)
    u2 = continuation_value(a, ts)
    return promotion_probability(a, ts) * u2 - _first_stage_inner(u2, a, ts) / a


class SlopeEstimate(NamedTuple):
    slope: float
    noise_floor: float
    nonzero: bool
    differences: tuple
    steps: tuple
    sign_stable: bool

    def as_dict(self):
        return {
            "slope": self.slope,
            "noise_floor": self.noise_floor,
            "nonzero": self.nonzero,
            "central_differences": list(self.differences),
            "steps": list(self.steps),
            "sign_stable": self.sign_stable,
        }


def deviation_slope(a, ts, steps=(1e-3, 1e-4), mimic_continuation=False, factor=5.0):
    """Richardson-extrapolated central difference of the deviation gain at ``a``.

    The noise floor propagates a relative evaluation error of ``rel`` (ten
    times the relative tolerance of the equilibrium quadrature) through the
    finite-difference and extrapolation weights.
    """
    a = _check(a)
    h1, h2 = steps
    if not (h1 > h2 > 0 and a - h1 > 0 and a + h1 < 1):
        raise DomainError("steps must satisfy h1 > h2 > 0 inside (0, 1)")
    values = {}
    for h in steps:
        for sign in (-1, 1):
            values[sign * h] = deviation_gain(a, a + sign * h, ts, mimic_continuation)
    diffs = tuple((values[h] - values[-h]) / (2.0 * h) for h in steps)
    ratio = (h1 / h2) ** 2
    slope = (ratio * diffs[1] - diffs[0]) / (ratio - 1.0)
    rel = 10.0 * EFFORT_QUADRATURE.rel_tol
    scale = max(abs(v) for v in values.values()) + abs(on_path_utility(a, ts))
    eps = rel * scale
    noise = (ratio / (ratio - 1.0)) * eps / h2 + (1.0 / (ratio - 1.0)) * eps / h1
    signs = {np.sign(diffs[0]), np.sign(diffs[1]), np.sign(slope)}
    return SlopeEstimate(
        float(slope),
        float(noise),
        bool(abs(slope) > factor * noise),
        diffs,
        tuple(steps),
        len(signs) == 1 and 0 not in signs,
    )
