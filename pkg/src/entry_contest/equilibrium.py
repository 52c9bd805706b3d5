"""Symmetric equilibrium efforts and the primitives of a best response.

The equilibrium effort is ``g^{-1}`` of an "inner value": the integral over
abilities below ``a`` of ``x`` times a prize-weighted measure. All integrals are
taken in ``u = F(x)`` so the order-statistic measures are polynomials in ``u``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError, NegativeArgumentError
from .math_kernel import (
    I_u,
    J_u,
    Quadrature,
    _check_count,
    integrate_many,
    rank_mass_density_u,
    rank_mass_u,
)
from .priors_costs import ABILITY_CEIL, ABILITY_FLOOR, ContestSpec, validate_spec

# Small inner values are raised to the power 1/k by convex costs, which turns
# absolute quadrature error into large relative effort error, so equilibrium
# integrals are controlled in relative terms.
EFFORT_QUADRATURE = Quadrature(abs_tol=1e-300, rel_tol=1e-11)
_NEGATIVE_SLACK = 1e-12
_BISECTION_STEPS = 48


def restricted_weight_u(u, spec):
    """Prize-weighted measure density of the restricted contest in ``u``.

    Sum over l < n2 of V_l dF̂_(l, n1-1) / J minus V_n2 (n2-1)(1-u)^(n2-2) / I.
    """
    u = np.asarray(u, dtype=float)
    n1, n2, prizes = spec.n1, spec.n2, spec.prize_array
    upper = np.zeros_like(u)
    for ell in range(1, n2):
        if prizes[ell - 1] != 0.0:
            upper = upper + prizes[ell - 1] * rank_mass_density_u(ell, n1 - 1, u)
    total = upper / J_u(u, n1, n2)
    if prizes[n2 - 1] != 0.0:
        total = total - prizes[n2 - 1] * (n2 - 1) * (1.0 - u) ** (n2 - 2) / I_u(u, n1, n2)
    return total


def one_round_weight_u(u, n1, prizes):
    """Prize-weighted measure density of the unrestricted contest in ``u``."""
    u = np.asarray(u, dtype=float)
    total = np.zeros_like(u)
    for ell in range(1, n1 + 1):
        if prizes[ell - 1] != 0.0:
            total = total + prizes[ell - 1] * rank_mass_density_u(ell, n1 - 1, u)
    return total


def _cumulative_inner(weight, prior, a, quad):
    """Integrals of ``x * weight`` over ``u`` in ``(0, F(a))`` for every ``a``.

    Sorted abilities are integrated segment by segment and accumulated, so an
    array of abilities costs a single quadrature sweep.
    """
    a = np.asarray(a, dtype=float)
    flat = a.ravel()
    u = np.asarray(prior.cdf(flat), dtype=float)
    order = np.argsort(u, kind="stable")
    ends = u[order]
    starts = np.concatenate([[0.0], ends[:-1]])
    seg_quad = Quadrature(
        max(quad.abs_tol / max(flat.size, 1), 1e-300), quad.rel_tol, quad.max_subdivisions
    )
    pieces = integrate_many(lambda t: prior.inverse_cdf(t) * weight(t), starts, ends, seg_quad)
    out = np.empty_like(flat)
    out[order] = np.cumsum(pieces)
    return out.reshape(a.shape)


def _negative_slack(prizes):
    return _NEGATIVE_SLACK * max(1.0, float(np.max(np.abs(prizes))) if len(prizes) else 1.0)


def _to_effort(inner, cost, prizes):
    inner = np.asarray(inner, dtype=float)
    if np.any(inner < -_negative_slack(prizes)):
        worst = float(inner.min())
        raise NegativeArgumentError(
            f"inner value {worst:.3e} is negative; the prize on the last admitted rank "
            "is too large for a participation-compatible equilibrium"
        )
    return cost.g_inverse(np.maximum(inner, 0.0))


def _check_ability(a):
    a = np.asarray(a, dtype=float)
    if np.any(~((a > 0.0) & (a < 1.0))):
        raise DomainError("abilities must lie in (0, 1)")
    return a


def _scalar(out):
    return float(out) if np.ndim(out) == 0 else out


def restricted_inner(a, spec, quad=EFFORT_QUADRATURE):
    """g(b(a)) for the entry-restricted contest, before the sign check."""
    spec = validate_spec(spec)
    a = _check_ability(a)
    return _scalar(_cumulative_inner(lambda u: restricted_weight_u(u, spec), spec.prior, a, quad))


def restricted_effort(a, spec, quad=EFFORT_QUADRATURE):
    """Equilibrium effort of an admitted player with ability ``a``."""
    spec = validate_spec(spec)
    a = _check_ability(a)
    inner = _cumulative_inner(lambda u: restricted_weight_u(u, spec), spec.prior, a, quad)
    return _scalar(_to_effort(inner, spec.cost, spec.prize_array))


def one_round_effort(a, n1, prizes, prior, cost, quad=EFFORT_QUADRATURE):
    """Equilibrium effort in the contest where all ``n1`` players compete."""
    n1 = _check_count(n1, "n1", 2)
    spec = validate_spec(ContestSpec(n1, n1, tuple(prizes), prior, cost))
    a = _check_ability(a)
    values = spec.prize_array
    inner = _cumulative_inner(lambda u: one_round_weight_u(u, n1, values), prior, a, quad)
    return _scalar(_to_effort(inner, cost, values))


def chebyshev_grid(size, lo=ABILITY_FLOOR, hi=ABILITY_CEIL):
    """Chebyshev-Lobatto points on ``[lo, hi]``, increasing."""
    k = np.arange(size)
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * k / (size - 1)))


def _limit_slopes(x, y, slopes):
    """Fritsch-Carlson limiter: shrink slopes so each cubic piece is monotone."""
    slopes = slopes.copy()
    secant = np.diff(y) / np.diff(x)
    tau = np.ones_like(secant)
    flat = secant == 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        alpha = np.where(flat, 0.0, slopes[:-1] / secant)
        beta = np.where(flat, 0.0, slopes[1:] / secant)
    radius = np.hypot(alpha, beta)
    big = radius > 3.0
    tau[big] = 3.0 / radius[big]
    scale = np.ones_like(slopes)
    scale[:-1] = np.minimum(scale[:-1], tau)
    scale[1:] = np.minimum(scale[1:], tau)
    slopes = slopes * scale
    # a slope against the direction of either neighbouring secant, or next to a
    # flat piece, is set to zero
    left = np.concatenate([[secant[0]], secant])
    right = np.concatenate([secant, [secant[-1]]])
    bad = (slopes * left < 0) | (slopes * right < 0) | (left == 0) | (right == 0)
    slopes[bad] = 0.0
    return slopes


@dataclass(frozen=True)
class StrategyTable:
    """Tabulated equilibrium effort with monotone cubic Hermite interpolation.

    Interpolation runs on the inner value ``g(b(a))`` using its exact
    derivative, then maps through ``g^{-1}``; the knot ``a = 0`` carries value 0.
    """

    spec: ContestSpec
    grid: np.ndarray
    efforts: np.ndarray
    inner: np.ndarray
    monotone: bool
    _spline: CubicHermiteSpline = field(repr=False, compare=False)

    @property
    def top_ability(self):
        return float(self.grid[-1])

    @property
    def top_effort(self):
        return float(self.efforts[-1])

    def inner_at(self, a):
        a = np.clip(np.asarray(a, dtype=float), 0.0, 1.0)
        return self._spline(a)

    def __call__(self, a):
        out = self.spec.cost.g_inverse(np.maximum(self.inner_at(a), 0.0))
        return _scalar(out)

    def inverse(self, e):
        """Ability ``gamma`` with ``b(gamma) = e`` and a flag for clamped efforts.

        Efforts above the top of the table map to ability 1, negative ones to 0.
        """
        if not self.monotone:
            raise DomainError("the strategy is not monotone, so it has no inverse")
        e = np.asarray(e, dtype=float)
        target = self.spec.cost.g(np.maximum(e, 0.0))
        top = float(self.inner[-1])
        lo = np.zeros_like(target)
        hi = np.full_like(target, self.top_ability)
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            below = self._spline(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        gamma = 0.5 * (lo + hi)
        gamma = np.where(target <= 0.0, 0.0, gamma)
        above = target > top
        gamma = np.where(above, 1.0, gamma)
        boundary = above | (e < 0.0)
        return _scalar(gamma), (bool(boundary) if boundary.ndim == 0 else boundary)


def build_strategy_table(spec, grid_size=512, quad=EFFORT_QUADRATURE):
    """Tabulate the restricted-contest effort on a Chebyshev grid in one sweep."""
    spec = validate_spec(spec)
    grid_size = _check_count(grid_size, "grid_size", 16)
    grid = chebyshev_grid(grid_size)
    weight = lambda u: restricted_weight_u(u, spec)  # noqa: E731
    inner = _cumulative_inner(weight, spec.prior, grid, quad)
    prizes = spec.prize_array
    if np.any(inner < -_negative_slack(prizes)):
        _to_effort(inner, spec.cost, prizes)
    inner = np.maximum(inner, 0.0)
    knots = np.concatenate([[0.0], grid])
    values = np.concatenate([[0.0], inner])
    slopes = np.concatenate(
        [[0.0], grid * weight(spec.prior.cdf(grid)) * spec.prior.pdf(grid)]
    )
    spline = CubicHermiteSpline(knots, values, _limit_slopes(knots, values, slopes))
    efforts = spec.cost.g_inverse(inner)
    monotone = bool(np.all(np.diff(values) >= 0.0))
    return StrategyTable(spec, grid, efforts, inner, monotone, spline)


def win_probabilities(e, a_i, spec, table, return_boundary=False):
    """Probabilities of finishing at ranks 1..n2 with effort ``e`` and ability ``a_i``.

    Uses the closed forms F̂_(l, n1-1)(gamma)/J(F(a_i)) for l < n2 and
    (1 - F(gamma))^(n2-1)/I(F(a_i)) for the last rank, where gamma = b^{-1}(e).
    With ``n2 < n1`` these forms are exact for on-path efforts; away from
    ``b(a_i)`` they describe the belief frozen at the on-path ranking.
    """
    spec = validate_spec(spec)
    if not 0.0 < a_i < 1.0:
        raise DomainError("a_i must lie in (0, 1)")
    gamma, boundary = table.inverse(e)
    ug = np.asarray(spec.prior.cdf(gamma), dtype=float)
    ui = float(spec.prior.cdf(a_i))
    n1, n2 = spec.n1, spec.n2
    cols = [rank_mass_u(ell, n1 - 1, ug) / J_u(ui, n1, n2) for ell in range(1, n2)]
    cols.append((1.0 - ug) ** (n2 - 1) / I_u(ui, n1, n2))
    probs = np.stack(cols, axis=-1)
    return (probs, boundary) if return_boundary else probs


def on_path_win_probabilities(a, spec):
    """Rank probabilities of an admitted player who plays ``b(a)``; shape ``(..., n2)``."""
    spec = validate_spec(spec)
    u = np.asarray(spec.prior.cdf(np.asarray(a, dtype=float)), dtype=float)
    n1, n2 = spec.n1, spec.n2
    cols = [rank_mass_u(ell, n1 - 1, u) / J_u(u, n1, n2) for ell in range(1, n2)]
    cols.append((1.0 - u) ** (n2 - 1) / I_u(u, n1, n2))
    return np.stack(cols, axis=-1)


def expected_utility(e, a_i, spec, table):
    """Expected prize minus ``g(e)/a_i`` under the closed-form win probabilities."""
    spec = validate_spec(spec)
    probs = win_probabilities(e, a_i, spec, table)
    out = probs @ spec.prize_array - spec.cost.g(e) / a_i
    return _scalar(out)
