"""Posterior beliefs of an admitted player about the other admitted players.

An admitted player with ability ``a_i`` knows it ranks among the top ``n2``
of ``n1`` abilities. Its posterior over each opponent has a closed form in
terms of ``u = F(a)`` and the normaliser ``I(F(a_i), n1, n2)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .math_kernel import DEFAULT_QUADRATURE, I_u, _check_pair, _check_unit_open, beta_lower, integrate
from .priors_costs import Prior


@dataclass(frozen=True)
class PosteriorParams:
    """Own ability, contest size and prior conditioning a posterior belief."""

    a_i: float
    n1: int
    n2: int
    prior: Prior = Prior()

    def __post_init__(self):
        _check_pair(self.n1, self.n2)
        if not 0.0 < self.a_i < 1.0:
            raise DomainError("a_i must lie in (0, 1)")

    @property
    def u_i(self):
        return float(self.prior.cdf(self.a_i))

    @property
    def normaliser(self):
        return float(I_u(self.u_i, self.n1, self.n2))


def joint_posterior_density(a_minus_i, p):
    """Joint posterior density of the other ``n2 - 1`` admitted abilities.

    Equal to prod f / I when every opponent is above ``a_i`` and to
    F(min)^(n1-n2) prod f / I otherwise. A minimum exactly at ``a_i`` takes
    the first branch.
    """
    a = _check_unit_open(np.atleast_1d(a_minus_i), "a_minus_i")
    if a.shape != (p.n2 - 1,):
        raise DomainError(f"expected {p.n2 - 1} opponent abilities")
    density = float(np.prod(p.prior.pdf(a))) / p.normaliser
    low = a.min()
    if low < p.a_i:
        density *= float(p.prior.cdf(low)) ** (p.n1 - p.n2)
    return density


def _pdf_below_u(u, p):
    m, n2 = p.n1 - p.n2, p.n2
    return (n2 - 2) * beta_lower(u, m + 1, n2 - 2) + u**m * (1.0 - u) ** (n2 - 2)


def _pdf_above_u(p):
    m, n2, ui = p.n1 - p.n2, p.n2, p.u_i
    return (n2 - 2) * float(beta_lower(ui, m + 1, n2 - 2)) + (1.0 - ui) ** (n2 - 2)


def marginal_posterior_pdf_u(u, p):
    """Marginal posterior density with respect to ``u = F(a_j)``."""
    u = np.asarray(u, dtype=float)
    if p.n1 == p.n2:
        return np.ones_like(u)
    below = _pdf_below_u(u, p)
    return np.where(u < p.u_i, below, _pdf_above_u(p)) / p.normaliser


def marginal_posterior_pdf(a_j, p):
    """Marginal posterior density of one opponent's ability (right limit at ``a_i``)."""
    a_j = _check_unit_open(a_j, "a_j")
    out = marginal_posterior_pdf_u(p.prior.cdf(a_j), p) * p.prior.pdf(a_j)
    return float(out) if out.ndim == 0 else out


def marginal_posterior_cdf_u(u, p):
    u = np.asarray(u, dtype=float)
    if p.n1 == p.n2:
        return u.copy()
    m, n2, ui, norm = p.n1 - p.n2, p.n2, p.u_i, p.normaliser
    below = m * (u * beta_lower(u, m, n2 - 1) - beta_lower(u, m + 1, n2 - 1)) / norm
    at_i = m * (u * beta_lower(ui, m, n2 - 1) - beta_lower(ui, m + 1, n2 - 1)) / norm
    slab = (u - ui) * (1.0 - ui) ** (n2 - 2) * (1.0 - ui**m) / norm
    return np.where(u < ui, below, at_i + slab)


def marginal_posterior_cdf(a_j, p):
    """Posterior probability that one opponent's ability is at most ``a_j``."""
    a_j = _check_unit_open(a_j, "a_j")
    out = marginal_posterior_cdf_u(p.prior.cdf(a_j), p)
    return float(out) if out.ndim == 0 else out


def belief_jump(p):
    """Right limit minus left limit of the marginal posterior density at ``a_i``."""
    if p.n1 == p.n2:
        return 0.0
    left = float(_pdf_below_u(p.u_i, p))
    right = _pdf_above_u(p)
    return float(p.prior.pdf(p.a_i)) * (right - left) / p.normaliser


def expected_opponent_ability(p, quad=DEFAULT_QUADRATURE):
    """Posterior mean of one opponent's ability, by quadrature split at ``a_i``."""

    def integrand(u):
        return p.prior.inverse_cdf(u) * marginal_posterior_pdf_u(u, p)

    return integrate(integrand, 0.0, p.u_i, quad) + integrate(integrand, p.u_i, 1.0, quad)


def expected_opponent_ability_uniform(a_i, n1, n2):
    """Closed form ``1 - D(a_i)/2`` of the posterior mean under a uniform prior."""
    n1, n2 = _check_pair(n1, n2)
    a = _check_unit_open(a_i, "a_i")
    m = n1 - n2
    numerator = n2 * beta_lower(a, m + 1, n2) + (1.0 - a) ** n2
    ratio = numerator / I_u(a, n1, n2)
    out = 1.0 - ratio / 2.0
    return float(out) if out.ndim == 0 else out


def dominance_margin(a_j, p):
    """F(a_j) minus the posterior CDF; nonnegative under first-order dominance."""
    a_j = _check_unit_open(a_j, "a_j")
    u = p.prior.cdf(a_j)
    out = u - marginal_posterior_cdf_u(u, p)
    return float(out) if out.ndim == 0 else out
