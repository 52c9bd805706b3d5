"""Ability priors, effort cost functions, and the contest definition."""

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, SpecError

ABILITY_FLOOR = 1e-6
ABILITY_CEIL = 1.0 - 1e-6


@dataclass(frozen=True)
class Prior:
    """Ability distribution on (0, 1).

    Built-in families are ``uniform`` and ``power`` (``F(x) = x**theta``). A
    ``custom`` prior wraps user supplied vectorised cdf, pdf and inverse cdf.
    """

    family: str = "uniform"
    theta: float = 1.0
    custom_cdf: Optional[Callable] = field(default=None, repr=False, compare=False)
    custom_pdf: Optional[Callable] = field(default=None, repr=False, compare=False)
    custom_inverse: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.family == "custom":
            if None in (self.custom_cdf, self.custom_pdf, self.custom_inverse):
                raise DomainError("a custom prior needs cdf, pdf and inverse_cdf")
        elif self.family in ("uniform", "power"):
            if not self.theta > 0:
                raise DomainError("theta must be positive")
            if self.family == "uniform" and self.theta != 1.0:
                raise DomainError("the uniform prior has theta = 1")
        else:
            raise DomainError(f"unknown prior family {self.family!r}")

    @property
    def is_uniform(self):
        return self.family != "custom" and self.theta == 1.0

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "custom":
            return np.asarray(self.custom_cdf(x), dtype=float)
        if self.theta == 1.0:
            return x.copy()
        return x**self.theta

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.family == "custom":
            return np.asarray(self.custom_pdf(x), dtype=float)
        if self.theta == 1.0:
            return np.ones_like(x)
        return self.theta * x ** (self.theta - 1.0)

    def inverse_cdf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "custom":
            return np.asarray(self.custom_inverse(u), dtype=float)
        if self.theta == 1.0:
            return u.copy()
        return u ** (1.0 / self.theta)

    def label(self):
        if self.family == "custom":
            return "custom"
        return "uniform" if self.theta == 1.0 else f"power:{self.theta:g}"


def make_prior(family="power", theta=1.0):
    """Build a built-in prior; ``power`` with ``theta == 1`` is the uniform prior."""
    if family not in ("uniform", "power"):
        raise DomainError(f"unknown prior family {family!r}")
    theta = float(theta)
    if not theta > 0:
        raise DomainError("theta must be positive")
    return Prior("uniform" if theta == 1.0 else "power", theta)


def custom_prior(cdf, pdf, inverse_cdf):
    """Wrap a user supplied continuous prior on (0, 1)."""
    return Prior("custom", 1.0, cdf, pdf, inverse_cdf)


@dataclass(frozen=True)
class CostFn:
    """Strictly increasing effort cost ``g`` with ``g(0) = 0``; ``g(x) = x**k``."""

    family: str = "linear"
    k: float = 1.0

    def __post_init__(self):
        if self.family not in ("linear", "power"):
            raise DomainError(f"unknown cost family {self.family!r}")
        if not self.k >= 1.0:
            raise DomainError("cost exponent k must be at least 1")
        if self.family == "linear" and self.k != 1.0:
            raise DomainError("the linear cost has k = 1")

    def g(self, x):
        x = np.asarray(x, dtype=float)
        return x.copy() if self.k == 1.0 else x**self.k

    def g_inverse(self, y):
        y = np.asarray(y, dtype=float)
        return y.copy() if self.k == 1.0 else y ** (1.0 / self.k)

    def g_prime(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if self.k == 1.0 else self.k * x ** (self.k - 1.0)

    def label(self):
        return "linear" if self.k == 1.0 else f"power:{self.k:g}"


def make_cost(family="linear", k=1.0):
    """Build a cost; ``power`` with ``k == 1`` is the linear cost."""
    if family not in ("linear", "power"):
        raise DomainError(f"unknown cost family {family!r}")
    k = float(k)
    if not k >= 1.0:
        raise DomainError("cost exponent k must be at least 1")
    return CostFn("linear" if k == 1.0 else "power", k)


@dataclass(frozen=True)
class ContestSpec:
    """A complete game instance: n1 entrants, n2 admitted, prizes, prior, cost."""

    n1: int
    n2: int
    prizes: tuple = (1.0,)
    prior: Prior = field(default_factory=Prior)
    cost: CostFn = field(default_factory=CostFn)

    @property
    def prize_array(self):
        return np.asarray(self.prizes, dtype=float)


def _is_int(value):
    return not isinstance(value, bool) and isinstance(value, (int, np.integer))


def validate_spec(spec):
    """Return ``spec`` with prizes zero-padded to length n2, or raise ``SpecError``."""
    if not (_is_int(spec.n1) and _is_int(spec.n2)):
        raise SpecError("n1 and n2 must be integers")
    if spec.n1 < 2:
        raise SpecError("n1 < 2")
    if spec.n2 > spec.n1:
        raise SpecError("n2 > n1")
    if spec.n2 < 2:
        raise SpecError("n2 < 2")
    prizes = [float(v) for v in spec.prizes]
    if any(not np.isfinite(v) for v in prizes):
        raise SpecError("prizes must be finite")
    if any(later > earlier for earlier, later in zip(prizes, prizes[1:])):
        raise SpecError("prizes not nonincreasing")
    if any(v < 0 for v in prizes):
        raise SpecError("negative prize")
    if len(prizes) > spec.n2:
        if any(v != 0.0 for v in prizes[spec.n2 :]):
            raise SpecError("more positive prizes than admitted players")
        prizes = prizes[: spec.n2]
    prizes = prizes + [0.0] * (spec.n2 - len(prizes))
    if not isinstance(spec.prior, Prior) or not isinstance(spec.cost, CostFn):
        raise SpecError("prior and cost must be Prior and CostFn instances")
    return replace(spec, n1=int(spec.n1), n2=int(spec.n2), prizes=tuple(prizes))


def fit_prizes(template, n2):
    """Truncate or zero-pad a prize template to exactly ``n2`` entries."""
    values = [float(v) for v in template][:n2]
    return tuple(values + [0.0] * (n2 - len(values)))


def clamp_ability(a):
    """Clip abilities into the working interval used by grids."""
    return np.clip(np.asarray(a, dtype=float), ABILITY_FLOOR, ABILITY_CEIL)
