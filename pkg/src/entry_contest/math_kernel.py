"""Special functions and quadrature shared by the analytic modules.

Every function here works in "u-space": arguments are values of the prior CDF,
so the order-statistic measures reduce to polynomials in ``u``. The public
wrappers that take an ability ``x`` and a prior simply map through ``prior.cdf``.
"""

from dataclasses import dataclass
import math

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NonConvergenceError

_MIN_DEPTH = 2
_ROUNDOFF = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class Quadrature:
    """Tolerances and budget for adaptive Simpson integration."""

    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2**16

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise DomainError("quadrature tolerances must be positive")
        if int(self.max_subdivisions) < 1:
            raise DomainError("max_subdivisions must be positive")

    def scaled(self, factor):
        """Return a copy with both tolerances multiplied by ``factor``."""
        return Quadrature(self.abs_tol * factor, self.rel_tol * factor, self.max_subdivisions)


DEFAULT_QUADRATURE = Quadrature()


def _evaluate(f, x):
    values = np.asarray(f(x), dtype=float)
    values = np.broadcast_to(values, x.shape)
    if not np.all(np.isfinite(values)):
        raise NonConvergenceError("integrand is not finite on the open interval")
    return values


def integrate_many(f, lo, hi, quad=DEFAULT_QUADRATURE):
    """Integrate a vectorised ``f`` over each interval ``[lo[k], hi[k]]``.

    Adaptive Simpson with bisection, processed breadth first so that every
    refinement level is a single vectorised call of ``f``. Endpoints of the
    original intervals are evaluated at the adjacent interior floating point
    numbers, so integrands only need to be finite on the open interval.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    lo, hi = np.broadcast_arrays(lo, hi)
    if np.any(~np.isfinite(lo)) or np.any(~np.isfinite(hi)):
        raise DomainError("integration limits must be finite")
    if np.any(hi < lo):
        raise DomainError("integration requires lo <= hi")
    n_roots = lo.size
    owner = np.flatnonzero(hi > lo)
    if owner.size == 0:
        return np.zeros(n_roots)

    a = lo.ravel()[owner]
    b = hi.ravel()[owner]
    m = 0.5 * (a + b)
    fa = _evaluate(f, np.nextafter(a, b))
    fb = _evaluate(f, np.nextafter(b, a))
    fm = _evaluate(f, m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    tol = np.maximum(quad.abs_tol, quad.rel_tol * np.abs(whole))
    depth = 0
    budget = quad.max_subdivisions * owner.size
    used = 0
    done_owner, done_value = [], []

    while a.size:
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        both = _evaluate(f, np.concatenate([lm, rm]))
        flm, frm = both[: a.size], both[a.size :]
        h = b - a
        left = h / 12.0 * (fa + 4.0 * flm + fm)
        right = h / 12.0 * (fm + 4.0 * frm + fb)
        refined = left + right
        delta = refined - whole
        ok = np.abs(delta) <= 15.0 * tol
        ok |= np.abs(delta) <= _ROUNDOFF * np.abs(refined)
        ok |= (m <= a) | (m >= b)
        if depth < _MIN_DEPTH:
            ok[:] = False
        done_owner.append(owner[ok])
        done_value.append(refined[ok] + delta[ok] / 15.0)
        keep = ~ok
        used += int(keep.sum())
        if used > budget:
            raise NonConvergenceError(
                f"adaptive Simpson exceeded {quad.max_subdivisions} subdivisions per interval"
            )
        a, m_k, b = a[keep], m[keep], b[keep]
        a, b = np.concatenate([a, m_k]), np.concatenate([m_k, b])
        fa, fb = np.concatenate([fa[keep], fm[keep]]), np.concatenate([fm[keep], fb[keep]])
        fm = np.concatenate([flm[keep], frm[keep]])
        whole = np.concatenate([left[keep], right[keep]])
        tol = np.concatenate([tol[keep], tol[keep]]) * 0.5
        owner = np.concatenate([owner[keep], owner[keep]])
        m = 0.5 * (a + b)
        depth += 1

    owners = np.concatenate(done_owner)
    values = np.concatenate(done_value)
    return np.bincount(owners, weights=values, minlength=n_roots).reshape(lo.shape)


def integrate(f, lo, hi, quad=DEFAULT_QUADRATURE):
    """Integrate a vectorised ``f`` over ``[lo, hi]`` by adaptive Simpson."""
    return float(integrate_many(f, lo, hi, quad)[0])


def binom(n, k):
    """Binomial coefficient as a float, zero outside ``0 <= k <= n``."""
    if k < 0 or k > n:
        return 0.0
    return float(math.comb(n, k))


def _check_unit_open(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if np.any(~((arr > 0.0) & (arr < 1.0))):
        raise DomainError(f"{name} must lie in the open interval (0, 1)")
    return arr


def _check_count(value, name, minimum=0):
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise DomainError(f"{name} must be an integer >= {minimum}")
    return int(value)


def _check_pair(n1, n2):
    n1 = _check_count(n1, "n1", 2)
    n2 = _check_count(n2, "n2", 0)
    if n2 < 2:
        raise DomainError("n2 must be at least 2")
    if n2 > n1:
        raise DomainError("n2 > n1")
    return n1, n2


def _binomial_sum(u, n, j_lo, j_hi):
    total = np.zeros_like(u)
    v = 1.0 - u
    for j in range(j_lo, j_hi + 1):
        total = total + binom(n, j) * u**j * v ** (n - j)
    return total


def beta_lower(u, p, q):
    """Lower incomplete beta on ``[0, 1]`` without argument checks."""
    u = np.asarray(u, dtype=float)
    if p == 0 or q == 0:
        return np.zeros_like(u)
    n = p + q - 1
    complete = 1.0 / (n * binom(n - 1, p - 1))
    return complete * _binomial_sum(u, n, p, n)


def beta_upper(u, p, q):
    """Upper tail ``int_u^1 t^(p-1) (1-t)^(q-1) dt``, free of cancellation."""
    u = np.asarray(u, dtype=float)
    if p == 0 or q == 0:
        return np.zeros_like(u)
    n = p + q - 1
    complete = 1.0 / (n * binom(n - 1, p - 1))
    return complete * _binomial_sum(u, n, 0, p - 1)


def incomplete_beta(x, p, q):
    """B(x, p, q) for integer ``p, q`` and ``x`` in (0, 1); zero when ``p*q == 0``.

    Uses the finite binomial-tail representation, so every term is positive.
    """
    p = _check_count(p, "p")
    q = _check_count(q, "q")
    x = _check_unit_open(x)
    out = beta_lower(x, p, q)
    return float(out) if out.ndim == 0 else out


def os_cdf_u(ell, n, u):
    """CDF of the ell-th largest of ``n`` uniforms; zero for ``ell == 0`` or ``ell > n``."""
    u = np.asarray(u, dtype=float)
    if ell <= 0 or ell > n:
        return np.zeros_like(u)
    return _binomial_sum(u, n, n - ell + 1, n)


def os_density_u(ell, n, u):
    """Density of the ell-th largest of ``n`` uniforms; zero outside ``1..n``."""
    u = np.asarray(u, dtype=float)
    if ell <= 0 or ell > n:
        return np.zeros_like(u)
    coef = ell * binom(n, ell)
    return coef * u ** (n - ell) * (1.0 - u) ** (ell - 1)


def rank_mass_u(ell, n, u):
    """Probability that exactly ``ell - 1`` of ``n`` uniforms exceed ``u``.

    Equals ``os_cdf_u(ell, n, u) - os_cdf_u(ell - 1, n, u)`` for ``1 <= ell <= n + 1``.
    """
    u = np.asarray(u, dtype=float)
    if ell <= 0 or ell > n + 1:
        return np.zeros_like(u)
    return binom(n, ell - 1) * (1.0 - u) ** (ell - 1) * u ** (n - ell + 1)


def rank_mass_density_u(ell, n, u):
    """Derivative of ``rank_mass_u`` in ``u``."""
    return os_density_u(ell, n, u) - os_density_u(ell - 1, n, u)


def I_u(u, n1, n2):
    u = np.asarray(u, dtype=float)
    return (1.0 - u) ** (n2 - 1) + (n2 - 1) * beta_lower(u, n1 - n2 + 1, n2 - 1)


def J_u(u, n1, n2):
    return binom(n1 - 1, n2 - 1) * I_u(u, n1, n2)


def J_excess_u(u, n1, n2):
    """``J - 1`` computed as a sum of positive upper-tail beta integrals."""
    u = np.asarray(u, dtype=float)
    total = np.zeros_like(u)
    for i in range(n1 - n2):
        total = total + beta_upper(u, i + 1, n2)
    return binom(n1 - 1, n2 - 1) * (n2 - 1) * total


def _public(value):
    return float(value) if np.ndim(value) == 0 else value


def order_stat_cdf(ell, n, x, prior):
    """F_(ell, n)(x): CDF of the ell-th largest of ``n`` draws from ``prior``.

    ``ell = 0`` and ``ell = n + 1`` give zero, matching the boundary conventions
    used when differencing consecutive order statistics.
    """
    n = _check_count(n, "n", 1)
    ell = _check_count(ell, "ell")
    if ell > n + 1:
        raise DomainError("ell must satisfy 0 <= ell <= n + 1")
    x = _check_unit_open(x)
    return _public(os_cdf_u(ell, n, prior.cdf(x)))


def order_stat_pdf(ell, n, x, prior):
    """Density of the ell-th largest of ``n`` draws from ``prior``."""
    n = _check_count(n, "n", 1)
    ell = _check_count(ell, "ell", 1)
    if ell > n:
        raise DomainError("ell must satisfy 1 <= ell <= n")
    x = _check_unit_open(x)
    return _public(os_density_u(ell, n, prior.cdf(x)) * prior.pdf(x))


def rank_mass(ell, n, x, prior):
    """F̂_(ell, n)(x) = C(n, ell-1) (1-F)^(ell-1) F^(n-ell+1)."""
    n = _check_count(n, "n", 1)
    ell = _check_count(ell, "ell", 1)
    if ell > n + 1:
        raise DomainError("ell must satisfy 1 <= ell <= n + 1")
    x = _check_unit_open(x)
    return _public(rank_mass_u(ell, n, prior.cdf(x)))


def I_fn(x, n1, n2):
    """(1-x)^(n2-1) + (n2-1) B(x, n1-n2+1, n2-1)."""
    n1, n2 = _check_pair(n1, n2)
    x = _check_unit_open(x)
    return _public(I_u(x, n1, n2))


def J_fn(x, n1, n2):
    """C(n1-1, n2-1) * I(x, n1, n2); never below one."""
    n1, n2 = _check_pair(n1, n2)
    x = _check_unit_open(x)
    return _public(J_u(x, n1, n2))


def J_excess(x, n1, n2):
    """J(x, n1, n2) - 1 evaluated without cancellation near ``x = 1``."""
    n1, n2 = _check_pair(n1, n2)
    x = _check_unit_open(x)
    return _public(J_excess_u(x, n1, n2))


def J_derivative(x, n1, n2):
    """dJ/dx = C(n1-1, n2-1) (n2-1) (1-x)^(n2-2) (x^(n1-n2) - 1)."""
    n1, n2 = _check_pair(n1, n2)
    x = _check_unit_open(x)
    out = binom(n1 - 1, n2 - 1) * (n2 - 1) * (1.0 - x) ** (n2 - 2) * (x ** (n1 - n2) - 1.0)
    return _public(out)


def J_step_polynomial(x, n1, n2):
    """r(x) with J(x, n1, n2-1) - J(x, n1, n2) proportional to (1-x) r(x).

    r(x) = (n2-1) (x + ... + x^(n1-n2) + 2) - n1, defined for 3 <= n2 <= n1.
    """
    n1, n2 = _check_pair(n1, n2)
    if n2 < 3:
        raise DomainError("the J step in n2 needs n2 >= 3")
    x = np.asarray(x, dtype=float)
    powers = sum(x**i for i in range(1, n1 - n2 + 1)) if n1 > n2 else np.zeros_like(x)
    return _public((n2 - 1) * (powers + 2.0) - n1)


def J_step_scale(n1, n2):
    """Positive factor (n1-1)! / ((n2-1)! (n1-n2+1)!) multiplying (1-x) r(x)."""
    n1, n2 = _check_pair(n1, n2)
    return math.factorial(n1 - 1) / (math.factorial(n2 - 1) * math.factorial(n1 - n2 + 1))


def J_monotone_threshold(n1):
    """Smallest ``x`` above which J(x, n1, n2) decreases in n2 over ``[2, n1]``.

    It is the largest root in (0, 1) of ``J_step_polynomial`` over 3 <= n2 <= n1;
    zero when no such root exists.
    """
    n1 = _check_count(n1, "n1", 2)
    threshold = 0.0
    for n2 in range(3, n1 + 1):
        r0 = J_step_polynomial(0.0, n1, n2)
        if r0 >= 0:
            continue
        root = brentq(lambda t: J_step_polynomial(t, n1, n2), 0.0, 1.0, xtol=1e-15)
        threshold = max(threshold, root)
    return threshold
