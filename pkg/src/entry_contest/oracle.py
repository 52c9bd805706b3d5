"""Independent checks of the closed forms: sampling, simulation and brute force.

Random numbers come from Philox streams keyed by ``(seed, batch index)``, so a
batch's draws depend only on its index. Batches may run on several threads but
are always merged in index order, which makes every result independent of the
number of workers.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
from typing import NamedTuple

import numpy as np

from .errors import AcceptanceStarvationError, DomainError
from .equilibrium import EFFORT_QUADRATURE, expected_utility, on_path_win_probabilities
from .math_kernel import (
    DEFAULT_QUADRATURE,
    I_u,
    beta_lower,
    binom,
    integrate,
    os_cdf_u,
    os_density_u,
    rank_mass_u,
)
from .priors_costs import validate_spec

_PROBE_TRIALS = 2**20
_STARVATION_RATE = 1e-6


@dataclass(frozen=True)
class McConfig:
    """Seed, sample count, batch size and worker threads for Monte Carlo runs."""

    seed: int = 0
    samples: int = 10**6
    batch: int = 2**14
    workers: int = 1

    def __post_init__(self):
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")
        if self.samples < 1 or self.batch < 1 or self.workers < 1:
            raise DomainError("samples, batch and workers must be positive")


def batch_generator(seed, index):
    """Independent generator for batch ``index`` of stream ``seed``."""
    key = (int(seed) << 64) | int(index)
    return np.random.Generator(np.random.Philox(key=key))


def _map_batches(job, first, count, mc):
    indices = range(first, first + count)
    if mc.workers > 1 and count > 1:
        with ThreadPoolExecutor(mc.workers) as pool:
            return list(pool.map(job, indices))
    return [job(i) for i in indices]


def _batches_per_round(mc):
    return max(mc.workers, 4)


# posterior sampling -------------------------------------------------------


def _accepted_batch(p, mc, index):
    """Uniform draws of ``n1 - 1`` opponents, filtered on ``a_i`` being admitted.

    Returns the accepted rows' admitted opponents (sorted descending, in
    ``u``-space) and the index of one uniformly chosen opponent per row.
    """
    rng = batch_generator(mc.seed, index)
    draws = rng.random((mc.batch, p.n1 - 1))
    pick = rng.integers(0, p.n2 - 1, size=mc.batch)
    above = (draws > p.u_i).sum(axis=1)
    keep = above <= p.n2 - 1
    rows = -np.sort(-draws[keep], axis=1)[:, : p.n2 - 1]
    return rows, pick[keep]


def mc_posterior_records(p, mc):
    """Rejection sample of the other admitted abilities given ``a_i`` is admitted.

    Opponent abilities are drawn i.i.d. from the prior; a draw is kept iff at
    most ``n2 - 1`` of them exceed ``a_i``. Returns ``(records, picks)``:
    ``mc.samples`` rows of the ``n2 - 1`` admitted opponents in ability space
    (descending) and one uniformly chosen column index per row.
    """
    if p.n2 == p.n1:
        raise DomainError("with n2 == n1 the posterior equals the prior")
    kept, picks, trials, accepted = [], [], 0, 0
    next_index = 0
    while accepted < mc.samples:
        count = _batches_per_round(mc)
        results = _map_batches(lambda i: _accepted_batch(p, mc, i), next_index, count, mc)
        next_index += count
        for rows, pick in results:
            kept.append(rows)
            picks.append(pick)
            accepted += rows.shape[0]
        trials += count * mc.batch
        if trials >= _PROBE_TRIALS and accepted < _STARVATION_RATE * trials:
            raise AcceptanceStarvationError(
                f"acceptance rate {accepted / trials:.2e} is below {_STARVATION_RATE:g}"
            )
    records = np.concatenate(kept)[: mc.samples]
    picks = np.concatenate(picks)[: mc.samples]
    return p.prior.inverse_cdf(records), picks


def mc_posterior_empirical(p, mc, pool=False):
    """Sorted sample from one opponent's posterior ability distribution.

    By default one uniformly chosen admitted opponent per accepted draw is
    kept, so the sample is i.i.d. and exact KS critical values apply. With
    ``pool=True`` all ``n2 - 1`` opponents of every accepted draw are pooled.
    With ``n2 == n1`` the posterior is the prior and the prior is sampled.
    """
    if p.n2 == p.n1:
        rng = batch_generator(mc.seed, 0)
        return np.sort(p.prior.inverse_cdf(rng.random(mc.samples)))
    records, picks = mc_posterior_records(p, mc)
    if pool:
        return np.sort(records.ravel())
    return np.sort(records[np.arange(records.shape[0]), picks])


def admission_model_normaliser(p):
    """Normaliser of the exact posterior under i.i.d. abilities and top-n2 admission.

    F(a_i)^m (1 - F(a_i))^(n2-1) + (n2-1) B(F(a_i), m+1, n2-1) with m = n1 - n2;
    times C(n1-1, n2-1) it is the probability that ``a_i`` is admitted.
    """
    m, n2, ui = p.n1 - p.n2, p.n2, p.u_i
    return ui**m * (1.0 - ui) ** (n2 - 1) + (n2 - 1) * float(beta_lower(ui, m + 1, n2 - 1))


def admission_model_cdf(a_j, p):
    """Exact posterior CDF of one admitted opponent under the sampling model.

    The joint posterior of the other admitted abilities is proportional to
    F(min(a_i, a_-i))^(n1-n2) prod f, so one opponent's density in ``u`` is
    (n2-2) B(c, m+1, n2-2) + c^m (1-c)^(n2-2) with ``c = min(u, F(a_i))``.
    """
    u = np.asarray(p.prior.cdf(np.asarray(a_j, dtype=float)), dtype=float)
    if p.n1 == p.n2:
        return u
    m, n2, ui = p.n1 - p.n2, p.n2, p.u_i
    z = admission_model_normaliser(p)

    def below(x):
        return m * (x * beta_lower(x, m, n2 - 1) - beta_lower(x, m + 1, n2 - 1))

    above = (n2 - 2) * float(beta_lower(ui, m + 1, n2 - 2)) + ui**m * (1.0 - ui) ** (n2 - 2)
    out = np.where(u < ui, below(u), below(ui) + (u - ui) * above) / z
    return float(out) if out.ndim == 0 else out


def admission_model_win_probabilities(a, spec):
    """On-path rank probabilities under the sampling model; shape ``(..., n2)``.

    Rank ``l`` means exactly ``l - 1`` of the other ``n1 - 1`` abilities are
    higher, conditional on at most ``n2 - 1`` being higher.
    """
    spec = validate_spec(spec)
    u = np.asarray(spec.prior.cdf(np.asarray(a, dtype=float)), dtype=float)
    n = spec.n1 - 1
    admitted = os_cdf_u(spec.n2, n, u)
    # at u = 0 every opponent is higher, so the player is last
    last = np.eye(spec.n2)[-1]
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = np.stack([rank_mass_u(ell, n, u) / admitted for ell in range(1, spec.n2 + 1)], axis=-1)
    return np.where((np.asarray(admitted) > 0)[..., None], probs, last)


def exact_win_probabilities(gamma, p, quad=DEFAULT_QUADRATURE):
    """Rank probabilities under the closed-form joint posterior when acting like ``gamma``.

    Unlike the closed forms of the equilibrium module, which hold on one side
    of ``a_i`` only, this integrates the joint posterior for every ``gamma``.
    Beating an opponent means having a higher ability-equivalent, so finishing
    at rank ``l`` means exactly ``l - 1`` of the ``n2 - 1`` opponents lie above
    ``gamma``. The posterior weight of a configuration depends only on the
    lowest opponent, which reduces every probability to a one-dimensional
    integral over that minimum.
    """
    if not 0.0 < gamma < 1.0:
        raise DomainError("gamma must lie in (0, 1)")
    n1, n2, m, ui = p.n1, p.n2, p.n1 - p.n2, p.u_i
    g = float(p.prior.cdf(gamma))

    def weight(t):
        return np.where(t < ui, t**m, 1.0)

    def split_integral(fun, lo, hi):
        cut = min(max(ui, lo), hi)
        return integrate(fun, lo, cut, quad) + integrate(fun, cut, hi, quad)

    probs = np.empty(n2)
    for ell in range(1, n2):
        k = n2 - ell
        below = split_integral(lambda t: weight(t) * k * (g - t) ** (k - 1), 0.0, g)
        probs[ell - 1] = binom(n2 - 1, ell - 1) * (1.0 - g) ** (ell - 1) * below
    probs[n2 - 1] = split_integral(
        lambda t: weight(t) * (n2 - 1) * (1.0 - t) ** (n2 - 2), g, 1.0
    )
    return probs / float(I_u(ui, n1, n2))


# full contest simulation --------------------------------------------------


class ContestSimulation(NamedTuple):
    """Aggregates of simulated contests played with a strategy table."""

    contests: int
    bin_edges: np.ndarray
    rank_counts: np.ndarray
    highest_mean: float
    highest_se: float
    total_mean: float
    total_se: float

    @property
    def bin_totals(self):
        return self.rank_counts.sum(axis=1)

    @property
    def win_frequencies(self):
        totals = self.bin_totals[:, None]
        with np.errstate(invalid="ignore", divide="ignore"):
            return self.rank_counts / totals

    @property
    def win_standard_errors(self):
        freq = self.win_frequencies
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.sqrt(freq * (1.0 - freq) / self.bin_totals[:, None])


def _batch_size(mc, index):
    return min(mc.batch, mc.samples - index * mc.batch)


def _contest_batch(spec, table, mc, edges, index):
    rng = batch_generator(mc.seed, index)
    u = rng.random((_batch_size(mc, index), spec.n1))
    admitted_u = -np.sort(-u, axis=1)[:, : spec.n2]
    abilities = spec.prior.inverse_cdf(admitted_u)
    efforts = np.asarray(table(abilities))
    order = np.argsort(-efforts, axis=1, kind="stable")
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, np.arange(spec.n2)[None, :], axis=1)
    bins = np.clip(np.searchsorted(edges, abilities, side="right") - 1, 0, len(edges) - 2)
    counts = np.zeros((len(edges) - 1, spec.n2))
    np.add.at(counts, (bins.ravel(), ranks.ravel()), 1.0)
    highest = efforts.max(axis=1)
    total = efforts.sum(axis=1)
    return counts, highest.sum(), (highest**2).sum(), total.sum(), (total**2).sum()


def simulate_contest(spec, table, mc, bins=10):
    """Play ``mc.samples`` contests with the tabulated strategy.

    Each contest draws ``n1`` abilities, admits the top ``n2``, maps them
    through the table and ranks the efforts. Returns rank counts per ability
    bin of the admitted players and means with standard errors of the highest
    and total admitted effort.
    """
    spec = validate_spec(spec)
    edges = np.linspace(0.0, 1.0, bins + 1)
    n_batches = math.ceil(mc.samples / mc.batch)
    results = _map_batches(lambda i: _contest_batch(spec, table, mc, edges, i), 0, n_batches, mc)
    contests = mc.samples
    counts = np.zeros((bins, spec.n2))
    s_h = s_hh = s_t = s_tt = 0.0
    for c, h, hh, t, tt in results:
        counts += c
        s_h += h
        s_hh += hh
        s_t += t
        s_tt += tt
    mean_h, mean_t = s_h / contests, s_t / contests
    se_h = math.sqrt(max(s_hh / contests - mean_h**2, 0.0) / contests)
    se_t = math.sqrt(max(s_tt / contests - mean_t**2, 0.0) / contests)
    return ContestSimulation(contests, edges, counts, mean_h, se_h, mean_t, se_t)


def binned_model_win_probabilities(spec, edges, quad=DEFAULT_QUADRATURE, model="closed_form"):
    """Model rank probabilities averaged over admitted abilities within each bin.

    The weight of ability ``a`` is the density of admitted abilities, the sum
    of the densities of the top ``n2`` order statistics of ``n1`` draws.
    ``model="closed_form"`` uses the on-path closed forms of the equilibrium
    module, ``model="admission"`` the exact sampling-model probabilities.
    """
    spec = validate_spec(spec)
    if model == "closed_form":
        probabilities = on_path_win_probabilities
    elif model == "admission":
        probabilities = admission_model_win_probabilities
    else:
        raise ValueError("model must be 'closed_form' or 'admission'")
    n1, n2 = spec.n1, spec.n2
    u_edges = spec.prior.cdf(np.asarray(edges, dtype=float))

    def density(u):
        return sum(os_density_u(r, n1, u) for r in range(1, n2 + 1))

    out = np.zeros((len(edges) - 1, n2))
    for b in range(len(edges) - 1):
        lo, hi = u_edges[b], u_edges[b + 1]
        mass = integrate(density, lo, hi, quad)
        for ell in range(n2):
            value = integrate(
                lambda u: probabilities(spec.prior.inverse_cdf(u), spec)[..., ell]
                * density(u),
                lo,
                hi,
                quad,
            )
            out[b, ell] = value / mass
    return out


# best response ------------------------------------------------------------


class BestResponse(NamedTuple):
    effort: float
    utility: float
    grid_step: float
    utility_at_equilibrium: float
    worst_deviation_loss: float


def best_response_search(a_i, spec, table, grid=2000):
    """Exhaustive search of expected utility over a uniform effort grid.

    The grid spans ``[0, 1.2 * b(1-)]``. Also reports the utility at the
    tabulated equilibrium effort and the smallest gain from playing it instead
    of any grid effort.
    """
    if grid < 500:
        raise DomainError("grid must have at least 500 points")
    spec = validate_spec(spec)
    efforts = np.linspace(0.0, 1.2 * table.top_effort, grid)
    utility = np.asarray(expected_utility(efforts, a_i, spec, table))
    best = int(np.argmax(utility))
    at_eq = float(expected_utility(table(a_i), a_i, spec, table))
    return BestResponse(
        float(efforts[best]),
        float(utility[best]),
        float(efforts[1] - efforts[0]),
        at_eq,
        float(np.min(at_eq - utility)),
    )


# integral identity --------------------------------------------------------


class IdentityCheck(NamedTuple):
    estimate: float
    closed_form: float
    std_error: float
    z: float


def box_integral_closed_form(n, m, k, x, prior):
    """(n-m)! k! / (n-m+k)! * F(x)^(n-m+k)."""
    d = n - m
    factor = math.factorial(d) * math.factorial(k) / math.factorial(d + k)
    return factor * float(prior.cdf(x)) ** (d + k)


def box_integral_quadrature(n, m, x, prior, quad=EFFORT_QUADRATURE):
    """One-dimensional case: integral of F^(n-m) dF over (0, x)."""
    return integrate(lambda u: u ** (n - m), 0.0, float(prior.cdf(x)), quad)


def _identity_batch(d, k, ux, mc, index):
    rng = batch_generator(mc.seed, index)
    u = rng.random((_batch_size(mc, index), k))
    inside = np.all(u < ux, axis=1)
    values = np.where(inside, u.min(axis=1) ** d, 0.0)
    return values.sum(), (values**2).sum()


def box_integral_check(n, m, k, x, prior, mc):
    """Monte Carlo estimate of the box integral of F^(n-m)(min) prod f versus its closed form.

    Points are drawn from the prior, so the estimator is the mean of
    ``1{all t_i < x} F(min t)^(n-m)``.
    """
    if not 1 <= k <= 6:
        raise DomainError("k must satisfy 1 <= k <= 6")
    if n - m < 0:
        raise DomainError("need n - m >= 0")
    if not 0.0 < x < 1.0:
        raise DomainError("x must lie in (0, 1)")
    ux = float(prior.cdf(x))
    n_batches = math.ceil(mc.samples / mc.batch)
    parts = _map_batches(lambda i: _identity_batch(n - m, k, ux, mc, i), 0, n_batches, mc)
    draws = mc.samples
    s = sum(p[0] for p in parts)
    ss = sum(p[1] for p in parts)
    mean = s / draws
    se = math.sqrt(max(ss / draws - mean**2, 0.0) / draws)
    closed = box_integral_closed_form(n, m, k, x, prior)
    z = (mean - closed) / se if se > 0 else (0.0 if mean == closed else math.inf)
    return IdentityCheck(mean, closed, se, z)

