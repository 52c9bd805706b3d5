"""Designer-side metrics and the choice of how many players to admit."""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import NumericalError, SpecError
from .math_kernel import DEFAULT_QUADRATURE, integrate, os_density_u
from .equilibrium import build_strategy_table, one_round_effort, restricted_effort
from .priors_costs import ContestSpec, CostFn, Prior, fit_prizes, validate_spec

DEFAULT_GRID = 512


def _table_for(spec, table, grid_size):
    if table is not None:
        return table
    return build_strategy_table(spec, grid_size)


def expected_highest_effort(spec, table=None, grid_size=DEFAULT_GRID, quad=DEFAULT_QUADRATURE):
    """Expected effort of the strongest entrant: integral of b(a) dF^n1(a)."""
    spec = validate_spec(spec)
    if not np.any(spec.prize_array):
        return 0.0
    table = _table_for(spec, table, grid_size)
    n1 = spec.n1

    def integrand(u):
        return table(spec.prior.inverse_cdf(u)) * n1 * u ** (n1 - 1)

    return integrate(integrand, 0.0, 1.0, quad)


def expected_total_effort(
    spec, table=None, grid_size=DEFAULT_GRID, quad=DEFAULT_QUADRATURE, weighting="prior"
):
    """Expected total effort of the admitted players.

    ``weighting="prior"`` returns ``n2 * integral of b dF``, the design metric
    used for the admission-count comparisons. ``weighting="admitted"`` weights
    ``b`` by the density of the admitted abilities (the top ``n2`` order
    statistics of ``n1`` draws), which is the mean of the realised total and is
    what a contest simulation estimates. The two agree when ``n2 == n1``.
    """
    spec = validate_spec(spec)
    if weighting not in ("prior", "admitted"):
        raise ValueError("weighting must be 'prior' or 'admitted'")
    if not np.any(spec.prize_array):
        return 0.0
    table = _table_for(spec, table, grid_size)
    n1, n2 = spec.n1, spec.n2

    if weighting == "prior":

        def integrand(u):
            return n2 * table(spec.prior.inverse_cdf(u))

    else:

        def integrand(u):
            density = sum(os_density_u(r, n1, u) for r in range(1, n2 + 1))
            return table(spec.prior.inverse_cdf(u)) * density

    return integrate(integrand, 0.0, 1.0, quad)


@dataclass(frozen=True)
class SweepRow:
    n2: int
    expected_highest: float
    expected_total: float
    error: Optional[str] = None


@dataclass(frozen=True)
class SweepReport:
    """Design metrics for every admitted count ``n2 = 2..capacity``."""

    n1: int
    capacity: int
    rows: tuple = field(default_factory=tuple)
    argmax_highest: Optional[int] = None
    argmax_total: Optional[int] = None
    corner_flag: bool = False

    def as_dict(self):
        return {
            "n1": self.n1,
            "capacity": self.capacity,
            "argmax_highest": self.argmax_highest,
            "argmax_total": self.argmax_total,
            "corner_flag": self.corner_flag,
            "failed_rows": [{"n2": r.n2, "error": r.error} for r in self.rows if r.error],
        }


def _argmax(rows, attr):
    good = [r for r in rows if r.error is None]
    if not good:
        return None
    values = np.array([getattr(r, attr) for r in good])
    return good[int(np.argmax(values))].n2


def _sweep_row(n1, n2, prizes, prior, cost, grid_size):
    spec = ContestSpec(n1, n2, fit_prizes(prizes, n2), prior, cost)
    try:
        spec = validate_spec(spec)
        table = build_strategy_table(spec, grid_size)
        return SweepRow(n2, expected_highest_effort(spec, table), expected_total_effort(spec, table))
    except (NumericalError, SpecError) as exc:
        return SweepRow(n2, float("nan"), float("nan"), f"{type(exc).__name__}: {exc}")


def sweep_n2(n1, capacity, prizes=(1.0,), prior=None, cost=None, grid_size=DEFAULT_GRID, workers=1):
    """Evaluate both design metrics for each admitted count up to ``capacity``.

    The prize template is truncated or zero-padded to each row's ``n2``; a row
    that fails records its error and the sweep continues.
    """
    prior = prior if prior is not None else Prior()
    cost = cost if cost is not None else CostFn()
    validate_spec(ContestSpec(n1, 2, (0.0,), prior, cost))
    if not (isinstance(capacity, int) and 2 <= capacity <= n1):
        raise SpecError("capacity must satisfy 2 <= capacity <= n1")
    counts = list(range(2, capacity + 1))
    job = lambda n2: _sweep_row(n1, n2, prizes, prior, cost, grid_size)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = tuple(pool.map(job, counts))
    else:
        rows = tuple(job(n2) for n2 in counts)
    best_high = _argmax(rows, "expected_highest")
    best_total = _argmax(rows, "expected_total")
    corners = {2, capacity}
    corner = best_high in corners and best_total in corners
    return SweepReport(n1, capacity, rows, best_high, best_total, corner)


@dataclass(frozen=True)
class DominanceReport:
    """Margins b(a | n1) - b(a | n2) on an ability grid, one row per ``n2``."""

    n1: int
    n2_values: np.ndarray
    abilities: np.ndarray
    margins: np.ndarray
    one_round: np.ndarray
    failures: dict = field(default_factory=dict)


def dominance_report(n1, prizes, prior, cost, abilities):
    """Compare restricted efforts with the unrestricted contest for every ``n2``.

    Rows whose equilibrium is undefined (materially negative inner value) are
    filled with NaN and listed in ``failures``.
    """
    abilities = np.asarray(abilities, dtype=float)
    top = one_round_effort(abilities, n1, fit_prizes(prizes, n1), prior, cost)
    n2_values = np.arange(2, n1 + 1)
    margins = np.full((n2_values.size, abilities.size), np.nan)
    failures = {}
    for row, n2 in enumerate(n2_values):
        spec = ContestSpec(n1, int(n2), fit_prizes(prizes, int(n2)), prior, cost)
        try:
            margins[row] = top - restricted_effort(abilities, spec)
        except NumericalError as exc:
            failures[int(n2)] = str(exc)
    return DominanceReport(n1, n2_values, abilities, margins, np.asarray(top), failures)
