"""Command-line front end writing CSV and JSON artifacts.

Exit status: 0 on success, 2 on invalid input, 3 on a numerical failure and
1 on any other error.
"""

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np
from scipy import stats

from . import beliefs, designer, equilibrium, oracle, two_stage
from .errors import DomainError, NumericalError, SpecError
from .math_kernel import J_fn
from .priors_costs import ContestSpec, fit_prizes, make_cost, make_prior, validate_spec

EXIT_OK, EXIT_INTERNAL, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3
FIGURE_THETAS = (0.5, 1.0, 2.0, 5.0)
FIGURE_COSTS = (1.0, 5.0)
THETA_SCAN = tuple(np.round(np.linspace(0.25, 5.0, 20), 6))


class UsageError(argparse.ArgumentTypeError):
    """Malformed command-line input."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# parsing --------------------------------------------------------------------


def _family_value(text, name):
    family, _, value = text.partition(":")
    if not value:
        return family, None
    try:
        return family, float(value)
    except ValueError:
        raise UsageError(f"bad {name} parameter in {text!r}") from None


def parse_prior(text):
    """``uniform`` or ``power:theta``."""
    family, theta = _family_value(text, "prior")
    if family == "uniform" and theta is None:
        return make_prior("uniform")
    if family == "power" and theta is not None:
        return make_prior("power", theta)
    raise UsageError(f"prior must be 'uniform' or 'power:theta', got {text!r}")


def parse_cost(text):
    """``linear`` or ``power:k``."""
    family, k = _family_value(text, "cost")
    if family == "linear" and k is None:
        return make_cost("linear")
    if family == "power" and k is not None:
        return make_cost("power", k)
    raise UsageError(f"cost must be 'linear' or 'power:k', got {text!r}")


def parse_prizes(text):
    """Comma-separated prize list, or ``wta:V1`` for a single prize."""
    try:
        if text.startswith("wta:"):
            return (float(text[4:]),)
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"prizes must be numbers or 'wta:V1', got {text!r}") from None


# output ---------------------------------------------------------------------


def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".12g")
    return "" if value is None else str(value)


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    _atomic_write(path, buffer.getvalue())


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(path, payload):
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False)
    _atomic_write(path, text + "\n")


def _write(path, fmt, header, rows, summary=None):
    if fmt == "json":
        payload = {"columns": list(header), "rows": [list(r) for r in rows]}
        if summary is not None:
            payload["summary"] = summary
        write_json(path, payload)
    else:
        write_csv(path, header, rows)
        if summary is not None:
            write_json(os.path.splitext(path)[0] + ".json", summary)


# commands -------------------------------------------------------------------


def _spec(args):
    return validate_spec(
        ContestSpec(args.n1, args.n2, args.prizes, args.prior, args.cost)
    )


def cmd_beliefs(args):
    p = beliefs.PosteriorParams(args.a_i, args.n1, args.n2, args.prior)
    grid = equilibrium.chebyshev_grid(args.grid) if args.grid > 2 else np.array([0.5])
    grid = np.sort(np.unique(np.append(grid, args.a_i)))
    rows = zip(
        grid,
        args.prior.pdf(grid),
        beliefs.marginal_posterior_pdf(grid, p),
        args.prior.cdf(grid),
        beliefs.marginal_posterior_cdf(grid, p),
    )
    summary = {
        "n1": args.n1,
        "n2": args.n2,
        "a_i": args.a_i,
        "prior": args.prior.label(),
        "jump": beliefs.belief_jump(p),
        "expected_opponent_ability": beliefs.expected_opponent_ability(p),
    }
    header = ("a_j", "prior_pdf", "posterior_pdf", "prior_cdf", "posterior_cdf")
    _write(args.out, args.format, header, rows, summary)


def cmd_equilibrium(args):
    spec = _spec(args)
    grid = equilibrium.chebyshev_grid(args.grid)
    restricted = equilibrium.restricted_effort(grid, spec)
    one_round = equilibrium.one_round_effort(
        grid, spec.n1, fit_prizes(spec.prizes, spec.n1), spec.prior, spec.cost
    )
    header = ("a", "restricted_effort", "one_round_effort")
    _write(args.out, args.format, header, zip(grid, restricted, one_round))


def cmd_sweep(args):
    report = designer.sweep_n2(
        args.n1, args.capacity, args.prizes, args.prior, args.cost, args.grid, args.workers
    )
    rows = [(r.n2, r.expected_highest, r.expected_total, r.error or "") for r in report.rows]
    summary = dict(report.as_dict(), prior=args.prior.label(), cost=args.cost.label(),
                   prizes=list(args.prizes))
    header = ("n2", "expected_highest", "expected_total", "error")
    _write(args.out, args.format, header, rows, summary)


def cmd_two_stage(args):
    ts = two_stage.TwoStageSpec(args.n1, args.n2, args.prizes, args.prior, args.cost)
    a = args.a
    offsets = np.linspace(-args.width, args.width, 2 * args.points + 1)
    tildes = a + offsets
    if tildes[0] <= 0.0 or tildes[-1] >= 1.0:
        raise DomainError("the a_tilde window must stay inside (0, 1)")
    rows = [(t, two_stage.deviation_gain(a, t, ts, args.mimic)) for t in tildes]
    slope = two_stage.deviation_slope(a, ts, mimic_continuation=args.mimic)
    verdict = dict(slope.as_dict(), a=a, n1=args.n1, n2=args.n2,
                   sign=int(np.sign(slope.slope)), mimic_continuation=args.mimic)
    _write(args.out, args.format, ("a_tilde", "deviation_gain"), rows, verdict)


# verify ---------------------------------------------------------------------

VERIFY_LATTICE = ((5, 2, 0.5), (5, 3, 0.3), (6, 3, 0.7), (8, 4, 0.5), (10, 2, 0.8), (12, 6, 0.6))
VERIFY_BEST_RESPONSE = ((5, 2), (10, 6), (20, 20))


def _ks_check(sample, cdf, alpha=0.01):
    statistic = float(stats.kstest(sample, cdf).statistic)
    critical = float(stats.kstwo.ppf(1.0 - alpha, sample.size))
    return {"statistic": statistic, "critical": critical, "passed": statistic < critical}


def verify_report(mc):
    """Run the oracle checks; the result depends only on ``mc.seed`` and ``mc.samples``."""
    checks = []
    for index, (n1, n2, a) in enumerate(VERIFY_LATTICE):
        p = beliefs.PosteriorParams(a, n1, n2)
        sub = oracle.McConfig(mc.seed + index, mc.samples, mc.batch, mc.workers)
        sample = oracle.mc_posterior_empirical(p, sub)
        fixture = {"n1": n1, "n2": n2, "a_i": a}
        closed = _ks_check(sample, lambda x: beliefs.marginal_posterior_cdf(np.clip(x, 1e-300, None), p))
        checks.append(dict(closed, name="posterior_ks_closed_form", **fixture))
        exact = _ks_check(sample, lambda x: oracle.admission_model_cdf(x, p))
        checks.append(dict(exact, name="posterior_ks_admission_model", **fixture))
        mean = float(sample.mean())
        checks.append({"name": "posterior_mean_above_prior", "mean": mean,
                       "prior_mean": 0.5, "passed": mean > 0.5, **fixture})

    ident = oracle.box_integral_check(6, 3, 3, 0.7, make_prior("uniform"), mc)
    checks.append({"name": "box_integral_identity", "estimate": ident.estimate,
                   "closed_form": ident.closed_form, "z": ident.z, "passed": abs(ident.z) < 4.0})

    spec = validate_spec(ContestSpec(2, 2, (1.0,)))
    table = equilibrium.build_strategy_table(spec, 256)
    sim = oracle.simulate_contest(spec, table, mc)
    z = (sim.highest_mean - 0.25) / sim.highest_se
    checks.append({"name": "simulated_highest_effort", "mean": sim.highest_mean,
                   "std_error": sim.highest_se, "expected": 0.25, "z": z, "passed": abs(z) < 3.0})

    for n1, n2 in VERIFY_BEST_RESPONSE:
        spec = validate_spec(ContestSpec(n1, n2, (1.0,)))
        table = equilibrium.build_strategy_table(spec, 256)
        for a in (0.2, 0.5, 0.9):
            br = oracle.best_response_search(a, spec, table, grid=1000)
            gap = abs(br.effort - table(a))
            checks.append({"name": "best_response", "n1": n1, "n2": n2, "a_i": a,
                           "argmax": br.effort, "equilibrium": table(a), "grid_step": br.grid_step,
                           "passed": gap <= br.grid_step})
    return {
        "seed": mc.seed,
        "samples": mc.samples,
        "checks": checks,
        "passed": sum(c["passed"] for c in checks),
        "failed": sum(not c["passed"] for c in checks),
        "all_passed": all(c["passed"] for c in checks),
    }


def cmd_verify(args):
    mc = oracle.McConfig(args.seed, args.samples, workers=args.workers)
    write_json(args.out, verify_report(mc))


# figures --------------------------------------------------------------------


def _figure_path(directory, name):
    return os.path.join(directory, name)


def figure_fig1(out):
    prior = make_prior("uniform")
    grid = np.linspace(0.005, 0.995, 199)
    for a in (0.3, 0.5, 0.8):
        p = beliefs.PosteriorParams(a, 5, 2, prior)
        x = np.sort(np.append(grid, a))
        write_csv(_figure_path(out, f"fig1_pdf_a{a:g}.csv"), ("a_j", "prior_pdf", "posterior_pdf"),
                  zip(x, prior.pdf(x), beliefs.marginal_posterior_pdf(x, p)))
        write_csv(_figure_path(out, f"fig1_cdf_a{a:g}.csv"), ("a_j", "prior_cdf", "posterior_cdf"),
                  zip(x, prior.cdf(x), beliefs.marginal_posterior_cdf(x, p)))


def _design_figure(out, name, column, workers, grid_size):
    rows, scan = [], []
    for k in FIGURE_COSTS:
        cost = make_cost("linear") if k == 1.0 else make_cost("power", k)
        for theta in FIGURE_THETAS:
            report = designer.sweep_n2(20, 20, (1.0,), make_prior("power", theta), cost,
                                       grid_size, workers)
            rows += [(k, theta, r.n2, getattr(r, column)) for r in report.rows]
        for theta in THETA_SCAN:
            for n2 in (2, 10, 20):
                spec = ContestSpec(20, n2, (1.0,), make_prior("power", float(theta)), cost)
                table = equilibrium.build_strategy_table(spec, grid_size)
                metric = (designer.expected_highest_effort if column == "expected_highest"
                          else designer.expected_total_effort)
                scan.append((k, theta, n2, metric(spec, table)))
    header = ("cost_k", "theta", "n2", column)
    write_csv(_figure_path(out, f"{name}_by_n2.csv"), header, rows)
    write_csv(_figure_path(out, f"{name}_by_theta.csv"), header, scan)


def figure_fig4(out):
    abilities = np.round(np.linspace(0.02, 0.98, 49), 6)
    rows = []
    for n2 in range(2, 21):
        for a in abilities:
            rows.append((n2, a, beliefs.belief_jump(beliefs.PosteriorParams(float(a), 20, n2))))
    write_csv(_figure_path(out, "fig4_jump.csv"), ("n2", "a_i", "jump"), rows)


def figure_fig5(out):
    xs = np.round(np.linspace(0.01, 0.99, 99), 6)
    rows = [(n2, x, J_fn(float(x), 20, n2)) for n2 in range(2, 21) for x in xs]
    write_csv(_figure_path(out, "fig5_J.csv"), ("n2", "x", "J"), rows)


def cmd_figure(args):
    out = args.out
    if args.name == "fig1":
        figure_fig1(out)
    elif args.name == "fig2":
        _design_figure(out, "fig2", "expected_highest", args.workers, args.grid)
    elif args.name == "fig3":
        _design_figure(out, "fig3", "expected_total", args.workers, args.grid)
    elif args.name == "fig4":
        figure_fig4(out)
    else:
        figure_fig5(out)


# entry point ----------------------------------------------------------------


def _contest_flags(parser, n2=True):
    parser.add_argument("--n1", type=int, required=True)
    if n2:
        parser.add_argument("--n2", type=int, required=True)
    parser.add_argument("--prior", type=parse_prior, default=make_prior("uniform"))
    parser.add_argument("--cost", type=parse_cost, default=make_cost("linear"))
    parser.add_argument("--prizes", type=parse_prizes, default=(1.0,))


def _output_flags(parser, default_format=True):
    parser.add_argument("--out", required=True)
    if default_format:
        parser.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = _Parser(prog="entry-contest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("beliefs", help="prior and posterior of one opponent's ability")
    _contest_flags(p)
    p.add_argument("--a-i", dest="a_i", type=float, required=True)
    p.add_argument("--grid", type=int, default=201)
    _output_flags(p)

    p = sub.add_parser("equilibrium", help="restricted and one-round equilibrium efforts")
    _contest_flags(p)
    p.add_argument("--grid", type=int, default=201)
    _output_flags(p)

    p = sub.add_parser("sweep", help="design metrics for every admitted count")
    _contest_flags(p, n2=False)
    p.add_argument("--capacity", type=int, required=True)
    p.add_argument("--grid", type=int, default=designer.DEFAULT_GRID)
    p.add_argument("--workers", type=int, default=1)
    _output_flags(p)

    p = sub.add_parser("verify", help="Monte Carlo and brute-force checks as a JSON report")
    p.add_argument("--samples", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    _output_flags(p, default_format=False)

    p = sub.add_parser("two-stage", help="deviation gain around the true type")
    _contest_flags(p)
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--width", type=float, default=0.05)
    p.add_argument("--points", type=int, default=10)
    p.add_argument("--mimic", action="store_true",
                   help="use the mimicked type's continuation value in stage one")
    _output_flags(p)

    p = sub.add_parser("figure", help="data behind one of the figures")
    p.add_argument("name", choices=("fig1", "fig2", "fig3", "fig4", "fig5"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--grid", type=int, default=designer.DEFAULT_GRID)
    p.add_argument("--workers", type=int, default=1)
    return parser


COMMANDS = {
    "beliefs": cmd_beliefs,
    "equilibrium": cmd_equilibrium,
    "sweep": cmd_sweep,
    "verify": cmd_verify,
    "two-stage": cmd_two_stage,
    "figure": cmd_figure,
}


def run(argv=None):
    """Parse ``argv``, run the command and return the exit status."""
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except (UsageError, SpecError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def main():
    sys.exit(run())
