"""Command line front end.

    wolffpot eval --measure powerlaw --n 3 --two-alpha 1 --q 0.5 --probes 12
    wolffpot solve --measure atom --n 3 --alpha 1 --q 0.5 --r 1 --format json
    wolffpot radial-study --measure powerlaw --n 3 --two-alpha 1 --q 0.5
    wolffpot check-conditions --measure counterexample --n 3 --two-alpha 1 --q 0.5
    wolffpot counterexample --n 3 --two-alpha 1 --q 0.5 --beta 2 --out ce.csv

Exit status: 0 success, 2 a condition verdict failed (the report is still
written), 1 invalid input.  Output is deterministic for a given seed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import conditions as cond
from . import discretize as dz
from .measures import Measure, MeasureError, lebesgue, point_mass, zero_measure
from .potentials import ParameterError, PotentialParams, riesz, wolff
from .radial import STUDY_HEADER, make_counterexample, make_powerlaw_example, radial_study
from .solver import GridSpec, SolverError, solve

BUILTINS = ("counterexample", "powerlaw", "atom", "lebesgue-ball", "zero")
EXIT_OK, EXIT_INPUT, EXIT_CONDITION = 0, 1, 2


class InputError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    """Usage errors are input errors: exit 1, one line (2 is reserved for verdicts)."""

    def error(self, message):
        self.exit(EXIT_INPUT, f"error: {message}\n")


def fmt(v) -> str:
    """Shortest round-trip decimal form."""
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--measure", default=None,
                        help=f"measure JSON file or built-in name ({', '.join(BUILTINS)})")
    common.add_argument("--n", type=int, default=3)
    a = common.add_mutually_exclusive_group()
    a.add_argument("--alpha", type=float, default=None)
    a.add_argument("--two-alpha", type=float, default=None)
    common.add_argument("--p", type=float, default=2.0)
    common.add_argument("--q", type=float, default=0.5)
    common.add_argument("--r", type=float, default=0.0)
    common.add_argument("--s", type=float, default=None, help="power of the power-law built-in")
    common.add_argument("--beta", type=float, default=2.0, help="log power of the counterexample")
    common.add_argument("--grid-per-decade", type=int, default=48)
    common.add_argument("--tol", type=float, default=1e-8)
    common.add_argument("--max-iter", type=int, default=500)
    common.add_argument("--probes", default="12",
                        help="count of generated probe radii, or a comma-separated list of radii")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="-")
    common.add_argument("--format", choices=("csv", "json"), default=None)

    parser = _Parser(prog="wolffpot", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eval", parents=[common], help="Wolff and Riesz potentials at probe points")
    sub.add_parser("solve", parents=[common], help="solve u = W(u^q dsigma) + r")
    sub.add_parser("radial-study", parents=[common], help="radial model solve with envelopes")
    sub.add_parser("check-conditions", parents=[common], help="energy, pointwise and radial conditions")
    sub.add_parser("counterexample", parents=[common], help="radial study of the log-weighted counterexample")
    return parser


def params_from(args) -> PotentialParams:
    if args.alpha is None and args.two_alpha is None:
        raise InputError("one of --alpha / --two-alpha is required")
    alpha = args.alpha if args.alpha is not None else args.two_alpha / 2.0
    return PotentialParams(args.n, alpha, args.p, args.q, args.r)


def measure_from(args, params: PotentialParams) -> Measure:
    name = args.measure
    if name is None:
        raise InputError("--measure is required")
    if name in BUILTINS:
        n, ta = params.n, params.two_alpha
        if name == "counterexample":
            return make_counterexample(n, ta, params.q, args.beta)
        if name == "powerlaw":
            s = args.s
            if s is None:
                s = 0.5 * (ta + n - (n - ta) * params.q)
            return make_powerlaw_example(n, ta, params.q, s)
        if name == "atom":
            return point_mass(n, 1.0, 0.1)
        if name == "lebesgue-ball":
            return lebesgue(n, 1.0)
        return zero_measure(n)
    path = Path(name)
    if not path.is_file():
        raise InputError(f"measure file not found: {name}")
    mu = Measure.load(path)
    if mu.n != params.n:
        raise InputError(f"measure dimension {mu.n} does not match --n {params.n}")
    return mu


def probe_radii(args, scale: float) -> np.ndarray:
    spec = str(args.probes).strip()
    if "," in spec or "." in spec or "e" in spec.lower():
        try:
            radii = np.array([float(v) for v in spec.split(",") if v.strip()])
        except ValueError as exc:
            raise InputError(f"bad --probes list: {spec}") from exc
        if radii.size == 0 or np.any(~np.isfinite(radii)) or np.any(radii <= 0.0):
            raise InputError("probe radii must be positive and finite")
        return np.sort(radii)[::-1]
    try:
        count = int(spec)
    except ValueError as exc:
        raise InputError(f"bad --probes value: {spec}") from exc
    if count < 1:
        raise InputError("--probes count must be positive")
    rng = np.random.default_rng(args.seed)
    lo, hi = math.log10(scale) - 5.0, math.log10(scale) + 1.0
    return np.sort(10.0 ** rng.uniform(lo, hi, count))[::-1]


def _scale(mu: Measure) -> float:
    R = mu.support_radius
    return R if (R > 0.0 and math.isfinite(R)) else 1.0


def _point(n: int, radius: float) -> np.ndarray:
    x = np.zeros(n)
    x[0] = radius
    return x


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else fmt(v) for v in row])
    return buf.getvalue()


def render_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def emit(args, text_csv, text_json):
    fmt_ = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    text = text_json() if fmt_ == "json" else text_csv()
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


# -- commands -----------------------------------------------------------------


def _radial_eval(mu, params, radii, per_decade):
    """Potentials through the radial quadrature engine; error is the gap to halved t-panels."""
    knots = dz.measure_knots(mu, per_decade, extra=[radii.min(), radii.max()])
    eng = dz.engine_for(mu, knots)
    zero = np.zeros(len(knots))
    W = dz.WolffOperator(eng, params.alpha, params.p, radii)(zero)
    W2 = dz.WolffOperator(eng, params.alpha, params.p, radii, t_panel=dz.LN10 / 6.0)(zero)
    if params.two_alpha >= mu.n:
        rz = np.full(len(radii), math.nan)
    elif params.p == 2.0:
        rz = W
    else:
        rz = dz.WolffOperator(eng, params.alpha, 2.0, radii)(zero)
    return W, np.abs(W - W2), rz


def cmd_eval(args) -> int:
    params = params_from(args)
    mu = measure_from(args, params)
    radii = probe_radii(args, _scale(mu))
    header = ["radius", "wolff", "wolff_abs_error", "riesz"]
    compact = math.isfinite(mu.support_radius)
    if mu.is_radial and compact and not mu.is_zero:
        W, err, rz = _radial_eval(mu, params, radii, args.grid_per_decade)
        rows = [list(r) for r in zip(radii, W, err, rz)]
    else:
        rows = []
        for rad in radii:
            x = _point(mu.n, rad)
            w = wolff(mu, params, x)
            rz = riesz(mu, params.two_alpha, x).value if params.two_alpha < mu.n else math.nan
            rows.append([rad, w.value, w.abs_error_bound, rz])
    emit(args, lambda: render_csv(header, rows),
         lambda: render_json({"columns": header, "rows": [[fmt(v) for v in r] for r in rows]}))
    return EXIT_OK


def cmd_solve(args) -> int:
    params = params_from(args)
    mu = measure_from(args, params)
    grid = GridSpec(per_decade=args.grid_per_decade, seed=args.seed)
    sol = solve(mu, params, grid, tol=args.tol, max_iter=args.max_iter)
    emit(args, lambda: render_csv(sol.CSV_HEADER, sol.to_rows()), lambda: sol.to_json() + "\n")
    env = sol.envelope
    failed = env is not None and sol.status != "trivial" and not env.super_ok and params.r == 0.0
    return EXIT_CONDITION if failed or not sol.converged else EXIT_OK


def _study(args, mu, params) -> int:
    grid = GridSpec(per_decade=args.grid_per_decade, seed=args.seed)
    sol, rows = radial_study(mu, params, grid, tol=args.tol, max_iter=args.max_iter)
    summary = {
        "status": sol.status, "iterations": sol.iterations, "residual": sol.residual,
        "residual_off_node": sol.residual_off,
        "radial_sandwich": {"c_lower": sol.sandwich[0], "c_upper": sol.sandwich[1]},
        "columns": STUDY_HEADER, "rows": [[fmt(v) for v in r] for r in rows],
    }
    emit(args, lambda: render_csv(STUDY_HEADER, rows), lambda: render_json(summary))
    return EXIT_OK if sol.converged else EXIT_CONDITION


def cmd_radial_study(args) -> int:
    params = params_from(args)
    return _study(args, measure_from(args, params), params)


def cmd_counterexample(args) -> int:
    params = params_from(args)
    return _study(args, make_counterexample(params.n, params.two_alpha, params.q, args.beta), params)


def cmd_check_conditions(args) -> int:
    params = params_from(args)
    mu = measure_from(args, params)
    scale = _scale(mu)
    radii = probe_radii(args, scale)
    reports = []
    radial = mu.is_radial and not mu.is_zero
    if not mu.is_zero:
        balls = [((0.0,) * mu.n, float(r)) for r in radii if r <= scale]
        if radial or not mu.radial_segments:
            reports.append(cond.energy_ball_ratio(mu, params, 1.0, balls, seed=args.seed))
    reports.append(cond.pointwise_kappa(mu, params, [_point(mu.n, r) for r in radii]))
    if radial:
        reports.append(cond.weaker_ball_condition(mu, params, [((0.0,) * mu.n, float(r)) for r in radii]))
        if params.q < 1.0:
            reports.append(cond.radial_existence(mu, params))
            reports.append(cond.radial_ratio_report(mu, params, [r for r in radii if r < scale]))
    header = ["condition_id", "probe", "value", "verdict", "supremum"]

    def rows():
        for rep in reports:
            for probe, v in rep.samples:
                yield [rep.condition_id, json.dumps(probe, sort_keys=True), v, rep.verdict, rep.supremum]

    emit(args, lambda: render_csv(header, rows()), lambda: render_json([r.to_dict() for r in reports]))
    return EXIT_CONDITION if any(r.verdict == "fails" for r in reports) else EXIT_OK


COMMANDS = {
    "eval": cmd_eval,
    "solve": cmd_solve,
    "radial-study": cmd_radial_study,
    "check-conditions": cmd_check_conditions,
    "counterexample": cmd_counterexample,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (InputError, MeasureError, ParameterError, SolverError, ValueError, KeyError, TypeError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
