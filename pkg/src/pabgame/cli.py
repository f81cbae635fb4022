"""Command-line front end: ``pab solve|limit|compare|sweep|curves|validate|verify <file>``.

Scenario arguments are JSON files; a name such as ``ex1_lin`` that is not
an existing path resolves to the bundled fixture of that name.  Output is
CSV (default) or JSON on stdout with floats rounded to 12 significant
digits, so identical inputs give byte-identical output.

Exit codes: 0 success, 1 input error, 2 solver non-convergence (or an
equilibrium that fails verification).
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from typing import Any, Dict, List, Sequence

import numpy as np

from . import comparative as cmp
from .equilibrium import (
    EquilibriumResult, default_epsilon, k_sweep, limit_equilibrium, solve_all_active,
    solve_nash_iterated_br, solve_quadratic_closed_form, verify_nash,
)
from .errors import NoConvergence, PABError
from .market import clearing_price, validate
from .scenario_io import EnsembleSpec, ScenarioFileError, load_json, load_profile, parse_ensemble, parse_scenario

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 1, 2


class InputError(Exception):
    pass


class SolverError(Exception):
    pass


def fmt(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(f"{x:.12g}"))


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return fmt(v) if not math.isfinite(v) else float(f"{v:.12g}")
    if isinstance(v, np.ndarray):
        return [_jsonable(e) for e in v.tolist()]
    if isinstance(v, dict):
        return {str(k): _jsonable(e) for k, e in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(e) for e in v]
    return v


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    if v is None:
        return ""
    return str(v)


def render_csv(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)] + [",".join(_cell(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def render(args, header, rows, obj) -> str:
    if args.out == "json":
        return json.dumps(_jsonable(obj), indent=2) + "\n"
    return render_csv(header, rows)


def _cols(prefix: str, n: int) -> List[str]:
    return [f"{prefix}_{i + 1}" for i in range(n)]


# --- loading ----------------------------------------------------------------


def _load(args):
    data = load_json(args.file)
    if isinstance(data, dict) and data.get("kind") == "ensemble":
        return parse_ensemble(data, strict=not args.lenient)
    return parse_scenario(data, strict=not args.lenient)


def _market(args):
    s = _load(args)
    if isinstance(s, EnsembleSpec):
        raise InputError("this command needs a market file, not an ensemble file")
    return s


def _tol(args, scenario):
    if args.tol is None:
        return 1e-8 * scenario.p_hat
    if not args.tol > 0:
        raise InputError("--tol must be positive")
    return args.tol


# --- commands ---------------------------------------------------------------


def _solve(scenario, method: str, tol: float, max_iter: int = 5000) -> EquilibriumResult:
    if method == "auto":
        method = "closed-form" if scenario.is_affine_quadratic and scenario.common_b is not None else "iterated-br"
    if method == "closed-form":
        res = solve_quadratic_closed_form(scenario)
    elif method == "all-active":
        res = solve_all_active(scenario)
    else:
        res = solve_nash_iterated_br(scenario, tol=tol, max_iter=max_iter)
    report = verify_nash(scenario, res.x_star, default_epsilon(scenario, tol))
    res.worst_gain, res.verified = report.worst_gain, report.is_epsilon_nash
    return res


def cmd_solve(args) -> str:
    scenario = _market(args)
    tol = _tol(args, scenario)
    if args.max_iter < 1:
        raise InputError("--max-iter must be at least 1")
    res = _solve(scenario, args.method, tol, args.max_iter)
    if not res.verified:
        raise SolverError(f"{res.method.value} output is not an equilibrium (worst gain {res.worst_gain:.3g})")
    n = scenario.n
    header = ["method", "p_star"] + _cols("x", n) + _cols("q", n) + _cols("u", n) + [
        "iterations", "residual", "worst_gain", "uniqueness"]
    row = [res.method.value, res.p_star, *res.x_star, *res.quantities, *res.utilities,
           res.iterations, res.residual, res.worst_gain, res.uniqueness]
    obj = {
        "method": res.method.value, "p_star": res.p_star, "x_star": res.x_star,
        "quantities": res.quantities, "utilities": res.utilities, "active_set": list(res.active_set),
        "inactive_intervals": {str(i): list(v) for i, v in res.inactive_intervals.items()},
        "iterations": res.iterations, "residual": res.residual, "worst_gain": res.worst_gain,
        "verified": res.verified, "uniqueness": res.uniqueness,
    }
    return render(args, header, [row], obj)


def cmd_limit(args) -> str:
    scenario = _market(args)
    lim = limit_equilibrium(scenario)
    n = scenario.n
    header = ["p_infinity"] + _cols("q", n) + _cols("u", n)
    obj = {"p_infinity": lim.p_infinity, "quantities": lim.quantities_infinity, "utilities": lim.utilities_infinity}
    return render(args, header, [[lim.p_infinity, *lim.quantities_infinity, *lim.utilities_infinity]], obj)


def cmd_compare(args) -> str:
    spec = _load(args)
    if isinstance(spec, EnsembleSpec):
        return _compare_ensemble(args, spec)
    rep = cmp.ordering_report(spec)
    header = ["p_cournot", "p_bertrand_low", "p_sfe", "p_pab_infinity", "d_r"] + [
        name.replace(" < ", "_lt_") for name, _, _ in rep.orderings]
    row = [rep.p_cournot, rep.p_bertrand_low, rep.p_sfe, rep.p_pab_infinity, rep.d_r] + [h for _, h, _ in rep.orderings]
    obj = {
        "p_cournot": rep.p_cournot, "p_bertrand_low": rep.p_bertrand_low,
        "p_bertrand_alpha": [[a, p] for a, p in rep.p_bertrand_alpha.items()],
        "p_sfe": rep.p_sfe, "p_pab_infinity": rep.p_pab_infinity, "sfe_slopes": rep.sfe_slopes,
        "orderings": [{"name": name, "holds": h, "slack": s} for name, h, s in rep.orderings], "d_r": rep.d_r,
    }
    return render(args, header, [row], obj)


def _compare_ensemble(args, spec) -> str:
    hom = cmp.homogeneous_dr(spec.gamma, spec.p_hat, spec.homogeneous_c, spec.homogeneous_n, spec.k)
    rng = np.random.default_rng(args.seed)
    het = cmp.heterogeneous_dr(spec.gamma, spec.p_hat, spec.heterogeneous_n, spec.c_low, spec.c_high,
                               spec.samples, rng, spec.k)
    rows = [["homogeneous", n, d] for n, d in zip(spec.homogeneous_n, hom)]
    rows += [["heterogeneous", spec.heterogeneous_n, d] for d in het]
    obj = {"homogeneous": [{"n": n, "d_r": d} for n, d in zip(spec.homogeneous_n, hom)],
           "heterogeneous": {"n": spec.heterogeneous_n, "d_r": het, "mean": float(het.mean())}}
    return render(args, ["group", "n", "d_r"], rows, obj)


def _k_values(args) -> List[float]:
    if args.k_list is not None and args.k_geom is not None:
        raise InputError("give either --k-list or --k-geom")
    if args.k_list is not None:
        try:
            ks = [float(v) for v in args.k_list.split(",") if v.strip()]
        except ValueError as exc:
            raise InputError(f"--k-list: {exc}") from exc
    elif args.k_geom is not None:
        try:
            start, stop, count = args.k_geom.split(":")
            start, stop, count = float(start), float(stop), int(count)
        except ValueError as exc:
            raise InputError("--k-geom expects start:stop:count") from exc
        if start <= 0 or stop <= 0 or count < 1:
            raise InputError("--k-geom needs positive start, stop and count")
        ks = np.geomspace(start, stop, count).tolist()
    else:
        raise InputError("give --k-list or --k-geom")
    if not ks:
        raise InputError("empty list of K values")
    return ks


def cmd_sweep(args) -> str:
    scenario = _market(args)
    ks = _k_values(args)
    table = k_sweep(scenario, ks)
    n = scenario.n
    header = ["k", "p_star"] + _cols("x", n) + _cols("q", n)
    rows = [[r.k, r.p_star, *r.x_star, *r.quantities] for r in table.rows + [table.limit]]
    obj = {"rows": [{"k": r.k, "p_star": r.p_star, "x_star": r.x_star, "quantities": r.quantities}
                    for r in table.rows + [table.limit]],
           "monotone_in_k": table.monotone_in_k}
    return render(args, header, rows, obj)


def cmd_curves(args) -> str:
    scenario = _market(args)
    if args.samples < 2:
        raise InputError("--samples must be at least 2")
    if args.profile == "from-solve":
        x = _solve(scenario, "auto", _tol(args, scenario)).x_star
    else:
        x = load_profile(args.profile, scenario.n)
    k = scenario.lipschitz_k
    ps = np.linspace(0.0, scenario.p_hat, args.samples)
    supply = k * np.maximum(ps[:, None] - np.asarray(x)[None, :], 0.0)
    demand = scenario.demand.eval(ps)
    rows = [[p, *s, d] for p, s, d in zip(ps, supply, demand)]
    obj = {"p": ps, "supply": supply.T, "demand": demand, "x": x}
    return render(args, ["p"] + _cols("S", scenario.n) + ["D"], rows, obj)


def cmd_validate(args) -> str:
    scenario = _market(args)
    rep = validate(scenario)
    if not rep.valid:
        raise InputError("; ".join(rep.violations))
    return render(args, ["valid", "p_hat", "n", "k"], [[True, rep.p_hat, scenario.n, scenario.lipschitz_k]],
                  {"valid": True, "p_hat": rep.p_hat, "n": scenario.n, "k": scenario.lipschitz_k})


def cmd_verify(args) -> str:
    scenario = _market(args)
    x = load_profile(args.profile, scenario.n)
    eps = args.epsilon if args.epsilon is not None else default_epsilon(scenario, _tol(args, scenario))
    if not eps > 0:
        raise InputError("--epsilon must be positive")
    rep = verify_nash(scenario, x, eps)
    p = clearing_price(scenario, x)
    n = scenario.n
    header = ["is_epsilon_nash", "worst_gain", "p"] + _cols("gain", n) + _cols("br", n)
    row = [rep.is_epsilon_nash, rep.worst_gain, p, *rep.per_producer_gain, *rep.best_responses]
    obj = {"is_epsilon_nash": rep.is_epsilon_nash, "worst_gain": rep.worst_gain, "epsilon": eps, "p": p,
           "per_producer_gain": rep.per_producer_gain, "best_responses": rep.best_responses}
    return render(args, header, [row], obj)


COMMANDS = {
    "solve": cmd_solve, "limit": cmd_limit, "compare": cmd_compare, "sweep": cmd_sweep,
    "curves": cmd_curves, "validate": cmd_validate, "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("file", help="scenario JSON file or bundled scenario name")
    common.add_argument("--tol", type=float, default=None, help="solver tolerance (default 1e-8 * p_hat)")
    common.add_argument("--out", choices=("csv", "json"), default="csv")
    common.add_argument("--seed", type=int, default=0, help="seed for randomised ensembles")
    common.add_argument("--quiet", action="store_true", help="suppress warnings")
    common.add_argument("--lenient", action="store_true", help="warn on unknown fields instead of failing")

    parser = argparse.ArgumentParser(prog="pab", description="Pay-as-bid supply function equilibria.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("solve", parents=[common], help="compute a Nash equilibrium")
    p.add_argument("--method", choices=("auto", "closed-form", "all-active", "iterated-br"), default="auto")
    p.add_argument("--max-iter", type=int, default=5000, help="best-response sweeps before giving up")
    sub.add_parser("limit", parents=[common], help="K -> infinity equilibrium")
    sub.add_parser("compare", parents=[common], help="Cournot, Bertrand and SFE baselines")
    p = sub.add_parser("sweep", parents=[common], help="closed-form equilibria over K")
    p.add_argument("--k-list", default=None, help="comma-separated K values")
    p.add_argument("--k-geom", default=None, help="geometric grid start:stop:count")
    p = sub.add_parser("curves", parents=[common], help="supply and demand curves on a price grid")
    p.add_argument("--profile", default="from-solve", help="'from-solve' or a JSON profile file")
    p.add_argument("--samples", type=int, default=101)
    sub.add_parser("validate", parents=[common], help="check modelling assumptions")
    p = sub.add_parser("verify", parents=[common], help="check whether a profile is an equilibrium")
    p.add_argument("--profile", required=True, help="JSON list or solve --out json output")
    p.add_argument("--epsilon", type=float, default=None)
    return parser


def main(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors; 2 is reserved for the solver
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            text = COMMANDS[args.command](args)
        if not args.quiet:
            for w in caught:
                print(f"warning: {w.message}", file=stderr)
    except (NoConvergence, SolverError) as exc:
        print(f"error: {exc}", file=stderr)
        return EXIT_SOLVER
    except (InputError, ScenarioFileError, PABError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=stderr)
        return EXIT_INPUT
    stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
