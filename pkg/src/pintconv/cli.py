"""Command-line interface.

Subcommands: run, norms, bounds, map, tap-scan, wave-study, adv-study.
Every subcommand writes CSV/JSON files with documented names under --out,
embeds its resolved configuration in the JSON record, and honors a JSON
config file whose entries override the corresponding flags.

Exit codes: 0 success, 2 usage error, 1 numeric failure (with diagnostic).
Seed resolution order: --seed flag, PINT_CONV_SEED environment variable, 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .eigbounds import bound_report, complex_map, mode_pairs
from .harness import (ADVECTION_COLUMNS, WAVE_COLUMNS, advection_time_step,
                      emit_report, run_advection_study, run_wave_study, write_csv)
from .model_problems import (build_advection_diffusion, build_wave_first_order,
                             forcing_vector)
from .prop_norms import (PropagatorPair, SingularBlockError, SizeGuardError,
                         direct_norm_oracle, error_norm_f, error_norm_fcf,
                         residual_norm_f)
from .schemes import (StabilityPoleError, SingularStageError, UnknownSchemeError,
                      get_scheme, propagator_matrix, scheme_names)
from .spacetime import InsufficientDataError, assemble, coarsen, mgrit_solve
from .tap import ResolventSingularError, tap_constant
from . import harness

NUMERIC_ERRORS = (SingularBlockError, SizeGuardError, StabilityPoleError,
                  SingularStageError, ResolventSingularError, InsufficientDataError,
                  np.linalg.LinAlgError)


class UsageError(ValueError):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated integer list: {text!r}")


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: PINT_CONV_SEED env var, else 0)")
    p.add_argument("--threads", type=int, default=1, help="worker thread cap")
    p.add_argument("--config", type=Path, default=None,
                   help="JSON file whose entries override the flags")


def _add_problem(p: argparse.ArgumentParser):
    p.add_argument("--problem", choices=("wave", "advection"), default="advection")
    p.add_argument("--m", type=int, default=41, help="wave: grid points per dim (incl. boundary)")
    p.add_argument("--c2", type=float, default=10.0, help="wave: speed squared")
    p.add_argument("--ratio", type=float, default=0.1, choices=(0.1, 1.0),
                   help="wave: time-step regime")
    p.add_argument("--n", type=int, default=16, help="advection: cells per dim")
    p.add_argument("--field", default="v1", help="advection: velocity field id")
    p.add_argument("--alpha", type=float, default=0.0,
                   help="advection: diffusion coefficient in units of dx")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pintconv",
        description="Two-level Parareal/MGRIT convergence bounds and drivers.")
    parser.add_argument("--version", action="version", version=f"pintconv {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the two-level MGRIT solver, emit residual history")
    _add_problem(p)
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--relax", choices=("F", "FCF"), default="FCF")
    p.add_argument("--nt", type=int, default=None, help="fine time points (default per problem)")
    p.add_argument("--dt", type=float, default=None)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=100)
    _add_common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("norms", help="closed-form propagator norms and the dense oracle")
    _add_problem(p)
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--nc", type=_int_list, default=[2, 4, 8], help="coarse point counts")
    p.add_argument("--dt", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_norms)

    p = sub.add_parser("bounds", help="eigenvalue convergence bounds per coarsening factor")
    _add_problem(p)
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--k", type=_int_list, default=[2, 4, 8, 16, 32])
    p.add_argument("--relax", choices=("F", "FCF"), default="FCF")
    p.add_argument("--nt", type=int, default=None)
    p.add_argument("--dt", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("map", help="complex-plane convergence map, one CSV per panel")
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--relax", choices=("F", "FCF"), default="F")
    p.add_argument("--bound", choices=("eval", "single_it"), default="eval")
    p.add_argument("--re-min", type=float, default=-1.0)
    p.add_argument("--re-max", type=float, default=6.0)
    p.add_argument("--im-min", type=float, default=-6.0)
    p.add_argument("--im-max", type=float, default=6.0)
    p.add_argument("--resolution", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("tap-scan", help="GSVD bound as a function of the angle x")
    _add_problem(p)
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--k", type=int, default=16)
    p.add_argument("--relax", choices=("F", "FCF"), default="FCF")
    p.add_argument("--samples", type=int, default=65)
    p.add_argument("--dt", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_tap_scan)

    p = sub.add_parser("wave-study", help="wave problem: bounds vs observed convergence")
    p.add_argument("--ratio", type=float, default=0.1, choices=(0.1, 1.0))
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--m", type=int, default=41)
    p.add_argument("--c2", type=float, default=10.0)
    p.add_argument("--nt", type=int, default=4096, help="fine time steps")
    p.add_argument("--k", type=_int_list, default=[2, 4, 8, 16, 32])
    p.add_argument("--cf-ks", type=_int_list, default=None,
                   help="coarsening factors to run MGRIT for (default: all)")
    p.add_argument("--relax", choices=("F", "FCF"), default="FCF")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=200)
    _add_common(p)
    p.set_defaults(func=cmd_wave_study)

    p = sub.add_parser("adv-study", help="advection-diffusion: bounds vs observed convergence")
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--scheme", default="sdirk1")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--field", default="v1")
    p.add_argument("--k", type=_int_list, default=[2, 4, 8, 16])
    p.add_argument("--relax", choices=("F", "FCF"), default="FCF")
    p.add_argument("--n-coarse", type=int, default=100)
    p.add_argument("--samples", type=int, default=65)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--max-iters", type=int, default=25)
    _add_common(p)
    p.set_defaults(func=cmd_adv_study)

    return parser


def _apply_config(args: argparse.Namespace):
    """Entries of the JSON config file override the parsed flags."""
    if getattr(args, "config", None) is None:
        return
    try:
        overrides = json.loads(Path(args.config).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config file {args.config}: {exc}") from None
    if not isinstance(overrides, dict):
        raise UsageError("config file must hold a JSON object")
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise UsageError(f"config key {key!r} does not match any flag")
        setattr(args, attr, value)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("PINT_CONV_SEED")
    return int(env) if env else 0


def _resolved(args) -> dict:
    skip = {"func", "config"}
    return {k: (str(v) if isinstance(v, Path) else v)
            for k, v in vars(args).items() if k not in skip}


def _build_problem(args):
    if args.problem == "wave":
        return build_wave_first_order(args.m, args.c2)
    return build_advection_diffusion(args.n, args.field, args.alpha / args.n)


def _default_dt(args, scheme) -> float:
    if args.dt is not None:
        return args.dt
    if args.problem == "wave":
        T = 2.0 * np.pi if args.ratio == 0.1 else 20.0 * np.pi
        return T / 4096.0
    return advection_time_step(scheme, 1.0 / args.n)


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(harness.jsonable(payload), indent=2, sort_keys=True) + "\n")


def cmd_run(args) -> int:
    scheme = get_scheme(args.scheme)
    problem = _build_problem(args)
    dt = _default_dt(args, scheme)
    nt = args.nt
    if nt is None:
        nt = 4097 if args.problem == "wave" else 99 * args.k + 1
    if (nt - 1) % args.k != 0:
        raise UsageError(f"nt - 1 = {nt - 1} must be divisible by k = {args.k}")
    seed = _seed(args)
    if args.problem == "wave":
        sys_, coarse = harness.decoupled_wave_system(problem, scheme, dt, nt, args.k)
        forcing = None
    else:
        t_final = (nt - 1) * dt
        sys_ = assemble(problem, scheme, dt, nt, args.k,
                        forcing=lambda t: forcing_vector(problem, t, t_final))
        coarse = coarsen(sys_)
    trace = mgrit_solve(sys_, coarse, relax=args.relax, max_iters=args.max_iters,
                        tol=args.tol, seed=seed)

    args.out.mkdir(parents=True, exist_ok=True)
    rows = [{"iter": i, "residual": r,
             "ratio": trace.cf_per_iter[i - 1] if i > 0 else float("nan")}
            for i, r in enumerate(trace.residual_norms)]
    write_csv(args.out / "residuals.csv", ["iter", "residual", "ratio"], rows)
    _write_json(args.out / "run_summary.json", {
        "version": __version__, "seed": seed, "config": _resolved(args),
        "results": {"iterations": trace.iterations, "worst_cf": trace.worst_cf,
                    "avg_cf": trace.avg_cf, "diverged": trace.diverged,
                    "final_residual": trace.final_residual_norm},
    })
    print(f"wrote {args.out / 'residuals.csv'} ({trace.iterations} iterations, "
          f"worst CF {trace.worst_cf:.4g})")
    return 0


def cmd_norms(args) -> int:
    scheme = get_scheme(args.scheme)
    problem = _build_problem(args)
    dt = _default_dt(args, scheme)
    phi = propagator_matrix(scheme, problem.L, dt)
    psi = propagator_matrix(scheme, problem.L, args.k * dt)
    rows = []
    for nc in args.nc:
        pair = PropagatorPair(phi=phi, psi=psi, k=args.k, n_coarse=nc)
        values = {
            "residual_F": residual_norm_f(pair),
            "error_F": error_norm_f(pair),
            "oracle_residual_F": direct_norm_oracle(pair, "F", "residual"),
            "oracle_error_F": direct_norm_oracle(pair, "F", "error"),
            "oracle_error_FCF": direct_norm_oracle(pair, "FCF", "error"),
            "oracle_residual_FCF": direct_norm_oracle(pair, "FCF", "residual"),
        }
        if nc >= 3:
            values["error_FCF"] = error_norm_fcf(pair)
        rows.extend({"n_coarse": nc, "variant": k, "value": v} for k, v in values.items())
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "norms.csv", ["n_coarse", "variant", "value"], rows)
    _write_json(args.out / "norms.json", {
        "version": __version__, "seed": _seed(args), "config": _resolved(args),
        "results": rows,
    })
    print(f"wrote {args.out / 'norms.csv'}")
    return 0


def cmd_bounds(args) -> int:
    scheme = get_scheme(args.scheme)
    problem = _build_problem(args)
    dt = _default_dt(args, scheme)
    nt = args.nt if args.nt is not None else 4096
    xi = problem.eigendata.values
    rows, reports = [], []
    for k in args.k:
        modes = mode_pairs(xi, scheme, dt, k)
        rep = bound_report(modes, k, max(nt // k, 2), args.relax,
                           config=_resolved(args))
        reports.append(rep)
        rows.append({"k": k, "n_coarse": rep.n_coarse, "relax": args.relax,
                     "eval_bound": rep.eval_bound, "lower_bound": rep.lower_bound,
                     "upper_bound": rep.upper_bound, "single_it_f": rep.single_it_f,
                     "single_it_fcf": rep.single_it_fcf})
    args.out.mkdir(parents=True, exist_ok=True)
    write_csv(args.out / "bounds.csv",
              ["k", "n_coarse", "relax", "eval_bound", "lower_bound", "upper_bound",
               "single_it_f", "single_it_fcf"], rows)
    _write_json(args.out / "bounds.json", {
        "version": __version__, "seed": _seed(args), "config": _resolved(args),
        "results": rows,
    })
    print(f"wrote {args.out / 'bounds.csv'}")
    return 0


def cmd_map(args) -> int:
    scheme = get_scheme(args.scheme)
    region = (args.re_min, args.re_max, args.im_min, args.im_max)
    try:
        result = complex_map(scheme, args.k, args.relax, args.bound, region,
                             args.resolution)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, panel in result.panels.items():
        rows = []
        for i, im in enumerate(result.im):
            for j, re in enumerate(result.re):
                rows.append({"re": re, "im": im, "value": panel[i, j]})
        path = write_csv(args.out / f"map_{name}.csv", ["re", "im", "value"], rows)
        written.append(str(path))
    _write_json(args.out / "map.json", {
        "version": __version__, "seed": _seed(args), "config": _resolved(args),
        "results": {"panels": written, "poles": int(result.pole_mask.sum())},
    })
    print(f"wrote {len(written)} panels under {args.out}")
    return 0


def cmd_tap_scan(args) -> int:
    scheme = get_scheme(args.scheme)
    problem = _build_problem(args)
    dt = _default_dt(args, scheme)
    phi = propagator_matrix(scheme, problem.L, dt)
    psi = propagator_matrix(scheme, problem.L, args.k * dt)
    pair = PropagatorPair(phi=phi, psi=psi, k=args.k, n_coarse=2)
    scan = tap_constant(pair, relax=args.relax, samples=args.samples,
                        threads=args.threads)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = [{"x": x, "value": v} for x, v in zip(scan.x_samples, scan.values)]
    write_csv(args.out / "tap_scan.csv", ["x", "value"], rows)
    _write_json(args.out / "tap_scan.json", {
        "version": __version__, "seed": _seed(args), "config": _resolved(args),
        "results": {"constant": scan.constant, "argmax_x": scan.argmax_x,
                    "relax": scan.relax, "skipped": scan.skipped},
    })
    print(f"wrote {args.out / 'tap_scan.csv'} (constant {scan.constant:.6g})")
    return 0


def cmd_wave_study(args) -> int:
    seed = _seed(args)
    rows = run_wave_study(args.ratio, args.scheme, m=args.m, c2=args.c2,
                          n_steps=args.nt, ks=tuple(args.k), relax=args.relax,
                          tol=args.tol, max_iters=args.max_iters, seed=seed,
                          cf_ks=None if args.cf_ks is None else tuple(args.cf_ks))
    paths = emit_report(rows, WAVE_COLUMNS, args.out, "wave_study",
                        _resolved(args), seed)
    print(f"wrote {paths['csv']}")
    return 0


def cmd_adv_study(args) -> int:
    seed = _seed(args)
    rows = run_advection_study(args.n, args.scheme, args.alpha, args.field,
                               ks=tuple(args.k), relax=args.relax,
                               n_coarse=args.n_coarse, tol=args.tol,
                               max_iters=args.max_iters, seed=seed,
                               tap_samples=args.samples, threads=args.threads)
    paths = emit_report(rows, ADVECTION_COLUMNS, args.out, "adv_study",
                        _resolved(args), seed)
    print(f"wrote {paths['csv']}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        _apply_config(args)
        return args.func(args)
    except (UsageError, UnknownSchemeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_ERRORS as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
