"""Command line entry point: ``spindepol <command> ...``.

Exit codes: 0 success, 2 invalid arguments or configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .dynamics import NumericalError, RateSet, trajectory
from .entanglement import p_resolution, t_npt, t_p, t_rmax
from .extremal import hoap_search, minimize_purity, mu_from_state, mu_star
from .harness import (
    SCHEMA, ConfigError, FitError, ScanSpec, bipartitions, dumps, fit_rows,
    parse_bipartition_arg, read_csv, resolve_threads, rows_to_csv, run_scan, write_text,
)
from .mpb import purity
from .states import (
    UnsupportedError, anticoherence_measure, mms_distance, parse_state, rmax_ball_radius,
    spin_expectations,
)

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_rates(p):
    g = p.add_argument_group("rates")
    g.add_argument("--isotropic", type=float, metavar="G", help="set gx = gy = gz = G")
    g.add_argument("--gx", type=float, default=None)
    g.add_argument("--gy", type=float, default=None)
    g.add_argument("--gz", type=float, default=None)
    g.add_argument("--omega", type=float, default=0.0)


def _rates(args) -> RateSet:
    if args.isotropic is not None:
        if any(v is not None for v in (args.gx, args.gy, args.gz)):
            raise ConfigError("--isotropic excludes --gx/--gy/--gz")
        return RateSet.isotropic(args.isotropic, args.omega)
    vals = [args.gx, args.gy, args.gz]
    if all(v is None for v in vals):
        raise ConfigError("give --isotropic or --gx/--gy/--gz")
    return RateSet(*(0.0 if v is None else v for v in vals), args.omega)


def _add_common(p, out=True):
    if out:
        p.add_argument("--out", help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--plot", action="store_true", help="also write a PNG next to --out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="spindepol", description="Collective depolarisation of symmetric qubit states.")
    parser.add_argument("--version", action="version", version=f"spindepol {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("evolve", help="purity, r and negativities along a trajectory")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--state", required=True)
    _add_rates(p)
    p.add_argument("--tmax", type=float, required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--bipartitions", default="none")
    _add_common(p)

    p = sub.add_parser("times", help="t_npt per bipartition, t_p and t_rmax")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--state", required=True)
    _add_rates(p)
    p.add_argument("--bipartitions", default="all")
    p.add_argument("--no-tp", action="store_true", help="skip the P-function time")
    _add_common(p)

    p = sub.add_parser("scan", help="run a JSON scan config")
    p.add_argument("--config", required=True)
    _add_common(p)

    p = sub.add_parser("fit", help="fit scan rows against n")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True, choices=("powerlaw", "affine", "affine-sqrt", "const"))
    p.add_argument("--quantity")
    p.add_argument("--state")
    p.add_argument("--shift", type=float, default=0.0, help="fit against n + SHIFT")
    _add_common(p)

    p = sub.add_parser("optimize", help="pure state with the lowest purity at t*")
    p.add_argument("--n", type=int, required=True)
    _add_rates(p)
    p.add_argument("--tstar", type=float, required=True)
    p.add_argument("--restarts", type=int, default=8)
    _add_common(p)

    p = sub.add_parser("hoap", help="search for a q-anticoherent pure state")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--restarts", type=int, default=16)
    _add_common(p)

    p = sub.add_parser("info", help="state summary, or package info without --n")
    p.add_argument("--n", type=int)
    p.add_argument("--state", default="ghz")
    _add_common(p)
    return parser


def _emit(args, text: str) -> None:
    if args.out:
        write_text(args.out, text)
    else:
        sys.stdout.write(text)


def _plot(args, fn, *a, **kw) -> None:
    if not getattr(args, "plot", False):
        return
    if not args.out:
        raise ConfigError("--plot needs --out")
    from . import plotting

    fn(*a, path=plotting.png_path(args.out), **kw)


def _cmd_evolve(args):
    if args.steps < 1 or args.tmax <= 0:
        raise ConfigError("need --steps >= 1 and --tmax > 0")
    rates = _rates(args)
    psi = parse_state(args.state, args.n)
    qs = bipartitions(args.n, parse_bipartition_arg(args.bipartitions))
    times = np.linspace(0.0, args.tmax, args.steps + 1)
    traj = trajectory(psi.multipoles(), rates, times, qs)
    if not np.all(np.isfinite(traj.purity)):
        raise NumericalError("non-finite purity along trajectory")
    cols = ["t", "R", "r"] + [f"neg_{q}_{args.n - q}" for q in qs]
    rows = []
    for i, t in enumerate(times):
        row = {"t": t, "R": traj.purity[i], "r": traj.r[i]}
        row.update({f"neg_{q}_{args.n - q}": traj.negativities[q][i] for q in qs})
        rows.append(row)
    if args.format == "json":
        _emit(args, dumps({"schema": SCHEMA, "n": args.n, "state": args.state,
                           "rates": rates.as_tuple(), "columns": cols,
                           "rows": [[row[c] for c in cols] for row in rows]}))
    else:
        _emit(args, rows_to_csv(rows, cols))
    from . import plotting

    _plot(args, plotting.plot_trajectory, traj, title=f"{args.state}, n={args.n}")


def _cmd_times(args):
    rates = _rates(args)
    psi = parse_state(args.state, args.n)
    qs = bipartitions(args.n, parse_bipartition_arg(args.bipartitions))
    tp = math.nan if args.no_tp else t_p(psi, rates)
    tr = t_rmax(psi, rates)
    rows = [
        {"n": args.n, "state": args.state, "gx": rates.gx, "gy": rates.gy, "gz": rates.gz,
         "q_bipartition": q, "t_npt": t_npt(psi, rates, q), "t_p": tp, "t_rmax": tr}
        for q in qs
    ]
    cols = ["n", "state", "gx", "gy", "gz", "q_bipartition", "t_npt", "t_p", "t_rmax"]
    if args.format == "json":
        _emit(args, dumps({"schema": SCHEMA, "rows": rows}))
    else:
        _emit(args, rows_to_csv(rows, cols))
    if rows:
        from . import plotting

        _plot(args, plotting.plot_times, rows, title=f"{args.state}, n={args.n}")


def _cmd_scan(args):
    spec = ScanSpec.load(args.config)
    rows = run_scan(spec, args.threads)
    if args.format == "json":
        _emit(args, dumps({"schema": SCHEMA, "spec": spec.to_json(), "rows": rows}))
    else:
        _emit(args, rows_to_csv(rows))
    from . import plotting

    _plot(args, plotting.plot_scan, rows)


def _cmd_fit(args):
    rows = read_csv(args.input)
    if args.quantity:
        rows = [r for r in rows if r.get("quantity") == args.quantity]
    if args.state:
        rows = [r for r in rows if r.get("state") == args.state]
    fits = fit_rows(rows, args.model, shift=args.shift)
    if args.format == "csv":
        cols = ["state", "quantity", "q", "model", "a", "b", "r_squared", "npoints"]
        out = [{**f.group, "model": f.model, **f.params, "r_squared": f.r_squared, "npoints": f.npoints}
               for f in fits]
        _emit(args, rows_to_csv(out, cols))
    else:
        _emit(args, dumps({"schema": SCHEMA, "model": args.model, "shift": args.shift,
                           "fits": [f.to_json() for f in fits]}))
    from . import plotting

    _plot(args, plotting.plot_fits, fits, rows, shift=args.shift)


def _cmd_optimize(args):
    rates = _rates(args)
    threads = resolve_threads(args.threads)
    res = minimize_purity(args.n, rates, args.tstar, args.restarts, args.seed, threads)
    report = res.to_json(rates, args.tstar)
    report["A"] = {str(q): anticoherence_measure(res.state, q) for q in range(1, args.n)}
    if args.n == 4:
        mu = mu_from_state(res.state)
        report["mu_numeric"] = mu
        report["mu_star"] = mu_star(rates, args.tstar)
    _emit(args, dumps(report))
    from . import plotting

    _plot(args, plotting.plot_state, res.state, title=f"optimum, t*={args.tstar:g}")


def _cmd_hoap(args):
    threads = resolve_threads(args.threads)
    res = hoap_search(args.n, args.q, args.restarts, args.seed, threads)
    report = res.to_json()
    report["q"] = args.q
    report["success"] = res.objective <= 1e-10
    _emit(args, dumps(report))
    from . import plotting

    _plot(args, plotting.plot_state, res.state, title=f"n={args.n}, q={args.q}")


def _cmd_info(args):
    if args.n is None:
        info = {"schema": SCHEMA, "version": __version__,
                "states": ["ghz", "w", "db", "hoap", "dicke:k", "coherent:theta,phi", "file:PATH"],
                "quantities": ["R", "r", "negativity", "t_npt", "t_p", "t_rmax", "qsl"]}
    else:
        psi = parse_state(args.state, args.n)
        v = psi.multipoles()
        ex = spin_expectations(psi)
        info = {
            "schema": SCHEMA, "n": args.n, "state": args.state,
            "dicke": psi.to_json()["dicke"],
            "purity": purity(v), "r": mms_distance(v), "rmax": rmax_ball_radius(args.n),
            "anticoherence_order": v.anticoherence_order(1e-10),
            "A": {str(q): anticoherence_measure(psi, q) for q in range(1, args.n)},
            "jmean": ex.jmean.tolist(), "variances": ex.variances.tolist(),
            "p_grid_step": p_resolution(args.n)[0],
        }
    _emit(args, dumps(info))


COMMANDS = {
    "evolve": _cmd_evolve, "times": _cmd_times, "scan": _cmd_scan, "fit": _cmd_fit,
    "optimize": _cmd_optimize, "hoap": _cmd_hoap, "info": _cmd_info,
}


def cli_main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    except (NumericalError, FitError, ArithmeticError) as exc:
        print(f"spindepol: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, UnsupportedError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"spindepol: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())
