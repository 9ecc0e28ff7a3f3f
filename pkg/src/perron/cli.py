"""Command line entry point ``perron``.

``perron run``      run a preset sweep and write CSV, fit summary and plot script
``perron fit``      refit a written CSV over a chosen range
``perron density``  write the noisy invariant density of one map

Exit status: 0 success, 2 bad parameters, 3 no sweep point converged,
4 file errors.
"""
from __future__ import annotations

import argparse
import math
import sys

from .errors import NonConvergenceError, NumericError, ParameterError, PerronError

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_NONCONVERGENCE = 3
EXIT_IO = 4

# preset whose grid and noise conventions `density` borrows for each map
DENSITY_PRESET = {
    "map1": "map1", "smooth-expanding": "map1",
    "map2": "map2", "piecewise": "map2",
    "map3": "map3", "quadratic": "map3",
    "map4": "map4-a05", "neutral": "map4-a05",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ParameterError(message)


def _build_parser():
    p = _Parser(prog="perron", description=__doc__.split("\n\n")[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run a preset sweep")
    run.add_argument("--preset", required=True)
    run.add_argument("--config", help="flat key = value file")
    run.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config value (repeatable)")
    run.add_argument("--out", required=True, help="output directory")

    fit = sub.add_parser("fit", help="fit a power law to a sweep CSV")
    fit.add_argument("--csv", required=True)
    fit.add_argument("--lo", type=float, required=True, help="log10 of smallest eps")
    fit.add_argument("--hi", type=float, required=True, help="log10 of largest eps")
    fit.add_argument("--column", choices=("rho", "heuristic"), default="rho")

    dens = sub.add_parser("density", help="write rho_eps on a grid")
    dens.add_argument("--map", required=True)
    dens.add_argument("--eps", type=float, required=True)
    dens.add_argument("--grid", type=int, required=True, help="nodes or bins")
    dens.add_argument("--out", required=True, help="CSV path")
    dens.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return p


def _overrides(args):
    from .experiments import parse_assignment, parse_config_file

    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    for item in args.set:
        key, value = parse_assignment(item)
        values[key] = value
    return values


def _cmd_run(args):
    from .experiments import ExperimentConfig, run_preset

    cfg = ExperimentConfig(args.preset, _overrides(args), args.out)
    result = run_preset(cfg)
    failed = sum(not r.converged for r in result.rows)
    for name, fit in result.fits.items():
        if fit is None:
            print(f"{name}: no fit (too few points in range)")
        else:
            print(f"{name}: gamma = {fit.gamma:.4f} +/- {fit.delta_gamma:.4f} "
                  f"({len(fit.points)} points)")
    if failed:
        print(f"{failed} of {len(result.rows)} sweep points failed", file=sys.stderr)
    print(f"wrote {args.out}")
    return EXIT_OK


def _cmd_fit(args):
    from .experiments import fit_rows, read_sweep_csv

    rows = read_sweep_csv(args.csv)
    fit = fit_rows(rows, args.lo, args.hi, args.column)
    print(f"gamma = {fit.gamma:.17g}")
    print(f"intercept = {fit.intercept:.17g}")
    print(f"delta_gamma = {fit.delta_gamma:.17g}")
    print(f"points = {len(fit.points)}")
    return EXIT_OK


def _cmd_density(args):
    from .experiments import ExperimentConfig

    preset = DENSITY_PRESET.get(args.map)
    if preset is None:
        raise ParameterError(f"unknown map {args.map!r}")
    if not (args.eps >= 0.0 and math.isfinite(args.eps)):
        raise ParameterError("eps must be finite and >= 0")
    if args.grid < 8:
        raise ParameterError("grid needs at least 8 nodes")
    ov = _overrides(args)
    ov["grid.n" if preset != "map3" else "mc.bins"] = args.grid
    s = ExperimentConfig(preset, ov).settings()
    if s["method"] == "histogram":
        x, rho = _histogram_density(s, args.eps, ov)
    else:
        x, rho = _operator_density(s, args.eps)
    try:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("x,rho\n")
            for xi, ri in zip(x, rho):
                fh.write(f"{xi:.17g},{ri:.17g}\n")
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write density: {exc.strerror}",
                      args.out) from exc
    print(f"wrote {args.out}")
    return EXIT_OK


def _operator_density(s, eps):
    from .eigen import dominant_eigenpair
    from .experiments import build_operator_grid
    from .maps import make_map
    from .transfer import (NoiseKernel, NoisyOperator, averaging_operator,
                           transfer_operator)

    m = make_map(s["map"], **s["map.params"])
    grid = build_operator_grid(m, s["grid.n"], s["grid.kind"], s["grid.offset"])
    T = transfer_operator(m, grid)
    kw = dict(tol=s["eigen.tol"], max_iter=s["eigen.max_iter"],
              strategy=s["eigen.strategy"])
    rho = dominant_eigenpair(T, **kw).density
    if eps > 0.0:
        G = averaging_operator(NoiseKernel(s["noise"], eps), grid)
        rho = dominant_eigenpair(NoisyOperator(T, G), init=rho, **kw).density
    return grid.nodes, rho.values


def _histogram_density(s, eps, ov):
    from .maps import make_map
    from .montecarlo import histogram_density, histogram_invariant
    from .transfer import NoiseKernel

    m = make_map(s["map"], **s["map.params"])
    steps = ov.get("mc.steps", 10 ** 7)
    h = histogram_invariant(m, NoiseKernel(s["noise"], eps), s["mc.bins"], steps,
                            s["mc.burn_in"], s["mc.seed"], s["mc.chunks"])
    return h.centers, histogram_density(h)


_COMMANDS = {"run": _cmd_run, "fit": _cmd_fit, "density": _cmd_density}


def main(argv=None):
    try:
        args = _build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except ParameterError as exc:
        print(f"perron: parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except NonConvergenceError as exc:
        print(f"perron: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except OSError as exc:
        print(f"perron: io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, PerronError, ValueError, TypeError) as exc:
        # domain, contract and other input errors all stem from the arguments
        print(f"perron: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
