"""Command-line frontend: convergence runs, stability tables/regions and ensemble simulation.

Every successful run writes CSV output plus a ``manifest.txt`` sidecar that
records the full argument vector, so ``splitstep replay manifest.txt``
regenerates the same CSV bytes.
"""

from __future__ import annotations

import argparse
import os
import shlex
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import stability as st
from .harness import cle as cle_mod
from .harness.convergence import DEFAULT_METHODS, convergence_study
from .harness.ensemble import (ensemble_stats, read_manifest, stats_header, stats_rows, write_csv,
                               write_manifest)
from .integrators import METHOD_NAMES, MethodConfig, integrate_ensemble
from .sde_model import (coupled_linear_benchmark, diagonal_test_system, nonnormal_test_system,
                        scalar_multichannel, stiff_oscillator)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 2

MANIFEST_NAME = "manifest.txt"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def parse_step(text: str) -> float:
    """Accept plain floats and ``2^-k`` style powers."""
    s = text.strip()
    try:
        if "^" in s:
            base, exp = s.split("^", 1)
            return float(base) ** float(exp)
        return float(s)
    except ValueError:
        raise UsageError(f"cannot parse step size {text!r}")


def parse_kv(text: Optional[str]) -> Dict[str, float]:
    out = {}
    if not text:
        return out
    for item in text.split(","):
        if not item.strip():
            continue
        if "=" not in item:
            raise UsageError(f"expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        try:
            out[k.strip()] = float(v)
        except ValueError:
            raise UsageError(f"bad value in {item!r}")
    return out


def parse_steps(text: str) -> List[float]:
    """``"1.0:0.1:0.1"`` (max:min:step, descending) or a comma list."""
    if ":" in text:
        try:
            hi, lo, dh = (float(v) for v in text.split(":"))
        except ValueError:
            raise UsageError(f"bad step range {text!r}, expected max:min:step")
        if not (0 < lo <= hi and dh > 0):
            raise UsageError(f"bad step range {text!r}")
        return st.table_steps(hi, lo, dh)
    return [parse_step(s) for s in text.split(",") if s.strip()]


def _output(args, default_name: str) -> Path:
    """``--out`` names a directory, or the CSV itself when it ends in .csv."""
    path = args.out / default_name if args.out.suffix != ".csv" else args.out
    args._outputs.append(path)
    return path


def _method_names(text: str) -> List[str]:
    if text.strip().lower() == "all":
        return list(st.TABLE_METHODS)
    names = [s.strip().lower() for s in text.split(",") if s.strip()]
    if not names:
        raise UsageError("empty method list")
    for n in names:
        try:
            MethodConfig.from_name(n)
        except (ValueError, KeyError) as exc:
            raise UsageError(f"unknown method {n!r} (known: {', '.join(METHOD_NAMES)})") from exc
    return names


def _config(args, name: Optional[str] = None) -> MethodConfig:
    name = name or args.method
    kw = {"newton_tol": args.newton_tol}
    if args.theta is not None:
        kw["theta"] = args.theta
    if args.eta is not None:
        kw["eta"] = args.eta
    if args.levy_p is not None:
        kw["levy_p"] = args.levy_p
    try:
        return MethodConfig.from_name(name, **kw)
    except (ValueError, KeyError) as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- models

def _linear_model(builder, T, x0):
    def make(args, p):
        lin = builder(args, p)
        return lin.to_system(0.0, p.get("T", T)), np.asarray(x0(lin) if callable(x0) else x0, float)
    return make


MODELS = {
    "diagonal": _linear_model(
        lambda a, p: diagonal_test_system(p.get("lam", -1.0), p.get("eps", 0.5), p.get("sigma", 0.5)),
        1.0, lambda lin: np.ones(lin.d)),
    "nonnormal": _linear_model(
        lambda a, p: nonnormal_test_system(p.get("lam", -1.0), p.get("b", 5.0), p.get("sigma", 0.5)),
        1.0, lambda lin: np.ones(lin.d)),
    "scalar": _linear_model(
        lambda a, p: scalar_multichannel(p.get("lam", -1.0), p.get("sigma", 0.5), a.m),
        1.0, lambda lin: np.ones(lin.d)),
    "benchmark": _linear_model(
        lambda a, p: coupled_linear_benchmark(a.d, a.m), 1.0, lambda lin: np.ones(lin.d)),
    "oscillator": _linear_model(
        lambda a, p: stiff_oscillator(p.get("beta", 5.0), p.get("sigma", 4.0), p.get("rho", 0.5)),
        20.0, (1.0, 0.0)),
    "cle": lambda a, p: (cle_mod.cle_system(noise_scale=p.get("noise_scale", 1.0), T=p.get("T", cle_mod.T_END)),
                         np.asarray(cle_mod.X0, float)),
}


# ---------------------------------------------------------------- commands

def cmd_converge(args) -> int:
    text = args.methods if args.methods is not None else args.method
    methods = _method_names(",".join(DEFAULT_METHODS) if text is None else text)
    h_max, h_min = parse_step(args.h_max), parse_step(args.h_min)
    if not (0 < h_min <= h_max):
        raise UsageError("need 0 < --h-min <= --h-max")
    k_lo, k_hi = np.log2(1.0 / h_max), np.log2(1.0 / h_min)
    if abs(k_lo - round(k_lo)) > 1e-9 or abs(k_hi - round(k_hi)) > 1e-9:
        raise UsageError("--h-min and --h-max must be powers of two")
    h_list = [2.0 ** -k for k in range(int(round(k_lo)), int(round(k_hi)) + 1)]
    if args.paths < 2:
        raise UsageError("--paths must be at least 2")
    band = None
    if args.assert_order is not None:
        try:
            band = tuple(float(v) for v in args.assert_order.split(":"))
        except ValueError:
            band = ()
        if len(band) != 2:
            raise UsageError("--assert-order expects LO:HI")
    kw = {"newton_tol": args.newton_tol}
    if args.levy_p is not None:
        kw["levy_p"] = args.levy_p
    res = convergence_study(methods, h_list, n_paths=args.paths, seed=args.seed, d=args.d, m=args.m,
                            workers=args.workers, **kw)
    rows = [(r.h, name, r.errors[name], r.stderr[name]) for r in res.rows for name in methods]
    write_csv(_output(args, "convergence.csv"), ["h", "method", "error", "stderr"], rows)
    status = EXIT_OK
    for name in methods:
        s = res.slopes[name]
        print(f"{name}: slope {s:.3f}" if np.isfinite(s) else f"{name}: single step, no slope")
    if band is not None:
        lo, hi = band
        for name in methods:
            s = res.slopes[name]
            if not (np.isfinite(s) and lo <= s <= hi):
                print(f"order check failed for {name}: slope {s:.3f} outside [{lo}, {hi}]", file=sys.stderr)
                status = EXIT_FAILED
    return status


def cmd_stability(args) -> int:
    if args.kind == "table":
        methods = list(st.TABLE_METHODS) if args.methods is None else _method_names(args.methods)
        hs = parse_steps(args.h) if args.h else None
        rows = st.spectral_table(args.d, args.m, hs, methods, cross_terms=args.cross_terms)
        write_csv(_output(args, "table.csv"), ["h", "method", "rho", "verdict"],
                  ((r.h, r.method, r.rho, r.verdict) for r in rows))
        for r in rows:
            print(f"h={r.h:g} {r.method:8s} rho={r.rho:.4f} {r.verdict}")
        return EXIT_OK
    method = (args.method or "milstein").lower()
    if method != "sde":
        _method_names(method)
    try:
        st.parse_axis(args.xaxis)
        st.parse_axis(args.yaxis)
    except ValueError as exc:
        raise UsageError(f"bad axis: {exc}") from exc
    grid = st.region_scan(args.test, method, args.xaxis, args.yaxis, parse_kv(args.fixed), m=args.m,
                          theta=args.theta, eta=args.eta, cross_terms=args.cross_terms)
    name1, name2 = grid.axis1[0], grid.axis2[0]
    value = "alpha" if method == "sde" else "rho"
    write_csv(_output(args, "region.csv"), [name1, name2, value, "stable"], grid.rows())
    print(f"{grid.method}: {int(grid.stable.sum())}/{grid.stable.size} cells stable")
    if grid.disagree is not None and grid.disagree.any():
        print(f"closed form disagrees on {int(grid.disagree.sum())} cells", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.model not in MODELS:
        raise UsageError(f"unknown model {args.model!r} (known: {', '.join(MODELS)})")
    if args.paths < 1:
        raise UsageError("--paths must be positive")
    h = parse_step(args.h) if args.h else None
    if h is None or h <= 0:
        raise UsageError("--h must be positive")
    params = parse_kv(args.param)
    system, x0 = MODELS[args.model](args, params)
    cfg = _config(args)
    if args.model == "cle" and cfg.levy_p is None:
        cfg = cfg.with_(levy_p=10)
    n_steps = round((system.t_end - system.t0) / h)
    if n_steps < 1 or abs(n_steps * h - (system.t_end - system.t0)) > 1e-9 * system.t_end:
        raise UsageError(f"--h {args.h} does not divide the interval [{system.t0}, {system.t_end}]")
    stride = args.stride if n_steps % args.stride == 0 else 1
    run = integrate_ensemble(system, cfg, x0, h, args.paths, args.seed, system.t0, system.t_end,
                             record_stride=stride, workers=args.workers)
    stats = ensemble_stats(run)
    write_csv(_output(args, "ensemble.csv"), stats_header(system.d), stats_rows(stats))
    print(f"{args.model} {cfg.label}: {stats.divergence_count} diverged, "
          f"{stats.newton_failures} Newton failures out of {stats.n_paths} paths", file=sys.stderr)
    if stats.newton_failures > cle_mod.MAX_FAILED_FRACTION * stats.n_paths:
        return EXIT_FAILED
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--method", default=None)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--eta", type=float, default=None)
    p.add_argument("--h", default=None, help="step size; 2^-k accepted, a max:min:step range for tables")
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--levy-p", type=int, default=None)
    p.add_argument("--newton-tol", type=float, default=1e-6)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--m", type=int, default=5)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="splitstep", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("converge", help="strong convergence study on the coupled benchmark")
    _common(p)
    p.add_argument("--methods", default=None, help="comma-separated method names")
    p.add_argument("--h-min", default="2^-8")
    p.add_argument("--h-max", default="2^-1")
    p.add_argument("--assert-order", nargs="?", const="0.85:1.15", default=None, metavar="LO:HI")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("stability", help="spectral-radius tables and stability regions")
    p.add_argument("kind", choices=("table", "region"))
    _common(p)
    p.add_argument("--methods", default=None)
    p.add_argument("--test", type=int, default=1, choices=(1, 2, 3))
    p.add_argument("--xaxis", default="x=-6:0:50")
    p.add_argument("--yaxis", default="y2=0:6:50")
    p.add_argument("--fixed", default=None, help="e.g. z2=0.5")
    p.add_argument("--cross-terms", choices=st.CROSS_FORMS, default="collected")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("simulate", help="ensemble simulation of a built-in model")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--param", default=None, help="model parameters, e.g. lam=-2,sigma=1")
    p.add_argument("--stride", type=int, default=1, help="record every k-th step")
    p.set_defaults(func=cmd_simulate, method="dssbm")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest", type=Path)
    p.set_defaults(func=None)
    return parser


def _run(argv: Sequence[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(list(argv))
    if args.command is None:
        raise UsageError(parser.format_usage().strip())
    if args.command == "replay":
        if not args.manifest.is_file():
            raise UsageError(f"no manifest at {args.manifest}")
        return _run(shlex.split(read_manifest(args.manifest)["argv"]))
    if args.workers < 1:
        raise UsageError("--workers must be positive")
    args._outputs = []
    out_dir = args.out.parent if args.out.suffix == ".csv" else args.out
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    code = args.func(args)
    write_manifest(out_dir / MANIFEST_NAME, {
        "subcommand": args.command if args.command != "stability" else f"stability {args.kind}",
        "argv": shlex.join(argv),
        "seed": args.seed,
        "version": __version__,
        "outputs": ",".join(str(p) for p in args._outputs),
        "exit_code": code,
        "wall_time": time.perf_counter() - start,
    })
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        return _run(argv)
    except UsageError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
