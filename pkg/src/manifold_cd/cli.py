"""Command-line interface.

Subcommands:

* ``run``     one experiment; writes the CSV trace and prints a summary line
* ``grid``    stepsize grid search; prints the winning configuration as JSON
* ``verify``  the full invariant and acceptance suite; exit 0 iff all pass
* ``flops``   prints the published flop-model table
* ``preset``  lists named experiment configurations or dumps one as JSON

Flags may also come from a flat JSON config file (``--config``); explicit
command-line flags override file values, and unknown keys in the file are
rejected.  ``MANIFOLD_CD_THREADS`` caps grid-level parallelism.  Exit codes:
0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

from .bench import grid_search, run_experiment
from .flops import render_table
from .optimize import OptimizerConfig
from .problems import PRESETS, PROBLEMS

_RUN_KEYS = {
    "problem": str, "algo": str, "select": str, "n": int, "p": int,
    "eta": float, "epochs": int, "inner": int, "seed": int, "out": str,
    "cond": float, "density": float, "eta_decay": float, "grad_log": int,
    "feas_log": int, "wall": bool, "planted": bool, "trace": str, "grid": str,
}

_DEFAULTS = {
    "problem": "procrustes", "algo": "rcd", "select": "cyclic",
    "n": 20, "p": 10, "eta": 0.1, "epochs": 100, "inner": None, "seed": 0,
    "out": None, "cond": 1e3, "density": 1.0, "eta_decay": 0.0,
    "grad_log": 0, "feas_log": 0, "wall": False, "planted": False,
    "trace": "step",
}


def _add_run_flags(sub):
    sub.add_argument("--problem", choices=PROBLEMS)
    sub.add_argument("--algo", choices=("rcd", "rcdlin", "rgd", "tsd"))
    sub.add_argument("--select",
                     choices=("cyclic", "random", "without-replacement", "time-cyclic"))
    sub.add_argument("--n", type=int)
    sub.add_argument("--p", type=int)
    sub.add_argument("--eta", type=float)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--inner", type=int)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--out")
    sub.add_argument("--cond", type=float)
    sub.add_argument("--density", type=float)
    sub.add_argument("--eta-decay", dest="eta_decay", type=float)
    sub.add_argument("--grad-log", dest="grad_log", type=int)
    sub.add_argument("--feas-log", dest="feas_log", type=int)
    sub.add_argument("--wall", action="store_true", default=None)
    sub.add_argument("--planted", action="store_true", default=None)
    sub.add_argument("--trace", choices=("step", "epoch", "none"))
    sub.add_argument("--config", help="flat JSON file of these flags")


def _merge_config(args) -> dict:
    merged = dict(_DEFAULTS)
    if getattr(args, "config", None):
        with open(args.config, encoding="utf-8") as fh:
            file_vals = json.load(fh)
        unknown = set(file_vals) - set(_RUN_KEYS) - {"grid"}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update({k: v for k, v in file_vals.items() if k != "grid"})
    for key in _RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    return merged


def _build_cfg(vals: dict) -> OptimizerConfig:
    return OptimizerConfig(
        algorithm=vals["algo"],
        epochs=vals["epochs"],
        inner=vals["inner"],
        eta=vals["eta"],
        eta_decay=vals["eta_decay"],
        selection=vals["select"],
        seed=vals["seed"],
        grad_log_every=vals["grad_log"],
        feas_log_every=vals["feas_log"],
        log_wall=vals["wall"],
        trace=vals["trace"],
    )


def _cmd_run(args) -> int:
    vals = _merge_config(args)
    cfg = _build_cfg(vals)
    result = run_experiment(
        vals["problem"], vals["n"], vals["p"], vals["seed"], cfg,
        cond=vals["cond"], density=vals["density"], planted=vals["planted"],
        out_path=vals["out"],
    )
    print(result.summary())
    return 0


def _cmd_grid(args) -> int:
    vals = _merge_config(args)
    cfg = _build_cfg(vals)
    best, scored = grid_search(
        vals["problem"], vals["n"], vals["p"], vals["seed"], cfg,
        cond=vals["cond"], density=vals["density"],
    )
    for eta, f in scored:
        tag = " (diverged)" if math.isinf(f) else ""
        print(f"# eta={eta:.10g} final_f={f:.12g}{tag}", file=sys.stderr)
    out = dict(vals)
    out["eta"] = best
    out["grid"] = "2^-10..2^3"
    out.pop("out", None)
    out.pop("trace", None)
    text = json.dumps(out, indent=2, sort_keys=True)
    if vals.get("out"):
        with open(vals["out"], "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def _cmd_verify(args) -> int:
    from .acceptance import run_all

    results = run_all(numbers=args.only)
    failed = [r for r in results if not r.passed]
    return 1 if failed else 0


def _cmd_flops(_args) -> int:
    print(render_table())
    return 0


def _cmd_preset(args) -> int:
    if args.name is None:
        for name in sorted(PRESETS):
            print(name)
        return 0
    if args.name not in PRESETS:
        print(f"unknown preset {args.name!r}; available: {', '.join(sorted(PRESETS))}",
              file=sys.stderr)
        return 1
    text = json.dumps(PRESETS[args.name], indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold-cd",
        description="coordinate descent on matrix manifolds: benchmarks and checks",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run_p = subs.add_parser("run", help="run one experiment, write a CSV trace")
    _add_run_flags(run_p)
    run_p.set_defaults(func=_cmd_run)

    grid_p = subs.add_parser("grid", help="stepsize grid search over 2^-10..2^3")
    _add_run_flags(grid_p)
    grid_p.set_defaults(func=_cmd_grid)

    verify_p = subs.add_parser("verify", help="run the invariant/acceptance suite")
    verify_p.add_argument("--only", type=int, nargs="*", default=None,
                          help="criterion numbers to run (default: all)")
    verify_p.set_defaults(func=_cmd_verify)

    flops_p = subs.add_parser("flops", help="print the flop model table")
    flops_p.set_defaults(func=_cmd_flops)

    preset_p = subs.add_parser("preset", help="list or dump named configurations")
    preset_p.add_argument("name", nargs="?")
    preset_p.add_argument("--out")
    preset_p.set_defaults(func=_cmd_preset)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
