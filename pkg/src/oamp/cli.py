"""Command-line entry point: run presets or config files, SE only, phase transitions."""

import argparse
import dataclasses
import math
import os
import sys

import numpy as np

from . import harness

EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _resolve(target):
    if target in harness.PRESETS:
        return harness.preset(target)
    if os.path.isfile(target):
        return harness.load_config(target)
    raise ValueError(f"{target!r} is neither a preset ({', '.join(harness.PRESETS)}) "
                     "nor a config file")


def _override(cfg, args):
    upd = {}
    if args.n is not None:
        upd["N"] = args.n
        if cfg.M is not None and args.m_ratio is None:
            upd["m_ratio"] = cfg.M / cfg.N
        upd["M"] = None
    if args.m_ratio is not None:
        upd["m_ratio"] = args.m_ratio
        upd["M"] = None
    if args.snr_db is not None:
        upd["snr_db"] = args.snr_db
        upd["sigma2"] = None
    if args.trials is not None:
        upd["trials"] = args.trials
    if args.iters is not None:
        upd["T"] = args.iters
    if args.seed is not None:
        upd["seed"] = args.seed
    if getattr(args, "workers", None) is not None:
        upd["workers"] = args.workers
    return dataclasses.replace(cfg, **upd) if upd else cfg


def _ptc_override(cfg, args):
    upd = {}
    for a, k in (("n", "N"), ("trials", "trials"), ("iters", "T"), ("seed", "seed"),
                 ("workers", "workers")):
        if getattr(args, a, None) is not None:
            upd[k] = getattr(args, a)
    return dataclasses.replace(cfg, **upd) if upd else cfg


def _out_path(args, default):
    return args.out or f"{default}.{args.format}"


def _report(rows, path):
    print(f"wrote {len(rows)} rows to {path}")


def cmd_list(args):
    for name, (_, desc) in harness.PRESETS.items():
        print(f"{name:6s} {desc}")
    return 0


def cmd_run(args):
    cfgs = _resolve(args.target)
    if isinstance(cfgs, harness.PTCConfig):
        raise ValueError(f"{args.target!r} is a phase-transition config; use 'ptc'")
    rows, bad = [], 0
    for cfg in cfgs:
        res = harness.run_experiment(_override(cfg, args))
        rows.extend(res.rows)
        for (alg, trial), st in res.status.items():
            if st != "ok":
                bad += 1
                print(f"warning: {cfg.name} {alg} trial {trial}: {st}", file=sys.stderr)
    path = harness.emit(rows, _out_path(args, "results"), args.format)
    _report(rows, path)
    means = [r.mse_sim for r in rows if r.trial == "mean"]
    if not means or not all(math.isfinite(v) for v in means):
        print("error: non-finite mean MSE in results", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def cmd_se(args):
    cfgs = _resolve(args.target)
    if isinstance(cfgs, harness.PTCConfig):
        raise ValueError("state evolution is not defined for a phase-transition config")
    rows = []
    for cfg in cfgs:
        rows.extend(harness.se_rows(_override(cfg, args)))
    path = harness.emit(rows, _out_path(args, "se"), args.format)
    _report(rows, path)
    if not all(math.isfinite(r.mse_se) for r in rows):
        print("error: non-finite SE prediction", file=sys.stderr)
        return EXIT_NUMERIC
    return 0


def cmd_ptc(args):
    cfg = _resolve(args.target)
    if not isinstance(cfg, harness.PTCConfig):
        raise ValueError(f"{args.target!r} is not a phase-transition config")
    rows = harness.phase_transition(_ptc_override(cfg, args))
    path = harness.emit(rows, _out_path(args, "ptc"), args.format)
    _report(rows, path)
    return 0


def _common(p, sweep=True):
    p.add_argument("target", help="preset name or JSON config file")
    p.add_argument("--n", type=int)
    if sweep:
        p.add_argument("--m-ratio", type=float)
        p.add_argument("--snr-db", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--iters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    ap = argparse.ArgumentParser(prog="oamp", description="AMP/OAMP experiments")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="simulate and compare with state evolution")
    _common(p)
    p.set_defaults(fn=cmd_run)
    p = sub.add_parser("se", help="state evolution only")
    _common(p)
    p.set_defaults(fn=cmd_se)
    p = sub.add_parser("ptc", help="noiseless phase transition")
    _common(p, sweep=False)
    p.set_defaults(fn=cmd_ptc)
    p = sub.add_parser("list-presets", help="list named presets")
    p.set_defaults(fn=cmd_list)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(over="ignore"):
            return args.fn(args)
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
