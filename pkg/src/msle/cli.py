"""Command-line entry point: ``msle <command> ...`` or ``python -m msle``.

The result goes to stdout (or --out) as JSON; a run manifest goes to stderr.
Exit codes: 0 ok, 1 tolerance failure, 2 usage error, 3 capacity error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time

from . import __version__
from . import acceptance as acc
from . import combinatorics as cb
from . import loewner_mc as mc
from . import partition_functions as pf
from . import probabilities as pr
from .errors import CapacityError, ConfigurationError, InvalidPatternError, MsleError

SCHEMA = "msle/1"
EXIT_OK, EXIT_TOLERANCE, EXIT_USAGE, EXIT_CAPACITY = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def to_json(obj) -> str:
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        if not math.isfinite(obj):
            return json.dumps(str(obj))
        return format(obj, ".17g")
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ",".join(f"{json.dumps(str(k))}:{to_json(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(to_json(v) for v in obj) + "]"
    if hasattr(obj, "item"):  # numpy scalar
        return to_json(obj.item())
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _points(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"cannot parse points {text!r}") from None


def _pattern(text: str) -> cb.LinkPattern:
    return cb.parse_pattern(text)


def _default_seed() -> int:
    env = os.environ.get("MSLE_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"MSLE_SEED must be an integer, got {env!r}") from None


# -- commands --------------------------------------------------------------
# each returns (payload, checks, tolerances); checks maps a name to pass/fail

def cmd_patterns(args):
    ps = cb.enumerate_link_patterns(args.n, max_n=args.max_n)
    return [p.to_json() for p in ps], {}, {}


def cmd_matrix(args):
    f = cb.inverse_matrix if args.inverse else cb.incidence_matrix
    return f(args.n, max_n=args.max_n).to_json(), {}, {}


def cmd_zalpha(args):
    p = _pattern(args.pattern)
    x = _points(args.points)
    if args.kappa == 4.0:
        res = pf.pure_partition_k4_detail(p, x)
        return {"pattern": str(p), "kappa": 4.0, **res.to_json()}, {}, {}
    return {"pattern": str(p), "kappa": args.kappa, "value": pf.pure_partition(p, args.kappa, x)}, {}, {}


def cmd_symmetric(args):
    x = _points(args.points)
    return {"kappa": args.kappa, "value": pf.symmetric_partition(args.kappa, x)}, {}, {}


def cmd_probs(args):
    dist = pr.connection_distribution(_points(args.points))
    if args.csv:
        rows = ["pattern,probability"] + [f'"{p}",{format(v, ".17g")}'
                                           for p, v in dist.sorted_by_probability()]
        return "\n".join(rows) + "\n", {}, {}
    return dist.to_json(), {}, {}


def cmd_marginal(args):
    x = _points(args.points)
    b_values = [args.to] if args.to else range(2, len(x) + 1, 2)
    out = {str(b): pr.marginal_probability(x, args.start, b) for b in b_values}
    return {"from": args.start, "probabilities": out}, {}, {}


VERIFY_TOLERANCES = {
    "pde": {"rel_residual": 1e-5, "order": [1.8, 2.2]},
    "cov": {"rel_error": 1e-9},
    "asy": {"abs_error": 1e-4},
    "dual": {"abs_error": 1e-3},
    "decay": {"abs_error": 1e-2},
}


def cmd_verify(args):
    ns = [args.n] if args.n else None
    seed = {} if args.seed is None else {"seed": args.seed}
    if args.check == "pde":
        ok, detail, metrics = acc.pde_residuals(ns or range(1, 5), args.configs or 10, **seed)
    elif args.check == "cov":
        ok, detail, metrics = acc.covariance(ns or range(1, 5), args.configs or 100, **seed)
    elif args.check == "asy":
        ok, detail, metrics = acc.asymptotics(ns or range(1, 5), **seed)
    elif args.check == "dual":
        ok, detail, metrics = acc.dual_basis(args.n or 3)
    else:
        ok, detail, metrics = acc.decay_slopes(ns or range(1, 6))
    payload = {"check": args.check, "passed": ok, "detail": detail, "metrics": metrics}
    return payload, {args.check: ok}, VERIFY_TOLERANCES[args.check]


def _mc_config(args, samples_default: int) -> mc.McConfig:
    if args.seed is None:
        args.seed = _default_seed()
    try:
        return mc.McConfig(dt_base=args.dt, delta_stop=args.delta_stop,
                           samples=args.samples or samples_default, seed=args.seed,
                           workers=args.workers, stop_rule=args.stop_rule)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_mc(args):
    x = _points(args.points)
    if args.mode == "marginal":
        cfg = _mc_config(args, acc.MC_SAMPLES)
        hist = mc.level_line_terminal(x, cfg, start=args.start)
        targets = mc.level_line_targets(x, args.start)
        zs = hist.z_scores(targets)
        ok = all(abs(z) < 3.0 for z in zs.values()) and hist.discard_fraction < 0.01
        payload = {
            "counts": {str(b): hist.counts.get(b, 0) for b in targets},
            "targets": {str(b): v for b, v in targets.items()},
            "z_scores": {str(b): v for b, v in zs.items()},
            "discarded": hist.discarded,
            "discard_fraction": hist.discard_fraction,
            "chi2_pvalue": hist.chi2_pvalue(targets),
        }
        return payload, {"z_within_3": ok}, {"max_abs_z": 3.0, "discard_fraction": 0.01}
    if not args.pattern:
        raise UsageError("mc drive needs --pattern")
    cfg = _mc_config(args, acc.DRIVE_SAMPLES)
    res = mc.zalpha_driven_curve(_pattern(args.pattern), args.start, x, cfg)
    payload = {
        "pattern": str(res.pattern), "from": res.start, "paired_endpoint": res.paired_endpoint,
        "counts": {str(b): c for b, c in res.histogram.counts.items()},
        "discarded": res.histogram.discarded,
        "hit_fraction": res.hit_fraction,
        "mean_steps": res.mean_steps, "mean_capacity": res.mean_capacity,
    }
    return payload, {"hit_fraction": res.hit_fraction >= 0.99}, {"hit_fraction": 0.99}


def cmd_suite(args):
    results = acc.run_suite(args.level, echo=lambda s: print(s, file=sys.stderr, flush=True))
    payload = {"level": args.level, "criteria": [r.to_json() for r in results]}
    checks = {f"{r.number} {r.name}": r.passed for r in results}
    return payload, checks, {}


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="msle", description="Multiple SLE partition functions and level-line checks.",
                formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--out", help="write the result here instead of stdout")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    fmt = argparse.ArgumentDefaultsHelpFormatter

    s = sub.add_parser("patterns", help="list link patterns in canonical order", formatter_class=fmt)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--max-n", type=int, default=cb.DEFAULT_MAX_N, help="capacity cap on n")
    s.set_defaults(func=cmd_patterns)

    s = sub.add_parser("matrix", help="incidence matrix M or its inverse", formatter_class=fmt)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--inverse", action="store_true")
    s.add_argument("--max-n", type=int, default=cb.DEFAULT_MAX_N, help="capacity cap on n")
    s.set_defaults(func=cmd_matrix)

    s = sub.add_parser("zalpha", help="pure partition function Z_alpha", formatter_class=fmt)
    s.add_argument("--pattern", required=True, help='e.g. "1-4,2-3" or "(())"')
    s.add_argument("--points", required=True, help="comma-separated increasing points")
    s.add_argument("--kappa", type=float, default=4.0)
    s.set_defaults(func=cmd_zalpha)

    s = sub.add_parser("symmetric", help="symmetric partition function", formatter_class=fmt)
    s.add_argument("--points", required=True)
    s.add_argument("--kappa", type=float, default=4.0, help="2, 3 or 4")
    s.set_defaults(func=cmd_symmetric)

    s = sub.add_parser("probs", help="level-line connection probabilities", formatter_class=fmt)
    s.add_argument("--points", required=True)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--json", action="store_true", help="JSON output (the default)")
    g.add_argument("--csv", action="store_true")
    s.set_defaults(func=cmd_probs)

    s = sub.add_parser("marginal", help="probability that the line from x_a ends at x_b",
                       formatter_class=fmt)
    s.add_argument("--points", required=True)
    s.add_argument("--from", dest="start", type=int, default=1)
    s.add_argument("--to", type=int, help="even endpoint; all of them if omitted")
    s.set_defaults(func=cmd_marginal)

    s = sub.add_parser("verify", help="numerical property checks", formatter_class=fmt)
    s.add_argument("check", choices=["pde", "cov", "asy", "dual", "decay"])
    s.add_argument("--n", type=int, help="restrict to one size")
    s.add_argument("--configs", type=int, default=None,
                   help="configurations per family (pde: 10) or maps per family (cov: 100)")
    s.add_argument("--seed", type=int, default=None, help="the acceptance seed if omitted")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("mc", help="Monte Carlo Loewner chains", formatter_class=fmt)
    s.add_argument("mode", choices=["marginal", "drive"])
    s.add_argument("--points", default="0,1,2,3")
    s.add_argument("--pattern", help="link pattern (drive)")
    s.add_argument("--from", dest="start", type=int, default=1)
    s.add_argument("--samples", type=int, default=None,
                   help=f"default {acc.MC_SAMPLES} (marginal), {acc.DRIVE_SAMPLES} (drive)")
    s.add_argument("--seed", type=int, default=None, help="falls back to MSLE_SEED, then 0")
    s.add_argument("--dt", type=float, default=mc.McConfig.dt_base, help="base capacity step")
    s.add_argument("--delta-stop", type=float, default=mc.McConfig.delta_stop)
    s.add_argument("--stop-rule", choices=sorted(mc.STOP_RULES), default=mc.McConfig.stop_rule)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_mc)

    s = sub.add_parser("suite", help="run the acceptance criteria", formatter_class=fmt)
    s.add_argument("level", choices=["fast", "full"], nargs="?", default="fast")
    s.set_defaults(func=cmd_suite)
    return p


def _manifest(argv, args, checks, tolerances, wall, status) -> dict:
    return {
        "schema": SCHEMA,
        "command": ["msle", *argv],
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "backend": mc.BACKEND,
        "wall_time": wall,
        "checks": checks,
        "tolerances": tolerances,
        "exit_code": status,
    }


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    t0 = time.perf_counter()
    args = None
    checks, tolerances = {}, {}
    try:
        args = build_parser().parse_args(argv)
        payload, checks, tolerances = args.func(args)
        status = EXIT_OK if all(checks.values()) else EXIT_TOLERANCE
        text = payload if isinstance(payload, str) else to_json(payload) + "\n"
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except UsageError as exc:
        print(f"msle: usage error: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except (ConfigurationError, InvalidPatternError, IndexError, ValueError) as exc:
        print(f"msle: invalid input: {exc}", file=sys.stderr)
        status = EXIT_USAGE
    except CapacityError as exc:
        print(f"msle: capacity exceeded: {exc}", file=sys.stderr)
        status = EXIT_CAPACITY
    except MsleError as exc:
        print(f"msle: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_TOLERANCE
    wall = time.perf_counter() - t0
    print(to_json(_manifest(argv, args, checks, tolerances, wall, status)), file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
