"""Time the compiled and pure-Python stepping kernels on the same workload.

Both backends consume the same random stream, so their terminal histograms
must agree exactly; the script exits non-zero if they do not.
"""
import argparse
import sys
import time

from msle import loewner_mc as mc


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", default="0,1,2,3,4,5")
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--repeat", type=int, default=1)
    args = p.parse_args(argv)
    x = [float(v) for v in args.points.split(",")]

    rows = []
    for backend in sorted(mc.KERNELS):
        cfg = mc.McConfig(samples=args.samples, seed=args.seed, dt_base=args.dt, backend=backend)
        best, hist = float("inf"), None
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            hist = mc.level_line_terminal(x, cfg)
            best = min(best, time.perf_counter() - t0)
        rows.append((backend, best, hist))

    base = dict((b, s) for b, s, _ in rows).get("python")
    print(f"{'backend':<8} {'seconds':>9} {'samples/s':>10} {'speedup':>8}  histogram")
    for backend, secs, hist in rows:
        speed = f"{base / secs:8.1f}" if base else "       -"
        print(f"{backend:<8} {secs:9.3f} {args.samples / secs:10.1f} {speed}  {hist.counts}")
    hists = {repr(h.counts) for _, _, h in rows}
    if len(hists) > 1:
        print("histograms differ between backends", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
