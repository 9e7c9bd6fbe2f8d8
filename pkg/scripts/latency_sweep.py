#!/usr/bin/env python3
"""Builder latency across crowd sizes, with a log-log growth fit.

Prints a per-size table (median / p95 per-frame update cost) and the fitted
exponent; a pure pairwise update loop should land near 2.
"""

import argparse
import json

from qxg.bench import run_scaling


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--sizes", default="20,40,80,160", help="comma-separated crowd sizes")
    ap.add_argument("--frames", type=int, default=30, help="measured frames per size")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args(argv)

    sizes = tuple(int(s) for s in args.sizes.split(",") if s)
    report = run_scaling(sizes, n_frames=args.frames, seed=args.seed)

    if args.json:
        print(json.dumps(report.as_dict(), indent=2, sort_keys=True))
        return 0

    print(f"{'objects':>8}  {'pairs':>8}  {'median ms':>10}  {'p95 ms':>8}")
    for r in report.results:
        print(f"{r.n_objects:>8}  {r.mean_pairs:>8.0f}  {r.median_ms:>10.3f}  {r.p95_ms:>8.3f}")
    print(f"\nfitted cost ~ k^{report.exponent:.2f}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
