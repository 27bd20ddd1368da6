"""Scaling benchmark: answer latency vs corpus size for the indexed store
and a linear scan baseline.

Usage: python scripts/scaling.py [--lengths 1000,10000,100000,1000000]
Build time is reported separately and excluded from latencies.
"""

import argparse
import sys

from ngm.bench import run_bench


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--lengths", default="1000,10000,100000,1000000")
    parser.add_argument("--probes", type=int, default=100)
    parser.add_argument("--task", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    lengths = [int(x) for x in args.lengths.split(",") if x.strip()]

    def progress(msg):
        print(f"# {msg}", file=sys.stderr)

    report = run_bench(lengths, probes=args.probes, task=args.task,
                       seed=args.seed, progress=progress)
    sys.stdout.write(report.to_tsv())

    first, last = report.rows[0], report.rows[-1]
    ngm_ratio = last.ngm_p50_ms / first.ngm_p50_ms
    scan_ratio = last.scan_p50_ms / first.scan_p50_ms
    print(f"# ngm p50 ratio {last.length}/{first.length}: {ngm_ratio:.2f}",
          file=sys.stderr)
    print(f"# scan p50 ratio {last.length}/{first.length}: {scan_ratio:.1f}",
          file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
