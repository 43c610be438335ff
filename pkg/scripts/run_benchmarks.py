#!/usr/bin/env python3
"""Run the full benchmark comparison and write JSON/CSV reports.

Thin wrapper over `loopmoments bench` so the report lands in ./reports/
with a timestamped name by default.

Usage:
    python scripts/run_benchmarks.py [--samples N] [--seed S] [--outdir DIR]
"""

import argparse
import datetime
import pathlib
import sys

from loopmoments import cli


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--samples", type=int, default=100000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--outdir", type=pathlib.Path, default=pathlib.Path("reports"))
    ap.add_argument("--dir", type=pathlib.Path,
                    default=pathlib.Path(__file__).resolve().parent.parent
                    / "benchmarks")
    args = ap.parse_args()

    args.outdir.mkdir(parents=True, exist_ok=True)
    stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S")
    out = args.outdir / f"bench-{stamp}.json"
    csv = args.outdir / f"bench-{stamp}.csv"
    code = cli.main([
        "bench",
        "--dir", str(args.dir),
        "--samples", str(args.samples),
        "--seed", str(args.seed),
        "--out", str(out),
        "--csv", str(csv),
    ])
    print(f"wrote {out} and {csv}", file=sys.stderr)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
