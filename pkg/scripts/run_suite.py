#!/usr/bin/env python3
"""Run the full verification battery (same checks as `crossdiff suite`)."""

import argparse
import sys
import time
from pathlib import Path

from crossdiff.harness import ExperimentConfig, run_suite


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config", type=Path, help="INI config; defaults to desk scale")
    ap.add_argument("--out", type=Path, default=Path("runs/suite"))
    args = ap.parse_args()

    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    t0 = time.perf_counter()
    report = run_suite(cfg, out_dir=args.out)
    print(report.to_text())
    print(f"finished in {time.perf_counter() - t0:.1f}s; written to {args.out}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
