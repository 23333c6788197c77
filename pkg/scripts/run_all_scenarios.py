#!/usr/bin/env python3
"""Run every shipped scenario and summarise the verdicts.

Usage: python scripts/run_all_scenarios.py [--out reports] [--deterministic]
"""
import argparse
import pathlib
import sys

from twistorsys import cli

SCENARIOS = pathlib.Path(__file__).resolve().parents[1] / "scenarios"


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="reports")
    ap.add_argument("--deterministic", action="store_true")
    args = ap.parse_args()
    worst = 0
    for scen in sorted(SCENARIOS.glob("*.json")):
        rc = cli.run(scen, out_dir=args.out, deterministic=args.deterministic)
        worst = max(worst, rc)
    print(f"reports written to {args.out}/")
    return worst


if __name__ == "__main__":
    sys.exit(main())
