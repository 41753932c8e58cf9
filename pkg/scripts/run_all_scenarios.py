#!/usr/bin/env python3
"""Run every scenario with default settings and print a one-line digest each.

Output directory defaults to ./runs (override with RG_OUTPUT_DIR or --out).
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

from riegames.cli import run_experiment
from riegames.scenarios import SCENARIO_NAMES


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs", help="output root directory")
    parser.add_argument("--seeds", type=int, nargs="*", default=[0], help="seeds per scenario")
    args = parser.parse_args()

    worst = 0
    for name in SCENARIO_NAMES:
        out_dir = Path(args.out) / name
        with tempfile.NamedTemporaryFile("w", suffix=".json", delete=False) as fh:
            json.dump(
                {"scenario": name, "seeds": args.seeds, "output_dir": str(out_dir)},
                fh,
            )
            cfg_path = fh.name
        code = run_experiment(cfg_path)
        worst = max(worst, code)
        if code != 0:
            print(f"{name}: exit {code}")
            continue
        summary = json.loads((out_dir / f"{name}_summary.json").read_text())
        seed0 = summary["seeds"][0]
        print(
            f"{name}: terminal residual {seed0['terminal_residual']:.3e} "
            f"after {seed0['iterations']} iterations "
            f"({seed0['total_queries']} queries, audit {summary['audit']['mode']}/"
            f"{'ok' if summary['audit']['ok'] else 'VIOLATED'})"
        )
    return worst


if __name__ == "__main__":
    sys.exit(main())
