"""Run every shipped config through the commands that apply to it.

Usage: python scripts/run_all_configs.py [--out DIR] [--skip-simulate]

Configs with a count model get approx (and simulate when seeded); every
config gets diagnose.  Exit status is the worst exit code seen, except that
bad_alpha.yaml is expected to exit 2.
"""

import argparse
import os
import sys
import time
from pathlib import Path

from subexp2.cli import OUTPUT_ENV, main
from subexp2.config import ConfigError, load_config

ROOT = Path(__file__).resolve().parents[1]


def plan(path: Path) -> list[str]:
    try:
        cfg = load_config(path)
    except ConfigError:
        return ["approx"]
    cmds = ["diagnose"]
    if cfg.count is not None:
        cmds.insert(0, "approx")
        if cfg.montecarlo.seed is not None:
            cmds.append("simulate")
    return cmds


def run(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=ROOT / "out")
    ap.add_argument("--skip-simulate", action="store_true")
    args = ap.parse_args(argv)
    os.environ[OUTPUT_ENV] = str(args.out)
    worst = 0
    for path in sorted((ROOT / "configs").glob("*.yaml")):
        for cmd in plan(path):
            if cmd == "simulate" and args.skip_simulate:
                continue
            t0 = time.perf_counter()
            code = main([cmd, str(path)])
            expected = 2 if path.stem == "bad_alpha" else 0
            print(f"== {path.name} {cmd}: exit {code} in {time.perf_counter() - t0:.1f}s", flush=True)
            if code != expected:
                worst = max(worst, code or 1)
    return worst


if __name__ == "__main__":
    sys.exit(run())
