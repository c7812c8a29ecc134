"""Run every shipped config through the CLI, writing to out/<config name>/.

    python scripts/run_figures.py            # all configs
    python scripts/run_figures.py fig2 fp_   # configs whose name starts with a prefix
"""

import sys
import time
from pathlib import Path

from liouville.cli import main

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "out"


def command_for(stem):
    if stem.startswith("fp_"):
        return "fp"
    if stem.startswith("mc_"):
        return "mc"
    for key, cmd in (("fit", "fit"), ("moments", "moments"), ("temperature", "fhhs")):
        if key in stem:
            return cmd
    return "pdf"


def run(prefixes=()):
    failures = 0
    for path in sorted((HERE / "configs").glob("*.json")):
        if prefixes and not path.stem.startswith(tuple(prefixes)):
            continue
        cmd = command_for(path.stem)
        start = time.perf_counter()
        code = main([cmd, str(path), "--out-dir", str(OUT / path.stem)])
        print(f"{path.stem:40s} {cmd:8s} exit {code}  {time.perf_counter() - start:6.1f} s")
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(run(sys.argv[1:]))
