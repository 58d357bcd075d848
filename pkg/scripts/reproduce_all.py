#!/usr/bin/env python3
"""Run every study on the shipped default config and write the full
artifact bundle plus pass/fail summary. Extra CLI flags pass through,
e.g. --seed 7 or --threads 4."""

import sys
from pathlib import Path

from adpricing.cli import main

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "results"

if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    sys.exit(
        main(
            [
                "--config", str(ROOT / "configs" / "default.yaml"),
                "--study", "reproduce-all",
                "--out", str(OUT),
                *sys.argv[1:],
            ]
        )
    )
