#!/usr/bin/env python3
"""Underreporting spiral under pay-per-conversion with advertiser-reported
conversions: each round the belief chases last round's reporting rate,
bids inflate to compensate, and revenue hits zero once reports vanish."""

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
                "--study", "collapse",
                "--out", str(OUT),
                *sys.argv[1:],
            ]
        )
    )
