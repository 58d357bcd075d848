#!/usr/bin/env python3
"""Four-stage funnel study: per-cart bidding splits the difference
between CPC and OCPC for both the advertisers and the platform."""

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
                "--config", str(ROOT / "configs" / "cart.yaml"),
                "--study", "cpsc",
                "--out", str(OUT),
                *sys.argv[1:],
            ]
        )
    )
