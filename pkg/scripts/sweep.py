#!/usr/bin/env python3
"""Trace the platform's model choice against the outside option r:
CPC while both models retain advertiser 2, OCPC in the band only it
can serve, closed market above."""

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
                "--study", "sweep",
                "--out", str(OUT),
                *sys.argv[1:],
            ]
        )
    )
