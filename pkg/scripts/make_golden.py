"""Regenerate the committed golden outputs for the determinism test.

Run after an intentional change to search output:

    python3 scripts/make_golden.py
"""
import shutil
import sys
from pathlib import Path

from rcas.cli import main

GOLDEN = Path(__file__).resolve().parents[1] / "tests" / "golden" / "coverage_small"

if __name__ == "__main__":
    if GOLDEN.exists():
        shutil.rmtree(GOLDEN)
    rc = main(["search", "--config", "bundled:coverage_small", "--out", str(GOLDEN)])
    print(f"wrote {sorted(p.name for p in GOLDEN.iterdir())} to {GOLDEN}")
    sys.exit(rc)
