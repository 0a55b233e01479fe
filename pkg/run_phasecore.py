#!/usr/bin/env python3
"""
CLI runner script for phasecore experiments.

Usage:
    python run_phasecore.py bound --sigma 0.1 --nu 0.5 --eps 0.5 --delta 1 --t 0.1
    python run_phasecore.py sweep --n 64 --nu 0.5 --N 512 1024 2048 4096 --trials 50
    python run_phasecore.py validate --checks order_stats wishart
"""

import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent / "src"))

from phasecore.cli import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
