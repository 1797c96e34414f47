#!/usr/bin/env python3
"""
cramerlab launcher.

Runs the cramerlab command line from a source checkout without
installing the package.

Usage:
    ./lab.py verify --all --seeds 20
    ./lab.py run --config config/experiments/gridworld.yaml
    ./lab.py replay results/gridworld
"""

import sys

from cramerlab.main import main

if __name__ == "__main__":
    sys.exit(main())
