"""Tabulate shooting-merit sign changes over the uniqueness matrix.

Usage::

    python scripts/uniqueness_matrix.py [--jobs N]
"""

from __future__ import annotations

import argparse
import time

from thinfilm.model import ProblemConfig
from thinfilm.verify import uniqueness_scan

MATRIX = [("4/5", 0), ("6/5", 0), ("1", 1), ("2", 1), ("5/2", 1), ("27/10", 1)]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()
    print(f"{'n':>6} {'theta':>5} {'points':>6} {'changes':>7} {'seconds':>8}")
    for n, theta in MATRIX:
        start = time.perf_counter()
        scan = uniqueness_scan(ProblemConfig(n=n, theta=theta), jobs=args.jobs)
        print(f"{n:>6} {theta:>5} {len(scan.grid):>6} {scan.sign_changes:>7} {time.perf_counter() - start:>8.1f}")


if __name__ == "__main__":
    main()
