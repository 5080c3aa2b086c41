"""List scalar and vector resonances along n = 3 - 1/m for nonzero contact angle.

Usage::

    python scripts/resonance_ladder.py [--max-m M] [--max-order Q]
"""

from __future__ import annotations

import argparse
from fractions import Fraction

from thinfilm.cli import resonance_record
from thinfilm.model import ProblemConfig


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--max-m", type=int, default=8)
    parser.add_argument("--max-order", type=int, default=6)
    args = parser.parse_args()
    for m in range(1, args.max_m + 1):
        n = 3 - Fraction(1, m)
        record = resonance_record(ProblemConfig(n=n, theta=1), 2.0, args.max_order)
        scalar = [(s["k"], s["l"]) for s in record["scalar"]]
        vector = sorted({tuple(v["q"]) for v in record["vector"]})
        print(f"m={m:<3} n={str(n):<6} {record['regime']:<20} scalar={scalar} vector={vector}")


if __name__ == "__main__":
    main()
