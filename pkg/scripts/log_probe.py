"""Fit the x log x coefficient of solved profiles and compare with the series.

Usage::

    python scripts/log_probe.py [n ...]     (defaults: 2 5/2 8/3 17/10)
"""

from __future__ import annotations

import sys

from thinfilm.model import ProblemConfig
from thinfilm.shoot import solve_bvp
from thinfilm.verify import log_term_probe

WINDOWS = {"8/3": (1e-7, 1e-5)}


def main(argv: list[str]) -> None:
    for n in argv or ["2", "5/2", "8/3", "17/10"]:
        cfg = ProblemConfig(n=n, theta=1)
        sol = solve_bvp(cfg)
        kwargs = {"window": WINDOWS[n]} if n in WINDOWS else {}
        probe = log_term_probe(cfg, sol.profile, **kwargs)
        print(f"n={n:<6} b*={sol.value:+.10f} fitted={probe.coefficient:+.6f} series={probe.series_value:+.6f}")


if __name__ == "__main__":
    main(sys.argv[1:])
