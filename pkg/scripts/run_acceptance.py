"""Run the acceptance suite and print one PASS/FAIL line per criterion.

Usage::

    python scripts/run_acceptance.py [extra pytest args]
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent


def main(argv: list[str]) -> int:
    return int(pytest.main([str(ROOT / "tests" / "test_acceptance.py"), "-q", "-rx", *argv]))


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
