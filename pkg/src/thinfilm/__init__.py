"""Self-similar source-type droplets of the thin-film equation.

Modules:
    model: problem configuration, regime classification, similarity scalings.
    series: graded (log-)power-series expansions at the contact line.
    dynsys: autonomous reformulation and equilibrium spectral analysis.
    shoot: shooting solver for the global boundary-value problem.
    verify: residuals, overlaps, log-term probes and uniqueness scans.
    cli: command-line front end.
"""

from .model import ConfigError, ProblemConfig, classify
from .series import Expansion, expand
from .shoot import ShootControls, solve_bvp

__all__ = ["ConfigError", "ProblemConfig", "classify", "Expansion", "expand", "ShootControls", "solve_bvp"]
__version__ = "0.1.0"
