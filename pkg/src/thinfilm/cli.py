"""Command-line front end: ``solve``, ``expand``, ``analyze``, ``resonances``, ``verify``, ``sweep``.

Every subcommand writes UTF-8 text with LF line endings, either to stdout or
to ``--out``.  JSON is emitted with sorted keys and ``repr`` floats so that
identical inputs give identical bytes.

Exit status: 0 on success, 1 on a usage or configuration error, 2 on a
numerical failure (a JSON error report is still emitted).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynsys import DomainError, analyze_equilibrium, build_system, enumerate_vector_resonances, nonzero_angle_spectrum
from .model import ConfigError, ProblemConfig, classify, format_number, load_config_file, parse_number
from .series import DEFAULT_MAX_GRADE, PRECISION_ENV, SeriesError, build_expansion_problem, detect_resonances, expand
from .shoot import CONVERGED, ShootControls, ShootingError, SeedError, parameter_name, shoot, solve_bvp
from .verify import VerificationError, default_grid, residual, uniqueness_scan, verify_all

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2

SUBCOMMANDS = ("solve", "expand", "analyze", "resonances", "verify", "sweep")
PRECISIONS = ("double", "extended")


class UsageError(Exception):
    """Bad flags or an inconsistent configuration (exit status 1)."""


class NumericalFailure(Exception):
    """A computation that ran but did not succeed (exit status 2)."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report or {}


@dataclass(frozen=True)
class CommandSpec:
    """One parsed invocation.

    Attributes:
        subcommand: One of :data:`SUBCOMMANDS`.
        config: The problem configuration built from flags and ``--config``.
        delta: Seed-point upper bound for shooting.
        tol: Convergence tolerance on ``|H'(1)|``.
        max_grade: Truncation grade of the local expansion.
        param: Free parameter (``kappa`` or ``b``); ``None`` means the default.
        fmt: ``json`` or ``csv``.
        out: Output path (a directory for ``solve``), or ``None`` for stdout.
        jobs: Worker processes for ``sweep`` (and ``verify --scan``).
        grid: Parameter grid for ``sweep``; ``None`` means the default grid.
        max_order: Largest ``|q|`` in the vector-resonance enumeration.
        scan: Whether ``verify`` also runs a uniqueness scan.
    """

    subcommand: str
    config: ProblemConfig
    delta: float = 1e-3
    tol: float = 1e-9
    max_grade: float = DEFAULT_MAX_GRADE
    param: float | None = None
    fmt: str = "json"
    out: Path | None = None
    jobs: int = 1
    grid: tuple | None = field(default=None)
    max_order: int = 6
    scan: bool = False

    @property
    def controls(self) -> ShootControls:
        return ShootControls(delta=self.delta, tol=self.tol, max_grade=self.max_grade)

    @property
    def parameter_name(self) -> str:
        return parameter_name(self.config)

    def params(self) -> dict:
        name = self.parameter_name
        if self.param is not None:
            return {name: self.param}
        return {name: 1.0 if name == "kappa" else 0.0}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits with 2 by default
        raise UsageError(message)


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not (math.isfinite(value) and value > 0):
        raise argparse.ArgumentTypeError(f"must be a positive finite number: {text!r}")
    return value


def _finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def parse_grid(text: str) -> tuple:
    """``a,b,c`` (explicit), ``lo:hi:N`` (linear) or ``log:lo:hi:N`` (geometric)."""
    try:
        if text.startswith("log:"):
            lo, hi, count = text[4:].split(":")
            values = np.geomspace(float(lo), float(hi), int(count))
        elif ":" in text:
            lo, hi, count = text.split(":")
            values = np.linspace(float(lo), float(hi), int(count))
        else:
            values = np.array([float(v) for v in text.split(",") if v.strip()])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None
    if values.size == 0 or not np.all(np.isfinite(values)):
        raise argparse.ArgumentTypeError(f"bad grid {text!r}")
    return tuple(float(v) for v in values)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="thinfilm", description="Self-similar droplet profiles of the thin-film equation.")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "solve": "solve the boundary-value problem by shooting",
        "expand": "compute the local expansion at the contact line",
        "analyze": "spectral analysis of the contact-line equilibrium",
        "resonances": "list scalar and vector resonances",
        "verify": "run the verification gate and emit a JSON report",
        "sweep": "tabulate the shooting merit over a parameter grid",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--n", help="mobility exponent, decimal or p/q (exact)")
        p.add_argument("--theta", help="contact-angle slope (default 0)")
        p.add_argument("--d", type=int, help="spatial dimension (default 1)")
        p.add_argument("--config", help="key=value file with n, theta, d; flags override it")
        p.add_argument("--delta", type=_positive_float, default=1e-3, help="seed offset from the contact line (default 1e-3)")
        p.add_argument("--tol", type=_positive_float, default=1e-9, help="tolerance on |H'(1)| (default 1e-9)")
        p.add_argument(
            "--max-grade", type=_positive_float, default=DEFAULT_MAX_GRADE, help="series truncation grade (default %(default)s)"
        )
        p.add_argument("--param", type=_finite_float, help="free parameter value (kappa or b)")
        p.add_argument("--format", choices=("json", "csv"), default="json", help="output format (default json)")
        p.add_argument("--out", help="output file (a directory for solve)")
        if name in ("sweep", "verify"):
            p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name == "sweep":
            p.add_argument("--grid", type=parse_grid, help="a,b,c | lo:hi:N | log:lo:hi:N")
        if name == "resonances":
            p.add_argument("--max-order", type=int, default=6, help="largest |q| enumerated")
        if name == "verify":
            p.add_argument("--scan", action="store_true", help="include a uniqueness scan")
    return parser


def parse_args(argv: list[str]) -> CommandSpec:
    """Parse ``argv`` into a :class:`CommandSpec`; raises :class:`UsageError`."""
    ns = build_parser().parse_args(argv)
    values: dict = {}
    if ns.config:
        try:
            values.update(load_config_file(ns.config))
        except OSError as exc:
            raise UsageError(f"cannot read config file: {exc}") from None
    for key in ("n", "theta", "d"):
        if getattr(ns, key) is not None:
            values[key] = getattr(ns, key)
    if "n" not in values:
        raise UsageError("--n is required (directly or via --config)")
    try:
        config = ProblemConfig(
            n=parse_number(values["n"]),
            theta=parse_number(values.get("theta", 0)),
            d=int(values.get("d", 1)),
        )
    except (ConfigError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    jobs = getattr(ns, "jobs", 1)
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    max_order = getattr(ns, "max_order", 6)
    if max_order < 2:
        raise UsageError("--max-order must be at least 2")
    if ns.subcommand in ("solve", "sweep") and config.d != 1:
        raise UsageError(f"{ns.subcommand} supports d = 1 only")
    if ns.param is not None and parameter_name(config) == "kappa" and ns.param <= 0:
        raise UsageError("kappa must be positive")
    return CommandSpec(
        subcommand=ns.subcommand,
        config=config,
        delta=ns.delta,
        tol=ns.tol,
        max_grade=ns.max_grade,
        param=ns.param,
        fmt=ns.format,
        out=Path(ns.out) if ns.out else None,
        jobs=jobs,
        grid=getattr(ns, "grid", None),
        max_order=max_order,
        scan=getattr(ns, "scan", False),
    )


# ---------------------------------------------------------------------------
# output helpers


def dumps(obj) -> str:
    """Deterministic JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


def _number(value: float | None):
    """JSON-safe float: non-finite values become ``None``."""
    if value is None or not math.isfinite(value):
        return None
    return float(value)


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _emit(spec: CommandSpec, text: str, stdout) -> None:
    if spec.out is None:
        stdout.write(text)
    else:
        _write(spec.out, text)


def _config_fields(config: ProblemConfig) -> dict:
    return {"n": format_number(config.n), "theta": format_number(config.theta), "d": config.d}


# ---------------------------------------------------------------------------
# subcommands


def _solve(spec: CommandSpec, stdout) -> None:
    config, controls, name = spec.config, spec.controls, spec.parameter_name
    if spec.param is not None:
        outcome = shoot(config, spec.param, controls)
        if outcome.kind != CONVERGED:
            raise NumericalFailure(
                f"single shot at {name}={spec.param!r} is a {outcome.kind}",
                {name: spec.param, "kind": outcome.kind, "merit": _number(outcome.merit)},
            )
        profile, value, shots = outcome.profile, spec.param, 1
    else:
        solution = solve_bvp(config, controls)
        profile, value, shots = solution.profile, solution.value, len(solution.trace)
    record = {
        **_config_fields(config),
        "regime": classify(config).kind,
        "parameter": name,
        name: float(value),
        "dH1": float(profile.end_slope),
        "residual": float(residual(profile).max_norm),
        "delta": float(profile.delta),
        "shots": shots,
    }
    if spec.out is not None:
        _write(spec.out / "solution.json", dumps(record))
        _write(spec.out / "profile.csv", profile.to_csv())
    elif spec.fmt == "csv":
        stdout.write(profile.to_csv())
    else:
        stdout.write(dumps(record))


def _expand(spec: CommandSpec, stdout) -> None:
    expansion = expand(spec.config, spec.params(), spec.max_grade)
    if spec.fmt == "csv":
        rows = [(r["k"], r["l"], r["p"], r["gamma"], r["coefficient"]) for r in expansion.rows()]
        text = _csv(["k", "l", "p", "gamma", "coefficient"], rows)
    else:
        text = expansion.to_json()
    _emit(spec, text, stdout)


def _analyze(spec: CommandSpec, stdout) -> None:
    system = build_system(spec.config)
    amplitude = spec.param if parameter_name(spec.config) == "kappa" and spec.param is not None else None
    report = analyze_equilibrium(system, amplitude)
    _emit(spec, dumps(report.to_dict()), stdout)


def resonance_record(config: ProblemConfig, max_grade: float = DEFAULT_MAX_GRADE, max_order: int = 6) -> dict:
    """Regime, scalar resonant grades of the recursion and vector resonances of the flow."""
    regime = classify(config)
    problem = build_expansion_problem(config)
    scalar = []
    for idx in detect_resonances(problem, max_grade):
        g = problem.grade(idx.k, idx.l)
        scalar.append({"k": idx.k, "l": idx.l, "gamma": format_number(g) if not isinstance(g, float) else repr(g)})
    record = {
        **_config_fields(config),
        "regime": regime.kind,
        "resonant": regime.resonant,
        "m": regime.m,
        "scalar": scalar,
        "vector": [],
        "maxOrder": max_order,
    }
    if not config.zero_angle:
        lam = nonzero_angle_spectrum(config.n)
        record["eigenvalues"] = [format_number(v) for v in lam]
        record["vector"] = [{"q": list(q), "k": k} for q, k in enumerate_vector_resonances(lam, max_order)]
    return record


def _resonances(spec: CommandSpec, stdout) -> None:
    _emit(spec, dumps(resonance_record(spec.config, spec.max_grade, spec.max_order)), stdout)


def _verify(spec: CommandSpec, stdout) -> None:
    report = verify_all(spec.config, spec.controls, scan=spec.scan, jobs=spec.jobs)
    text = dumps(report.to_dict())
    if not report.passed:
        raise NumericalFailure("verification failed", report.to_dict())
    _emit(spec, text, stdout)


def _sweep(spec: CommandSpec, stdout) -> None:
    grid = spec.grid if spec.grid is not None else default_grid(spec.config)
    result = uniqueness_scan(spec.config, grid, spec.controls, jobs=spec.jobs)
    rows = [(repr(float(v)), kind, repr(m) if math.isfinite(m) else "nan") for v, kind, m in result.rows()]
    _emit(spec, _csv([result.name, "kind", "merit"], rows), stdout)


_HANDLERS = {
    "solve": _solve,
    "expand": _expand,
    "analyze": _analyze,
    "resonances": _resonances,
    "verify": _verify,
    "sweep": _sweep,
}


def run(spec: CommandSpec, stdout=None) -> int:
    """Execute one parsed command; returns the exit status.

    Numerical failures emit a JSON error report (to ``--out`` or stdout).
    """
    stdout = stdout or sys.stdout
    try:
        _HANDLERS[spec.subcommand](spec, stdout)
    except NumericalFailure as exc:
        _report_failure(spec, str(exc), exc.report, stdout)
        return EXIT_NUMERICAL
    except (ShootingError, SeedError, SeriesError, DomainError, VerificationError, ArithmeticError) as exc:
        _report_failure(spec, str(exc), {"type": type(exc).__name__}, stdout)
        return EXIT_NUMERICAL
    return EXIT_OK


def _report_failure(spec: CommandSpec, message: str, details: dict, stdout) -> None:
    record = {"error": message, "subcommand": spec.subcommand, **_config_fields(spec.config), "details": details}
    text = dumps(record)
    if spec.out is None:
        stdout.write(text)
    else:
        target = spec.out / "error.json" if spec.subcommand == "solve" else spec.out
        _write(target, text)


def _check_precision() -> None:
    mode = os.environ.get(PRECISION_ENV)
    if mode is not None and mode.strip().lower() not in PRECISIONS + ("",):
        raise UsageError(f"{PRECISION_ENV} must be one of {', '.join(PRECISIONS)}, got {mode!r}")


def main(argv: list[str] | None = None) -> int:
    """Console entry point."""
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        _check_precision()
        spec = parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(f"thinfilm: error: {exc}\n")
        return EXIT_USAGE
    return run(spec)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
