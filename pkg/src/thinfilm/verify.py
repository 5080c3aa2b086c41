"""Cross-checks tying the series, the log-variable systems and the shooting solver together.

* :func:`residual` -- pointwise residual of the profile equation for an
  expansion (exact term-wise differentiation in extended precision) or for a
  shot profile (on accepted integrator nodes), with a least-squares
  log-log slope near the contact line.
* :func:`match_overlap` -- agreement of the series and the integrated profile
  just above the seed point.
* :func:`log_term_probe` -- least-squares fit of the ``x log x`` coefficient
  from integrator data only; an independent check of the resonant series
  coefficient and its sign.
* :func:`uniqueness_scan` -- shooting merit on a parameter grid; exactly one
  sign change certifies (numerically) a unique solution.
* :func:`verify_all` -- the pass/fail gate used by the ``verify`` command.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from mpmath import mp
from scipy.integrate import solve_ivp

from .dynsys import analyze_equilibrium, build_system, closed_form_spectrum, flow_in_s, series_state
from .model import NONZERO_ANGLE, ProblemConfig
from .series import Expansion, expand, to_mp
from .shoot import (
    FAILURE,
    Profile,
    ShootControls,
    ShootingError,
    parameter_name,
    shoot,
    solve_bvp,
    make_rhs,
    third_derivative,
)

RESIDUAL_TOL = 1e-8
OVERLAP_TOL = 1e-7
FLOW_TOL = 1e-8
SLOPE_TOL = 0.05
SPECTRUM_TOL = 1e-10


class VerificationError(ValueError):
    """Input that cannot be checked (e.g. a grid point with ``H <= 0``)."""


# ---------------------------------------------------------------------------
# residuals


@dataclass(frozen=True)
class ResidualReport:
    """Residual of the profile equation on a grid.

    ``values`` holds ``H^(n-1) (H''' - corrections) - (x - 1)``; ``normalized``
    holds ``H''' - corrections - H^(1-n) (x - 1)``, whose decay near the
    contact line reveals the truncation order of an expansion.

    Attributes:
        slope: Least-squares slope of ``log |normalized|`` against ``log x``.
        fit_residual: Root-mean-square deviation of that fit.
        predicted_slope: Slope implied by the first omitted grade (expansions only).
    """

    grid: np.ndarray
    values: np.ndarray
    normalized: np.ndarray
    max_norm: float
    slope: float
    fit_residual: float
    predicted_slope: float | None = None


def dyadic_grid(lo: float = 1e-6, hi: float = 1e-2) -> np.ndarray:
    """Powers of two inside ``[lo, hi]``, increasing."""
    k_hi = math.floor(math.log2(hi))
    k_lo = math.ceil(math.log2(lo))
    return np.array([2.0**k for k in range(k_lo, k_hi + 1)])


def log_slope(x, y) -> tuple[float, float]:
    """Least-squares slope of ``log |y|`` against ``log x`` and the fit's RMS residual."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.abs(np.asarray(y, dtype=float)))
    if lx.size < 2:
        raise VerificationError("need at least two points for a slope")
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    fit = ly - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(fit**2)))


def _expansion_residual(expansion: Expansion, grid) -> tuple[np.ndarray, np.ndarray]:
    cfg = expansion.config
    dm1 = cfg.d - 1
    weighted, normalized = [], []
    with mp.workdps(expansion.dps):
        n = to_mp(cfg.n)
        for x in grid:
            H, dH, d2H, d3H = expansion.evaluate_mp(x)
            if not H > 0:
                raise VerificationError(f"H <= 0 at x={x!r}")
            xm = to_mp(x)
            core = d3H
            if dm1:
                core = core - dm1 * d2H / (1 - xm) - dm1 * dH / (1 - xm) ** 2
            weighted.append(float(H ** (n - 1) * core - (xm - 1)))
            normalized.append(float(core - H ** (1 - n) * (xm - 1)))
    return np.array(weighted), np.array(normalized)


def predicted_slope(expansion: Expansion, grid) -> float | None:
    """Slope of the leading omitted terms ``sum_g R_g(log x) x^(alpha - 3 + g)``.

    ``R_g`` are the recursion loads at the omitted grades of one generator
    band above the truncation; for a truncated series they are exactly the
    graded residual, so this is the truncation-order prediction including
    log factors and near-cancellations between neighbouring grades.
    """
    if not expansion.tail:
        return None
    grid = np.asarray(grid, dtype=float)
    L = np.log(grid)
    model = np.zeros_like(grid)
    shift = float(expansion.alpha) - 3.0
    for g, load in expansion.tail:
        model += np.exp((shift + g) * L) * sum(c * L**p for p, c in enumerate(load))
    if np.any(model == 0):
        return None
    return log_slope(grid, model)[0]


def leading_order(expansion: Expansion) -> float:
    """``alpha - 3 + gamma_next``, the single-grade truncation order."""
    return float(expansion.alpha) - 3.0 + expansion.next_grade


def residual(target, config: ProblemConfig | None = None, grid=None) -> ResidualReport:
    """Residual of an :class:`Expansion` or a :class:`Profile`.

    Expansions are differentiated term by term at their working precision; the
    default grid is the dyadic points in ``[1e-6, 1e-2]``.  Profiles are
    checked on their accepted integrator nodes: the pointwise equation with
    the stored third derivative, and a step defect (each accepted step is
    re-integrated at tighter tolerance and compared with the next node,
    relative to each component's largest magnitude).
    """
    if isinstance(target, Expansion):
        grid = dyadic_grid() if grid is None else np.asarray(grid, dtype=float)
        values, normalized = _expansion_residual(target, grid)
        mask = normalized != 0
        slope, fit = log_slope(grid[mask], normalized[mask]) if mask.sum() >= 2 else (math.inf, 0.0)
        return ResidualReport(
            grid=grid,
            values=values,
            normalized=normalized,
            max_norm=float(np.max(np.abs(values))),
            slope=slope,
            fit_residual=fit,
            predicted_slope=predicted_slope(target, grid),
        )
    if isinstance(target, Profile):
        return _profile_residual(target, config or target.config)
    # closed-form profiles expose derivative(x, order)
    cfg = config or target.config
    grid = np.linspace(0.0, 1.0, 201)[1:-1] if grid is None else np.asarray(grid, dtype=float)
    H, dH, d2H, d3H = (np.asarray(target.derivative(grid, k), dtype=float) for k in range(4))
    if np.any(H <= 0):
        raise VerificationError("H <= 0 on the grid")
    n = cfg.n_float
    expected = third_derivative(cfg, grid, H, dH, d2H)
    values = np.exp((n - 1) * np.log(H)) * (d3H - expected)
    return ResidualReport(grid, values, d3H - expected, float(np.max(np.abs(values))), math.nan, math.nan)


def _profile_residual(profile: Profile, config: ProblemConfig) -> ResidualReport:
    x, H, dH, d2H, d3H = profile.x, profile.H, profile.dH, profile.d2H, profile.d3H
    if np.any(H <= 0):
        raise VerificationError("profile has H <= 0 at a node")
    n = config.n_float
    pointwise = np.exp((n - 1) * np.log(H)) * (d3H - third_derivative(config, x, H, dH, d2H))
    # Step defect: each accepted step re-integrated at tighter tolerance and
    # compared with the next node, per component relative to its largest size.
    rhs = make_rhs(config)
    states = np.column_stack([H, dH, d2H])
    scale = np.maximum(np.max(np.abs(states), axis=0), 1e-300)
    defect = np.zeros_like(x)
    for i in range(len(x) - 1):
        y0 = states[i]
        h = x[i + 1] - x[i]
        sol = solve_ivp(rhs, (x[i], x[i + 1]), y0, method="DOP853", rtol=1e-13,
                        atol=1e-15 * np.maximum(np.abs(y0), 1e-300), first_step=h)
        if sol.status != 0:
            defect[i + 1] = math.inf
            continue
        rel = np.abs(sol.y[:, -1] - states[i + 1]) / scale
        defect[i + 1] = float(np.max(rel))
    values = np.maximum(np.abs(pointwise), defect)
    return ResidualReport(x, values, defect, float(np.max(values)), math.nan, math.nan)


# ---------------------------------------------------------------------------
# series vs shooting


def match_overlap(expansion: Expansion, profile: Profile, window: tuple | None = None, points: int = 25) -> float:
    """Maximum relative deviation of ``(H, H')`` between series and profile on a window.

    The default window is ``[delta, 10 delta]`` with ``delta`` the profile's
    seed point.
    """
    lo, hi = window if window is not None else (profile.delta, 10 * profile.delta)
    if lo < profile.delta * (1 - 1e-12) or hi > profile.x[-1] or not lo < hi:
        raise VerificationError("overlap window outside the integrated part of the profile")
    if expansion.config != profile.config:
        raise VerificationError("expansion and profile come from different configurations")
    worst = 0.0
    for x in np.geomspace(lo, hi, points):
        (sH, sdH), _ = expansion.evaluate(float(x), orders=2)
        pH, pdH = profile.derivative(float(x), 0), profile.derivative(float(x), 1)
        worst = max(worst, abs(pH - sH) / abs(sH), abs(pdH - sdH) / max(abs(sdH), 1e-300))
    return worst


@dataclass(frozen=True)
class ProbeResult:
    """Fitted ``x log x`` coefficient of ``(H/x - theta)/theta - b x`` and its uncertainty."""

    coefficient: float
    width: float
    condition: float
    basis: tuple
    series_value: float


def log_term_probe(
    config: ProblemConfig,
    profile: Profile,
    window: tuple = (1e-5, 1e-3),
    start: float = 1e-2,
    noise: float = 1e-13,
    points: int = 80,
) -> ProbeResult:
    """Fit the ``x log x`` coefficient from integrator data only.

    The solved profile's state at the integrator node nearest ``start`` is
    integrated backwards to the bottom of ``window`` with the profile equation
    (no series involved), and ``(H/x - theta)/theta - b x`` is fitted by least
    squares.  The basis holds ``x log x``, the three homogeneous modes
    ``1/x, 1, x`` (which absorb start-point and parameter errors), and every
    other monomial of the expansion whose size at the top of the window
    exceeds ``noise``.

    Raises:
        VerificationError: on a zero-angle configuration or an ill-conditioned
            fit (condition number above 1e10).
    """
    if config.branch != NONZERO_ANGLE:
        raise VerificationError("the log-term probe applies to nonzero contact angles")
    theta = config.theta_float
    b = float(profile.parameter["b"])
    lo, hi = window
    nodes = profile.x[profile.x >= hi]
    if nodes.size == 0:
        raise VerificationError("profile has no integrator node above the fit window")
    i0 = int(np.argmin(np.abs(np.log(nodes / start))))
    x0 = float(nodes[i0])
    j = int(np.searchsorted(profile.x, x0))
    y0 = [profile.H[j], profile.dH[j], profile.d2H[j]]
    rhs = make_rhs(config)
    sol = solve_ivp(rhs, (x0, lo * 0.5), y0, method="DOP853", rtol=1e-13,
                    atol=1e-16 * np.maximum(np.abs(y0), 1e-300), dense_output=True)
    if sol.status != 0:
        raise VerificationError(f"backward integration failed: {sol.message}")
    xs = np.geomspace(lo, hi, points)
    data = (sol.sol(xs)[0] / xs - theta) / theta - b * xs

    expansion = expand(config, {"b": b}, max_grade=4.0)
    L_hi = abs(math.log(hi))
    sizes = {}
    for idx, c in expansion.coefficients.items():
        key = (round(expansion.grade_float(idx), 12), idx.p)
        sizes[key] = max(sizes.get(key, 0.0), abs(float(c)) * hi ** key[0] * L_hi**idx.p)
    L = np.log(xs)
    # drop the smallest monomials until the fit is well conditioned
    while True:
        monomials = {(1.0, 1), (-1.0, 0), (0.0, 0), (1.0, 0)} | {k for k, v in sizes.items() if v > noise}
        basis = tuple(sorted(monomials))
        A = np.column_stack([xs**g * L**p for g, p in basis])
        scale = np.linalg.norm(A, axis=0)
        As = A / scale
        cond = float(np.linalg.cond(As))
        if cond <= 1e10 or noise >= 1e-2:
            break
        noise *= 10.0
    if cond > 1e10:
        raise VerificationError(f"ill-conditioned log fit (condition number {cond:.2e})")
    coef, *_ = np.linalg.lstsq(As, data, rcond=None)
    resid = data - As @ coef
    coef = coef / scale
    dof = max(1, len(xs) - len(basis))
    sigma2 = float(resid @ resid) / dof
    pinv = np.linalg.pinv(As)
    cov = sigma2 * pinv @ pinv.T
    i = basis.index((1.0, 1))
    width = 1.96 * math.sqrt(max(cov[i, i], 0.0)) / scale[i]
    series_value = sum(
        float(c) for idx, c in expansion.coefficients.items() if idx.p == 1 and abs(expansion.grade_float(idx) - 1) < 1e-12
    )
    return ProbeResult(float(coef[i]), width, cond, basis, series_value)


# ---------------------------------------------------------------------------
# uniqueness scans


@dataclass(frozen=True)
class ScanResult:
    name: str
    grid: tuple
    merits: tuple  # nan marks a failed shot (a gap)
    kinds: tuple

    @property
    def sign_changes(self) -> int:
        signs = [math.copysign(1.0, m) for m in self.merits if math.isfinite(m)]
        return sum(1 for a, b in zip(signs, signs[1:]) if a != b)

    def rows(self) -> list[tuple]:
        return list(zip(self.grid, self.kinds, self.merits))


def default_grid(config: ProblemConfig, points: int = 41) -> np.ndarray:
    """Log-spaced ``kappa`` in ``[1e-3, 1e2]``, or signed log-spaced ``b`` with ``1e-2 <= |b| <= 1e4``."""
    if parameter_name(config) == "kappa":
        return np.geomspace(1e-3, 1e2, points)
    half = np.geomspace(1e-2, 1e4, points // 2)
    return np.concatenate([-half[::-1], [0.0] if points % 2 else [], half])


def _merit(args):
    config, value, controls = args
    out = shoot(config, float(value), controls)
    return out.kind, out.merit


def uniqueness_scan(config: ProblemConfig, grid=None, controls: ShootControls = ShootControls(), jobs: int = 1) -> ScanResult:
    """Tabulate the shooting merit over ``grid``; failures are kept as gaps."""
    if config.d != 1:
        raise VerificationError("uniqueness scans need d = 1")
    grid = default_grid(config) if grid is None else np.asarray(grid, dtype=float)
    relaxed = ShootControls(**{**controls.__dict__, "tol": 0.0})
    tasks = [(config, float(v), relaxed) for v in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_merit, tasks))
    else:
        results = [_merit(t) for t in tasks]
    kinds = tuple(k for k, _ in results)
    merits = tuple(math.nan if k == FAILURE else float(m) for k, m in results)
    return ScanResult(parameter_name(config), tuple(float(v) for v in grid), merits, kinds)


# ---------------------------------------------------------------------------
# manifold flow check


def validity_window(expansion: Expansion, hi: float = 1e-2, decades: float = 4.0, tol: float = 1e-6) -> tuple:
    """Largest dyadic ``x <= hi`` where the relative truncation estimate is at most ``tol``.

    Returns ``(x / 10^decades, x)``.
    """
    x = 2.0 ** math.floor(math.log2(hi))
    while expansion.truncation_estimate(x) > tol:
        x *= 0.5
        if x < 1e-300:
            raise VerificationError("expansion has no usable validity window")
    return x * 10.0**-decades, x


def flow_gap(config: ProblemConfig, params: dict | None = None, x_range: tuple = (1e-4, 1e-2), max_grade: float = 12.0) -> float:
    """Relative gap between the series and the log-variable flow seeded from it."""
    name = parameter_name(config)
    params = params or {name: 1.0 if name == "kappa" else 0.0}
    expansion = expand(config, params, max_grade)
    system = build_system(config)
    y0 = series_state(expansion, x_range[0], system)
    traj = flow_in_s(system, y0, (math.log(x_range[0]), math.log(x_range[1])))
    if traj.status != "completed":
        return math.inf
    target = series_state(expansion, x_range[1], system)
    scale = np.maximum(np.abs(target), 1e-300)
    mask = np.abs(target) > 0
    return float(np.max(np.abs(traj.y[-1] - target)[mask] / scale[mask]))


# ---------------------------------------------------------------------------
# the gate


@dataclass(frozen=True)
class Check:
    name: str
    status: str  # "pass" | "fail" | "skip"
    value: float | None
    tolerance: float | None

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "value": self.value, "tolerance": self.tolerance}


@dataclass(frozen=True)
class VerificationReport:
    config: ProblemConfig
    checks: tuple
    parameter: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.status != "fail" for c in self.checks)

    def to_dict(self) -> dict:
        return {"checks": [c.to_dict() for c in self.checks], "pass": self.passed}


def _le(name: str, value: float, tol: float) -> Check:
    ok = math.isfinite(value) and value <= tol
    return Check(name, "pass" if ok else "fail", float(value) if math.isfinite(value) else None, tol)


def verify_all(
    config: ProblemConfig,
    controls: ShootControls = ShootControls(),
    scan: bool = False,
    jobs: int = 1,
) -> VerificationReport:
    """Spectrum, series residual order, manifold flow and (for ``d = 1``) the solved BVP.

    The BVP part checks residual <= 1e-8, series/profile overlap <= 1e-7 and,
    for zero angle, monotonicity; ``scan=True`` adds a uniqueness scan.
    """
    checks = []
    report = analyze_equilibrium(build_system(config))
    err = max(abs(a - b) for a, b in zip(report.eigenvalues, closed_form_spectrum(config)))
    checks.append(_le("spectrum", err, SPECTRUM_TOL))

    name = parameter_name(config)
    params = {name: 1.0 if name == "kappa" else 0.0}
    expansion = expand(config, params, controls.max_grade, dps=60)
    lo, hi = validity_window(expansion, hi=1e-2, tol=1e-8)
    res = residual(expansion, grid=dyadic_grid(lo, hi))
    if res.predicted_slope is None:
        checks.append(Check("series-residual-slope", "skip", None, SLOPE_TOL))
    else:
        checks.append(_le("series-residual-slope", abs(res.slope - res.predicted_slope), SLOPE_TOL))
    flow_hi = validity_window(expand(config, params, 12.0), hi=1e-2, decades=2, tol=1e-12)
    checks.append(_le("manifold-flow", flow_gap(config, params, flow_hi), FLOW_TOL))

    parameter: dict = {}
    if config.d == 1:
        try:
            solution = solve_bvp(config, controls)
        except ShootingError as exc:
            checks.append(Check("bvp-converged", "fail", None, controls.tol))
            checks.append(Check(f"bvp-error: {exc}", "fail", None, None))
            return VerificationReport(config, tuple(checks), parameter)
        parameter = {name: solution.value}
        profile = solution.profile
        checks.append(_le("bvp-converged", abs(solution.end_slope), controls.tol))
        checks.append(_le("profile-residual", residual(profile).max_norm, RESIDUAL_TOL))
        # the window reaches 10 delta, beyond the seeding accuracy of the
        # default grade, so the reference series is taken to twice the grade
        reference = expand(config, {name: solution.value}, 2 * controls.max_grade)
        checks.append(_le("overlap", match_overlap(reference, profile), OVERLAP_TOL))
        if config.zero_angle:
            mono = profile.is_monotone()
            checks.append(Check("monotone", "pass" if mono else "fail", 1.0 if mono else 0.0, None))
        if scan:
            result = uniqueness_scan(config, controls=controls, jobs=jobs)
            checks.append(Check("uniqueness", "pass" if result.sign_changes == 1 else "fail",
                                float(result.sign_changes), 1.0))
    else:
        checks.append(Check("bvp-converged", "skip", None, None))
    return VerificationReport(config, tuple(checks), parameter)


def tampered(profile: Profile, index: int, bump: float = 1e-6) -> Profile:
    """Copy of ``profile`` with ``H''`` bumped at one node (detector-sensitivity tests)."""
    d2H = profile.d2H.copy()
    d2H[index] += bump
    return Profile.from_nodes(profile.config, profile.parameter, profile.expansion, profile.x, profile.H, profile.dH, d2H)


def series_overlap_with_parameter(config: ProblemConfig, profile: Profile, shift: float) -> float:
    """Overlap of ``profile`` with the expansion at a shifted parameter value."""
    name = parameter_name(config)
    value = float(profile.parameter[name]) + shift
    return match_overlap(expand(config, {name: value}), profile)


__all__ = [
    "Check",
    "ProbeResult",
    "ResidualReport",
    "ScanResult",
    "VerificationError",
    "VerificationReport",
    "default_grid",
    "dyadic_grid",
    "flow_gap",
    "log_slope",
    "leading_order",
    "log_term_probe",
    "match_overlap",
    "predicted_slope",
    "residual",
    "series_overlap_with_parameter",
    "tampered",
    "uniqueness_scan",
    "validity_window",
    "verify_all",
]

