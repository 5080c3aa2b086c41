"""Shooting solver for the profile boundary-value problem on ``[0, 1]``.

A shot evaluates the local expansion at a small ``x = delta`` (for a given
value of the free parameter: the amplitude ``kappa`` for zero angle and low
mobility, the curvature parameter ``b`` otherwise), integrates
``H''' = H^(1-n) (x - 1)`` from there towards ``x = 1`` and classifies the
result:

* **undershoot** -- ``H'`` reaches zero at some ``x* <= 1`` (falling through zero),
* **overshoot** -- the shot reaches ``x = 1`` with ``H'(1) > tol``,
* **converged** -- the shot reaches ``x = 1`` with ``|H'(1)| <= tol``,
* **failure** -- ``H`` collapses to zero, the step size underflows, or the
  series cannot be seeded.

The signed merit ``g = H'(1)`` (or ``-(1 - x*)`` when an undershoot stops short
of ``x = 1``) changes sign exactly once between an undershoot and an
overshoot, which is what the bracketing and root refinement exploit.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from .model import NONZERO_ANGLE, ZERO_ANGLE_HIGH, ZERO_ANGLE_LOW, ConfigError, ProblemConfig
from .series import DEFAULT_MAX_GRADE, Expansion, SeriesError, expand

UNDERSHOOT = "undershoot"
OVERSHOOT = "overshoot"
CONVERGED = "converged"
FAILURE = "failure"

#: admissible relative truncation of the series at the seed point
SEED_TOL = 1e-12
#: undershoots whose ``H' = 0`` event lies within this distance of the end
#: are continued to the end so the merit becomes ``H'(1)``
CONTINUE_WINDOW = 0.05


class ShootingError(RuntimeError):
    """Raised when the boundary-value problem cannot be solved; carries the scan trace."""

    def __init__(self, message: str, trace: list | None = None):
        super().__init__(message)
        self.trace = trace or []


class SeedError(ValueError):
    """The series is not accurate enough at the requested seed point."""

    def __init__(self, message: str, max_delta: float | None = None):
        super().__init__(message)
        self.max_delta = max_delta


@dataclass(frozen=True)
class ShootControls:
    """Numerical controls for seeding, integration and root refinement.

    Attributes:
        delta: Upper bound for the seed point; the actual seed may be smaller.
        tol: Convergence tolerance on ``|H'(1)|``.
        rtol: Relative integration tolerance.
        atol: Absolute integration tolerance (further scaled to the seed state).
        max_grade: Truncation grade of the seeding expansion.
        epsilon: Validity scale of the series in its natural variables.
        bounds: Magnitude range searched while bracketing the parameter.
        max_iterations: Cap on root-refinement iterations.
        x_end: End of integration; ``None`` means 1 for ``d = 1`` and 0.9 otherwise.
    """

    delta: float = 1e-3
    tol: float = 1e-9
    rtol: float = 1e-10
    atol: float = 1e-12
    max_grade: float = DEFAULT_MAX_GRADE
    epsilon: float = 0.1
    bounds: tuple = (1e-8, 1e8)
    max_iterations: int = 200
    x_end: float | None = None

    def end(self, config: ProblemConfig) -> float:
        if self.x_end is not None:
            return self.x_end
        return 1.0 if config.d == 1 else 0.9


def parameter_name(config: ProblemConfig) -> str:
    """``kappa`` for the zero-angle low-mobility branch, ``b`` otherwise."""
    return "kappa" if config.branch == ZERO_ANGLE_LOW else "b"


# ---------------------------------------------------------------------------
# seeding


@dataclass(frozen=True)
class SeedState:
    x: float
    H: float
    dH: float
    d2H: float
    truncation: float

    @property
    def state(self) -> np.ndarray:
        return np.array([self.H, self.dH, self.d2H])


def seed_state(expansion: Expansion, delta: float, tol: float = SEED_TOL) -> SeedState:
    """Series state ``(H, H', H'')`` at ``x = delta``.

    Raises:
        SeedError: if the relative truncation estimate exceeds ``tol``; the
            error carries the largest admissible ``delta`` found by halving.
    """
    if not delta > 0:
        raise SeedError("delta must be positive")
    est = expansion.truncation_estimate(delta)
    if est > tol:
        raise SeedError(
            f"series truncation {est:.3e} exceeds {tol:.1e} at delta={delta!r}",
            max_delta=admissible_delta(expansion, delta, tol),
        )
    (H, dH, d2H), _ = expansion.evaluate(delta, orders=3)
    if not H > 0:
        raise SeedError(f"series gives H = {H!r} <= 0 at delta={delta!r}")
    return SeedState(delta, H, dH, d2H, est)


def admissible_delta(expansion: Expansion, start: float, tol: float = SEED_TOL, max_halvings: int = 400) -> float:
    """Halve ``start`` until the relative truncation estimate is at most ``tol``."""
    delta = start
    for _ in range(max_halvings):
        if expansion.truncation_estimate(delta) <= tol:
            return delta
        delta *= 0.5
    raise SeedError(f"no admissible seed point below {start!r} (series radius exceeded)")


def initial_delta(config: ProblemConfig, params: dict, controls: ShootControls) -> float:
    """Seed point keeping the series' natural variables below ``epsilon``."""
    eps = controls.epsilon
    n = config.n_float
    delta = controls.delta
    if config.branch == ZERO_ANGLE_LOW:
        kappa = float(params["kappa"])
        scale = eps * kappa**n
        delta = min(delta, scale ** (1.0 / (3 - 2 * n)))
        delta = min(delta, scale ** (1.0 / (4 - 2 * n)) if config.d == 1 else eps)
    elif config.branch == NONZERO_ANGLE:
        b = float(params["b"])
        theta = config.theta_float
        delta = min(delta, eps / max(1.0, abs(b)), (eps * theta**n) ** (1.0 / (3 - n)))
    else:
        from .model import high_mobility_roots

        beta, _ = high_mobility_roots(n)
        b = float(params["b"])
        delta = min(delta, (eps / max(1.0, abs(b))) ** (1.0 / beta))
    return delta


# ---------------------------------------------------------------------------
# profiles


def third_derivative(config: ProblemConfig, x, H, dH, d2H):
    """``H'''`` from the profile equation (radial corrections for ``d >= 2``)."""
    n = config.n_float
    x = np.asarray(x, dtype=float)
    H = np.asarray(H, dtype=float)
    out = np.exp((1.0 - n) * np.log(H)) * (x - 1.0)
    if config.d > 1:
        dm1 = config.d - 1
        out = out + dm1 * np.asarray(d2H) / (1.0 - x) + dm1 * np.asarray(dH) / (1.0 - x) ** 2
    return out


@dataclass(frozen=True)
class Profile:
    """A shot from ``delta`` to ``x_end`` stitched with its generating expansion.

    The samples are the integrator's accepted nodes.  Between nodes the profile
    is the quintic Hermite interpolant of ``(H, H', H'')``; below ``delta`` it
    is the expansion.
    """

    config: ProblemConfig
    parameter: dict
    expansion: Expansion
    x: np.ndarray
    H: np.ndarray
    dH: np.ndarray
    d2H: np.ndarray
    d3H: np.ndarray
    _interp: BPoly = field(repr=False, compare=False)
    _series: object = field(repr=False, compare=False)

    @classmethod
    def from_nodes(cls, config, parameter, expansion, x, H, dH, d2H) -> "Profile":
        x, H, dH, d2H = (np.asarray(a, dtype=float) for a in (x, H, dH, d2H))
        d3H = third_derivative(config, x, H, dH, d2H)
        interp = BPoly.from_derivatives(x, np.column_stack([H, dH, d2H]))
        return cls(config, dict(parameter), expansion, x, H, dH, d2H, d3H, interp, expansion.float_series())

    @property
    def delta(self) -> float:
        return float(self.x[0])

    @property
    def domain(self) -> tuple:
        return (0.0, float(self.x[-1]))

    def derivative(self, x, order: int = 0):
        """``H^(order)`` at ``x`` (scalar or array) on ``[0, x_end]``."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if np.any(xs < 0) or np.any(xs > self.x[-1] * (1 + 1e-14)):
            raise ValueError("evaluation point outside the profile's domain")
        out = np.empty_like(xs)
        below = xs < self.delta
        if np.any(~below):
            out[~below] = self._interp(xs[~below], nu=order) if order < 3 else self._ode_third(xs[~below])
        for i in np.flatnonzero(below):
            out[i] = self._series_value(xs[i], order)
        return out if np.ndim(x) else float(out[0])

    def height(self, x):
        return self.derivative(x, 0)

    __call__ = height

    def _ode_third(self, xs):
        H, dH, d2H = (self._interp(xs, nu=k) for k in range(3))
        return third_derivative(self.config, xs, H, dH, d2H)

    def _series_value(self, x: float, order: int) -> float:
        if x == 0.0:
            if order == 0:
                return 0.0
            values, _ = self.expansion.evaluate(0.0, orders=order + 1)
            return values[order]
        return self._series.evaluate(x)[order]

    def series_samples(self, count: int = 16) -> list[tuple]:
        """Series rows on a geometric grid strictly below ``delta``."""
        xs = self.delta * np.logspace(-4, 0, count + 1)[:-1]
        return [(float(v), *self._series.evaluate(float(v))) for v in xs]

    def rows(self) -> list[tuple]:
        """``(x, H, H', H'', H''', src)`` rows: series samples then integrator nodes."""
        out = [(*r, "series") for r in self.series_samples()]
        out += [(*map(float, r), "ode") for r in zip(self.x, self.H, self.dH, self.d2H, self.d3H)]
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["x", "H", "dH", "d2H", "d3H", "src"])
        for row in self.rows():
            writer.writerow([f"{v:.17g}" for v in row[:5]] + [row[5]])
        return buf.getvalue()

    def is_monotone(self, upper: float = 1.0 - 1e-6) -> bool:
        """``H' > 0`` at every node in ``(delta, upper)`` and on a fine grid there."""
        mask = (self.x > self.delta) & (self.x < upper)
        if np.any(self.dH[mask] <= 0):
            return False
        grid = np.linspace(self.delta, min(upper, self.x[-1]), 2001)[1:]
        return bool(np.all(self._interp(grid, nu=1) > 0))

    @property
    def end_slope(self) -> float:
        return float(self.dH[-1])


# ---------------------------------------------------------------------------
# single shots


@dataclass(frozen=True)
class ShotOutcome:
    """Classification of one shot and its witness.

    ``witness`` is ``x*`` for an undershoot, ``H'(1)`` for an overshoot, the
    :class:`Profile` for a converged shot and a reason string for a failure.
    ``merit`` is the signed shooting function (``nan`` for failures).
    """

    kind: str
    witness: object
    merit: float
    parameter: float | None = None

    @property
    def profile(self) -> Profile | None:
        return self.witness if self.kind == CONVERGED else None


def make_rhs(config: ProblemConfig):
    """First-order right-hand side for ``y = (H, H', H'')``."""
    n = config.n_float
    dm1 = config.d - 1

    def rhs(x, y):
        H, dH, d2H = y
        if H <= 0:
            return np.array([dH, d2H, 0.0])
        # exp/log avoids overflow-prone powers of tiny H when n > 1
        third = math.exp((1.0 - n) * math.log(H)) * (x - 1.0)
        if dm1:
            third += dm1 * d2H / (1.0 - x) + dm1 * dH / (1.0 - x) ** 2
        return np.array([dH, d2H, third])

    return rhs


def _integrate(config: ProblemConfig, y0, x0: float, x1: float, controls: ShootControls, slope_event: bool):
    rhs = make_rhs(config)

    def collapse(x, y):
        return y[0]

    collapse.terminal = True
    collapse.direction = -1

    def slope_zero(x, y):
        return y[1]

    slope_zero.terminal = True
    slope_zero.direction = -1

    events = [collapse, slope_zero] if slope_event else [collapse]
    scale = np.maximum(np.abs(y0), 1e-300)
    atol = np.minimum(controls.atol, controls.rtol * scale)
    first = min(1e-3 * x0, 0.1 * (x1 - x0)) if x0 > 0 else None
    return solve_ivp(
        rhs, (x0, x1), y0, method="DOP853", rtol=controls.rtol, atol=atol, events=events, first_step=first
    )


def integrate_profile(
    config: ProblemConfig,
    seed: SeedState,
    controls: ShootControls = ShootControls(),
    expansion: Expansion | None = None,
    parameter: dict | None = None,
) -> ShotOutcome:
    """Integrate from the seed to the end of the interval and classify the shot."""
    if not seed.H > 0:
        raise ValueError("seed must have H > 0")
    x_end = controls.end(config)
    value = None if not parameter else float(next(iter(parameter.values())))
    sol = _integrate(config, seed.state, seed.x, x_end, controls, slope_event=True)
    if sol.status == -1:
        return ShotOutcome(FAILURE, f"step collapse: {sol.message}", math.nan, value)
    if sol.status == 1 and sol.t_events[0].size:
        return ShotOutcome(FAILURE, "F<=0: H reached zero", math.nan, value)
    xs, ys = sol.t, sol.y
    x_star = None
    if sol.status == 1:
        x_star = float(sol.t_events[1][0])
        if x_end - x_star > CONTINUE_WINDOW * x_end:
            return ShotOutcome(UNDERSHOOT, x_star, -(x_end - x_star), value)
        if x_star >= x_end:
            # the slope vanishes at the end point itself: classify on H'(1)
            x_star = None
        else:
            tail = _integrate(config, sol.y_events[1][0], x_star, x_end, controls, slope_event=False)
            if tail.status != 0:
                return ShotOutcome(UNDERSHOOT, x_star, -(x_end - x_star), value)
            xs = np.concatenate([xs, tail.t[1:]])
            ys = np.concatenate([ys, tail.y[:, 1:]], axis=1)
    slope = float(ys[1, -1])
    if abs(slope) <= controls.tol and expansion is not None:
        profile = Profile.from_nodes(config, parameter or {}, expansion, xs, ys[0], ys[1], ys[2])
        return ShotOutcome(CONVERGED, profile, slope, value)
    if x_star is not None:
        return ShotOutcome(UNDERSHOOT, x_star, slope, value)
    if slope > controls.tol:
        return ShotOutcome(OVERSHOOT, slope, slope, value)
    return ShotOutcome(UNDERSHOOT, float(xs[-1]), slope, value)


def shoot(config: ProblemConfig, value: float, controls: ShootControls = ShootControls()) -> ShotOutcome:
    """One complete shot for parameter value ``value`` (kappa or b)."""
    name = parameter_name(config)
    params = {name: value}
    try:
        expansion = expand(config, params, controls.max_grade)
        delta = admissible_delta(expansion, initial_delta(config, params, controls))
        seed = seed_state(expansion, delta)
    except (SeedError, SeriesError) as exc:
        return ShotOutcome(FAILURE, f"series radius exceeded: {exc}", math.nan, value)
    return integrate_profile(config, seed, controls, expansion, params)


def shot_profile(config: ProblemConfig, value: float, controls: ShootControls = ShootControls()) -> Profile:
    """The integrated profile for ``value`` whatever its classification (must reach the end)."""
    relaxed = ShootControls(**{**controls.__dict__, "tol": math.inf})
    outcome = shoot(config, value, relaxed)
    if outcome.kind != CONVERGED:
        raise ShootingError(f"shot did not reach the end of the interval: {outcome.kind} ({outcome.witness})")
    return outcome.witness


# ---------------------------------------------------------------------------
# boundary-value solve


@dataclass(frozen=True)
class Solution:
    config: ProblemConfig
    name: str
    value: float
    profile: Profile
    trace: tuple  # (parameter, kind, merit) for every shot taken

    @property
    def end_slope(self) -> float:
        return self.profile.end_slope


def _sign(outcome: ShotOutcome) -> int:
    if outcome.kind == FAILURE:
        return 0
    return 1 if outcome.merit > 0 else -1


def bracket_parameter(config: ProblemConfig, controls: ShootControls = ShootControls(), trace: list | None = None):
    """Geometric search (factor 4) for an undershoot/overshoot pair.

    Returns ``(lo, hi, outcome_lo, outcome_hi)`` with an undershoot at ``lo``
    and an overshoot at ``hi`` (either may already be converged).
    """
    trace = trace if trace is not None else []
    lo_mag, hi_mag = controls.bounds

    def run(v):
        out = shoot(config, v, controls)
        trace.append((v, out.kind, out.merit))
        return out

    if parameter_name(config) == "kappa":
        v = 0.1
        out = run(v)
        if out.kind == CONVERGED:
            return v, v, out, out
        while out.kind == FAILURE and v * 4 <= hi_mag:
            v *= 4
            out = run(v)
        if out.kind == FAILURE:
            raise ShootingError("no usable shot while bracketing", trace)
        direction = 4.0 if _sign(out) < 0 else 0.25
        prev_v, prev = v, out
        while True:
            v = prev_v * direction
            if not lo_mag <= v <= hi_mag:
                raise ShootingError("bracket not found within parameter bounds", trace)
            out = run(v)
            if out.kind == FAILURE:
                continue_v = v
                prev_v = continue_v
                continue
            if out.kind == CONVERGED:
                return v, v, out, out
            if _sign(out) != _sign(prev):
                pairs = sorted([(prev_v, prev), (v, out)], key=lambda p: _sign(p[1]))
                return pairs[0][0], pairs[1][0], pairs[0][1], pairs[1][1]
            prev_v, prev = v, out
    # b: a signed parameter, expand both ends from -1 and +1
    lo, hi = -1.0, 1.0
    out_lo, out_hi = run(lo), run(hi)
    while not (out_lo.kind in (UNDERSHOOT, CONVERGED) and out_lo.merit <= 0):
        lo = lo * 4 if lo < 0 else -1.0
        if abs(lo) > hi_mag:
            raise ShootingError("no undershoot found within parameter bounds", trace)
        out_lo = run(lo)
    while not (out_hi.kind in (OVERSHOOT, CONVERGED) and out_hi.merit >= 0):
        hi = hi * 4
        if abs(hi) > hi_mag:
            raise ShootingError("no overshoot found within parameter bounds", trace)
        out_hi = run(hi)
    if lo > hi:
        raise ShootingError("undershoot lies above overshoot; merit is not monotone", trace)
    return lo, hi, out_lo, out_hi


def solve_bvp(config: ProblemConfig, controls: ShootControls = ShootControls()) -> Solution:
    """Bracket the free parameter and refine until ``|H'(1)| <= tol``.

    Refinement bisects (geometrically for ``kappa``) until the bracket is
    narrower than ``1e-3 |param|`` and then takes secant steps, falling back
    to bisection whenever a secant step leaves the bracket or fails to shrink
    it by half.
    """
    if config.d != 1:
        raise ConfigError("the boundary-value solver supports d = 1 only")
    trace: list = []
    name = parameter_name(config)
    lo, hi, out_lo, out_hi = bracket_parameter(config, controls, trace)
    best = out_lo if out_lo.kind == CONVERGED else out_hi if out_hi.kind == CONVERGED else None
    positive = name == "kappa"

    def run(v):
        out = shoot(config, v, controls)
        trace.append((v, out.kind, out.merit))
        return out

    g_lo, g_hi = out_lo.merit, out_hi.merit
    last_width = abs(hi - lo)
    for _ in range(controls.max_iterations):
        if best is not None:
            break
        width = abs(hi - lo)
        scale = max(abs(lo), abs(hi))
        if width < 1e-3 * scale and g_hi != g_lo:
            v = hi - g_hi * (hi - lo) / (g_hi - g_lo)
            if not (min(lo, hi) < v < max(lo, hi)) or width > 0.5 * last_width:
                v = math.sqrt(lo * hi) if positive else 0.5 * (lo + hi)
        else:
            v = math.sqrt(lo * hi) if positive else 0.5 * (lo + hi)
        last_width = width
        if v in (lo, hi):
            break
        out = run(v)
        if out.kind == CONVERGED:
            best = out
        elif out.kind == FAILURE:
            raise ShootingError(f"shot failed inside the bracket at {name}={v!r}: {out.witness}", trace)
        elif out.merit < 0:
            lo, g_lo = v, out.merit
        else:
            hi, g_hi = v, out.merit
    if best is None:
        raise ShootingError("root refinement did not reach the tolerance", trace)
    profile = best.witness
    if config.zero_angle and not profile.is_monotone():
        raise ShootingError("converged zero-angle profile is not monotone", trace)
    return Solution(config, name, float(best.parameter), profile, tuple(trace))


# ---------------------------------------------------------------------------
# explicit n = 1 solution


@dataclass(frozen=True)
class ExactProfile:
    """``H = theta x + (1 - 3 theta)/6 x^2 - x^3/6 + x^4/24`` (``n = 1``)."""

    theta: float

    @property
    def coefficients(self) -> tuple:
        return (0.0, self.theta, (1.0 - 3.0 * self.theta) / 6.0, -1.0 / 6.0, 1.0 / 24.0)

    @property
    def config(self) -> ProblemConfig:
        return ProblemConfig(Fraction(1), Fraction(self.theta).limit_denominator(10**12))

    @property
    def domain(self) -> tuple:
        return (0.0, 1.0)

    @property
    def parameter(self) -> dict:
        if self.theta == 0:
            return {"kappa": 1.0 / 6.0}
        return {"b": (1.0 - 3.0 * self.theta) / (6.0 * self.theta)}

    def derivative(self, x, order: int = 0):
        poly = np.polynomial.Polynomial(self.coefficients).deriv(order)
        return poly(np.asarray(x, dtype=float)) if np.ndim(x) else float(poly(float(x)))

    def height(self, x):
        return self.derivative(x, 0)

    __call__ = height


def explicit_solution(n, theta=0.0) -> ExactProfile:
    """Closed-form solution for ``n = 1``; ``theta = 0`` gives ``x^2 (2 - x)^2 / 24``."""
    if Fraction(n) != 1:
        raise ConfigError("the explicit solution exists for n = 1 only")
    theta = float(theta)
    if theta < 0:
        raise ConfigError("theta must be nonnegative")
    return ExactProfile(theta)
