"""Problem configuration, regime classification and similarity scalings.

The reduced profile problem lives on ``[0, 1]``::

    H^{n-1} H''' = -1 + x,   H(0) = 0,  H'(0) = theta,  H'(1) = 0,

with the contact line at ``x = 0`` and the droplet centre at ``x = 1``.  In
``d >= 2`` radial dimensions the third derivative is replaced by the radial
operator ``H''' - (d-1)/(1-x) H'' - (d-1)/(1-x)^2 H'``.

This module owns the single source of truth for a run (:class:`ProblemConfig`),
decides which local-expansion regime applies (:func:`classify`), and maps a
unit profile back to a physical droplet of prescribed mass
(:func:`normalize_scaling`, :func:`self_similar_height`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import numpy as np
from scipy import integrate, special

Number = Union[Fraction, float]

ZERO_ANGLE_LOW = "zero-angle-low"
ZERO_ANGLE_HIGH = "zero-angle-high"
NONZERO_ANGLE = "nonzero-angle"
BRANCHES = (ZERO_ANGLE_LOW, ZERO_ANGLE_HIGH, NONZERO_ANGLE)

#: largest resonance order searched when ``n`` is a floating value
MAX_RESONANCE_ORDER = 10**6
#: floating tolerance for ``n == 3 - 1/m`` when ``n`` is not exact
RESONANCE_TOL = 1e-12


class ConfigError(ValueError):
    """Raised for configurations outside the covered parameter range."""


def parse_number(value: Union[str, int, float, Fraction]) -> Number:
    """Parse ``p/q`` or an integer literal exactly, anything else as a float.

    >>> parse_number("5/2")
    Fraction(5, 2)
    >>> parse_number("2")
    Fraction(2, 1)
    >>> parse_number("0.5")
    0.5
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise ConfigError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ConfigError(f"not a finite number: {value!r}")
        return value
    text = str(value).strip()
    try:
        if "/" in text:
            num, den = text.split("/", 1)
            return Fraction(int(num.strip()), int(den.strip()))
        try:
            return Fraction(int(text))
        except ValueError:
            out = float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"cannot parse number {value!r}") from exc
    if not math.isfinite(out):
        raise ConfigError(f"not a finite number: {value!r}")
    return out


def format_number(value: Number) -> str:
    """Inverse of :func:`parse_number` (exact for rationals, shortest repr for floats)."""
    if isinstance(value, Fraction):
        return str(value.numerator) if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return repr(float(value))


def is_exact(value: Number) -> bool:
    return isinstance(value, Fraction)


@dataclass(frozen=True)
class ProblemConfig:
    """Mobility exponent ``n``, contact-angle slope ``theta`` and dimension ``d``.

    ``branch`` is derived from ``(n, theta)`` when omitted and validated
    against them when given.
    """

    n: Number
    theta: Number = Fraction(0)
    d: int = 1
    branch: str = field(default="")

    def __post_init__(self) -> None:
        n = parse_number(self.n)
        theta = parse_number(self.theta)
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "theta", theta)
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise ConfigError(f"dimension d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))
        if not 0 < n < 3:
            raise ConfigError(f"mobility exponent n={format_number(n)} outside (0, 3)")
        if theta < 0:
            raise ConfigError(f"contact-angle slope theta={format_number(theta)} must be >= 0")
        if theta > 0 and self.d != 1:
            raise ConfigError("nonzero contact angle is only defined for d = 1")
        if theta == 0:
            if _is_three_halves(n):
                raise ConfigError("n = 3/2 with theta = 0 is the uncovered borderline case")
            derived = ZERO_ANGLE_LOW if n < Fraction(3, 2) else ZERO_ANGLE_HIGH
        else:
            derived = NONZERO_ANGLE
        if self.branch and self.branch != derived:
            raise ConfigError(f"branch {self.branch!r} inconsistent with n, theta (expected {derived!r})")
        object.__setattr__(self, "branch", derived)

    @property
    def n_float(self) -> float:
        return float(self.n)

    @property
    def theta_float(self) -> float:
        return float(self.theta)

    @property
    def zero_angle(self) -> bool:
        return self.theta == 0

    def describe(self) -> dict:
        return {"n": format_number(self.n), "theta": format_number(self.theta), "d": self.d}


def _is_three_halves(n: Number) -> bool:
    if isinstance(n, Fraction):
        return n == Fraction(3, 2)
    return abs(n - 1.5) < RESONANCE_TOL


def load_config_file(path: str) -> dict[str, str]:
    """Read ``key=value`` lines (``#`` comments allowed) for n, theta, d."""
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            if key not in ("n", "theta", "d"):
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    return values


# ---------------------------------------------------------------------------
# regime classification

ZeroAngleLow = "ZeroAngleLow"
ZeroAngleHigh = "ZeroAngleHigh"
NonzeroNonResonant = "NonzeroNonResonant"
NonzeroResonant = "NonzeroResonant"


@dataclass(frozen=True)
class RegimeClass:
    """Which local expansion applies, with its leading and secondary exponents.

    ``alpha`` and ``beta`` are exact rationals when ``n`` is; the zero-angle
    high-``n`` secondary exponent is irrational in general and is a float.
    """

    kind: str
    alpha: Number
    beta: Number
    m: int | None = None

    @property
    def resonant(self) -> bool:
        return self.kind == NonzeroResonant


def high_mobility_mu(n: Number) -> Number:
    """``mu = a (a-1) (2-a)`` with ``a = 3/n``; the amplitude obeys ``A^n = 1/mu``."""
    a = 3 / n if isinstance(n, Fraction) else 3.0 / n
    return a * (a - 1) * (2 - a)


def high_mobility_roots(n: float) -> tuple[float, float]:
    """Positive and negative nontrivial indicial roots for the zero-angle, n > 3/2 branch."""
    n = float(n)
    disc = -27.0 + 36.0 * n - 8.0 * n * n
    root = math.sqrt(disc)
    return (root - 9.0 + 4.0 * n) / (2.0 * n), (-root - 9.0 + 4.0 * n) / (2.0 * n)


def resonance_order(n: Number) -> int | None:
    """Return ``m`` if ``n = 3 - 1/m`` for a positive integer ``m``, else ``None``."""
    if isinstance(n, Fraction):
        gap = 3 - n
        if gap > 0 and gap.numerator == 1:
            return gap.denominator
        return None
    gap = 3.0 - n
    if gap <= 0:
        return None
    m = round(1.0 / gap)
    if 1 <= m <= MAX_RESONANCE_ORDER and abs(n - (3.0 - 1.0 / m)) < RESONANCE_TOL:
        return int(m)
    return None


def classify(config: ProblemConfig) -> RegimeClass:
    """Classify the configuration into one of the four local-expansion regimes.

    >>> classify(ProblemConfig(n="2", theta=1)).kind
    'NonzeroResonant'
    >>> classify(ProblemConfig(n=1, theta=0)).beta
    Fraction(1, 1)
    """
    n = config.n
    exact = isinstance(n, Fraction)
    if config.branch == ZERO_ANGLE_LOW:
        return RegimeClass(ZeroAngleLow, Fraction(2), 3 - 2 * n)
    if config.branch == ZERO_ANGLE_HIGH:
        alpha = Fraction(3) / n if exact else 3.0 / n
        beta, _ = high_mobility_roots(float(n))
        return RegimeClass(ZeroAngleHigh, alpha, beta)
    m = resonance_order(n)
    kind = NonzeroResonant if m is not None else NonzeroNonResonant
    return RegimeClass(kind, Fraction(1), 3 - n, m)


# ---------------------------------------------------------------------------
# similarity scalings


def sphere_area(d: int) -> float:
    """Surface measure of the unit sphere in R^d (2 for d = 1)."""
    return 2.0 * math.pi ** (d / 2.0) / special.gamma(d / 2.0)


def _profile_height(profile) -> Callable[[float], float]:
    if hasattr(profile, "height"):
        return profile.height
    if callable(profile):
        return profile
    raise TypeError("unit profile must be callable or expose .height(x)")


def _check_covers_unit_interval(profile) -> None:
    domain = getattr(profile, "domain", None)
    if domain is not None:
        lo, hi = domain
        if lo > 0 or hi < 1:
            raise ConfigError(f"unit profile covers [{lo}, {hi}], not [0, 1]")


def profile_moment(profile, d: int = 1) -> float:
    """``int_0^1 H(x) (1-x)^{d-1} dx`` by adaptive quadrature."""
    height = _profile_height(profile)
    value, _ = integrate.quad(
        lambda x: float(height(x)) * (1.0 - x) ** (d - 1), 0.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=400
    )
    return value


def normalize_scaling(mass: float, config: ProblemConfig, unit_profile) -> tuple[float, float]:
    """Height and length scales ``(A, B)`` of the droplet with mass ``mass``.

    The physical profile is ``H(Z) = A * U(1 - |Z|/B)`` with ``U`` the unit
    profile; it solves the similarity ODE with right-hand side ``Z/(n d + 4)``
    iff ``A^n (n d + 4) = B^4`` and has mass
    ``|S^{d-1}| A B^d int_0^1 U(x) (1-x)^{d-1} dx``.  In one dimension this is
    ``A^n = B^4/(n+4)`` and ``M = 2 A B int_0^1 U``.
    """
    if not mass > 0:
        raise ConfigError("mass must be positive")
    _check_covers_unit_interval(unit_profile)
    n = config.n_float
    d = config.d
    moment = profile_moment(unit_profile, d)
    if not moment > 0:
        raise ConfigError("unit profile has nonpositive mass")
    c = n * d + 4.0
    B = (mass * c ** (1.0 / n) / (sphere_area(d) * moment)) ** (1.0 / (d + 4.0 / n))
    A = (B**4 / c) ** (1.0 / n)
    return A, B


def even_reflection(height: Callable[[float], float]) -> Callable[[np.ndarray], np.ndarray]:
    """Extend a profile on ``[0, 1]`` evenly about ``x = 1`` to ``[0, 2]`` (zero outside)."""

    def reflected(x):
        x = np.asarray(x, dtype=float)
        y = np.where(x > 1.0, 2.0 - x, x)
        inside = (y >= 0.0) & (x <= 2.0)
        out = np.zeros_like(y)
        if np.any(inside):
            out[inside] = np.array([float(height(v)) for v in np.atleast_1d(y[inside])])
        return out if out.ndim else float(out)

    return reflected


def self_similar_height(profile, scales: tuple[float, float], t: float, z, config: ProblemConfig | None = None):
    """Film height ``h(t, z) = t^{-d/(nd+4)} A H_even(Z/B + 1)``, ``Z = t^{-1/(nd+4)} |z|``.

    ``z`` is a position (d = 1) or a radius ``|z|`` (d >= 2); arrays are
    evaluated elementwise and the result is zero outside the support.
    """
    if not t > 0:
        raise ConfigError("time must be positive")
    config = config if config is not None else getattr(profile, "config", None)
    if config is None:
        raise ConfigError("a ProblemConfig is required")
    A, B = scales
    n, d = config.n_float, config.d
    c = n * d + 4.0
    Z = t ** (-1.0 / c) * np.abs(np.asarray(z, dtype=float))
    reflected = even_reflection(_profile_height(profile))
    # 1 - |Z|/B lies on the contact-line half of the reflected profile
    h = t ** (-d / c) * A * reflected(1.0 - Z / B)
    return h
