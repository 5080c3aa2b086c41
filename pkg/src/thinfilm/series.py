"""Graded (log-)power-series expansions of the profile at the contact line.

Every covered regime uses the ansatz::

    H = A x^alpha (1 + u),   u = sum c[k, l, p] x^(k g1 + l g2) (log x)^p,

with the leading exponent ``alpha`` and the generators ``(g1, g2)`` fixed by
the regime.  Writing ``f = 1 + u`` and ``theta = x d/dx``, the profile ODE
becomes the graded equation::

    q_alpha(theta) f = S(x) f^(1-n) + (d-1) [x/(1-x) r(theta) f + x^2/(1-x)^2 s(theta) f]

with ``q_alpha(g) = (g+alpha)(g+alpha-1)(g+alpha-2)``, ``r(g) = (g+alpha)(g+alpha-1)``,
``s(g) = g+alpha`` and the source ``S = A^(-n) x^(3 - alpha n) (-1 + x)``.  The
linear part at a monomial of grade ``g`` is the indicial polynomial ``P(g)``;
coefficients are found monomial by monomial in increasing grade:

* ``P(g) != 0``: divide the load by ``P`` (triangularly in the log power),
* ``P(g) == 0`` on the kernel monomial: inject the free parameter,
* ``P(g) == 0`` with a nonzero load: escalate the log power by one, dividing
  by ``P'(g)``.

The composite ``f^(1-n)`` is accumulated with the classical power recurrence
``(1+u) D w = e w D u`` for the total-degree derivation ``D``.

Coefficients are indexed by the pair ``(k, l)`` of generator counts (and the
log power ``p``), not by the merged grade value: coincident grades reached by
different pairs are kept apart, which keeps the per-monomial scaling laws
intact, and a resonant load is absorbed by a log term on the monomial that
carries it.  Arithmetic is mpmath at a configurable precision.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Iterable, NamedTuple, Sequence

import mpmath
from mpmath import mp, mpf

from .model import (
    NONZERO_ANGLE,
    ZERO_ANGLE_HIGH,
    ZERO_ANGLE_LOW,
    ProblemConfig,
    RegimeClass,
    classify,
    format_number,
    high_mobility_mu,
    high_mobility_roots,
    parse_number,
)

DEFAULT_MAX_GRADE = 8.0
PRECISION_ENV = "THINFILM_PRECISION"
_DPS = {"double": 15, "extended": 50}

#: refuse to divide when 0 < |P(g)| < NEAR_RESONANCE * |P'(g)|
NEAR_RESONANCE = 1e-10


class SeriesError(ArithmeticError):
    """Raised when the recursion cannot proceed (double or near resonance)."""


class NearResonanceError(SeriesError):
    pass


def default_dps() -> int:
    """Working decimal digits selected by ``THINFILM_PRECISION`` (default: extended)."""
    mode = os.environ.get(PRECISION_ENV, "extended").strip().lower() or "extended"
    if mode not in _DPS:
        raise ValueError(f"{PRECISION_ENV} must be one of {sorted(_DPS)}, got {mode!r}")
    return _DPS[mode]


def to_mp(value) -> mpf:
    """Convert a Fraction/float/int/mpf to an mpf at the current precision."""
    if isinstance(value, Fraction):
        return mpf(value.numerator) / value.denominator
    return mpf(value)


class GradeIndex(NamedTuple):
    """Monomial ``x1^k x2^l (log x)^p`` with ``x1 = x^g1``, ``x2 = x^g2``."""

    k: int
    l: int
    p: int = 0


# ---------------------------------------------------------------------------
# problem set-up


@dataclass(frozen=True)
class IndicialOperator:
    """``P(g) = g^3 + c2 g^2 + c1 g + c0`` with its three roots (floats)."""

    coefficients: tuple  # (1, c2, c1, c0)
    roots: tuple

    def __call__(self, g: float) -> float:
        c3, c2, c1, c0 = (float(c) for c in self.coefficients)
        return ((c3 * g + c2) * g + c1) * g + c0

    def derivative(self, g: float) -> float:
        _, c2, c1, _ = (float(c) for c in self.coefficients)
        return (3 * g + 2 * c2) * g + c1


@dataclass(frozen=True)
class ExpansionProblem:
    """The graded problem for one configuration (independent of precision).

    ``generators`` are exact rationals whenever ``n`` is exact and the regime
    has rational exponents; the high-mobility zero-angle generator ``beta`` is
    recomputed at the working precision on demand.
    """

    config: ProblemConfig
    regime: RegimeClass
    generators: tuple
    indicial: IndicialOperator
    #: source monomials (k, l) -> integer weight, multiplied by A^(-n)
    source: tuple
    kernel: tuple | None
    exact: bool

    @property
    def corrections(self) -> bool:
        return self.config.d >= 2

    @property
    def n(self):
        return self.config.n

    def generators_mp(self) -> tuple[mpf, mpf]:
        g1, g2 = self.generators
        if self.config.branch == ZERO_ANGLE_HIGH:
            return mpf(1), high_beta_mp(self.config.n)
        return to_mp(g1), to_mp(g2)

    def grade(self, k: int, l: int):
        """Grade of ``x1^k x2^l``: exact when possible, else an mpf."""
        if self.exact:
            g1, g2 = self.generators
            return k * g1 + l * g2
        g1, g2 = self.generators_mp()
        return k * g1 + l * g2

    def lattice(self, max_grade) -> list[tuple[int, int]]:
        """All ``(k, l) != (0, 0)`` with grade <= max_grade, in increasing grade."""
        gmax = Fraction(max_grade) if self.exact and isinstance(max_grade, (int, Fraction)) else max_grade
        g1, g2 = self.generators if self.exact else tuple(float(g) for g in self.generators_mp())
        tol = 0 if self.exact and isinstance(gmax, Fraction) else 1e-12
        out = []
        k = 0
        while k * g1 <= gmax + tol:
            l = 0
            while k * g1 + l * g2 <= gmax + tol:
                if (k, l) != (0, 0):
                    out.append((k, l))
                l += 1
            k += 1
        out.sort(key=lambda kl: (self.grade(*kl), kl[0]))
        return out


def high_beta_mp(n) -> mpf:
    """Positive indicial root ``(sqrt(-27+36n-8n^2) - 9 + 4n)/(2n)`` at working precision."""
    n = to_mp(n)
    return (mpmath.sqrt(-27 + 36 * n - 8 * n * n) - 9 + 4 * n) / (2 * n)


def _indicial_coefficients(alpha, sigma_term):
    """Coefficients (1, c2, c1, c0) of ``q_alpha(g) - sigma_term``."""
    return (1, 3 * (alpha - 1), 3 * alpha * alpha - 6 * alpha + 2, alpha * (alpha - 1) * (alpha - 2) - sigma_term)


def build_expansion_problem(config: ProblemConfig) -> ExpansionProblem:
    """Set up generators, indicial operator and source for ``config``."""
    regime = classify(config)
    n = config.n
    exact = isinstance(n, Fraction)
    if config.branch == ZERO_ANGLE_LOW:
        if config.d == 1:
            generators = (4 - 2 * n, 3 - 2 * n)
            source = (((1, 0), 1), ((0, 1), -1))
        else:
            generators = (Fraction(1) if exact else 1.0, 3 - 2 * n)
            source = (((1, 1), 1), ((0, 1), -1))
        coefficients = _indicial_coefficients(Fraction(2), 0)
        roots = (0.0, -1.0, -2.0)
        kernel = None
    elif config.branch == NONZERO_ANGLE:
        generators = (Fraction(1) if exact else 1.0, 3 - n)
        source = (((1, 1), 1), ((0, 1), -1))
        coefficients = _indicial_coefficients(Fraction(1), 0)
        roots = (0.0, 1.0, -1.0)
        kernel = (1, 0)
    else:
        beta, alpha_neg = high_mobility_roots(float(n))
        alpha = regime.alpha
        mu = high_mobility_mu(n)
        generators = (Fraction(1) if exact else 1.0, beta)
        source = (((1, 0), 1), ((0, 0), -1))
        coefficients = _indicial_coefficients(alpha, (n - 1) * mu)
        roots = (beta, -1.0, alpha_neg)
        kernel = (0, 1)
        exact = False
    return ExpansionProblem(
        config=config,
        regime=regime,
        generators=generators,
        indicial=IndicialOperator(tuple(coefficients), tuple(float(r) for r in roots)),
        source=source,
        kernel=kernel,
        exact=exact,
    )


# ---------------------------------------------------------------------------
# log-polynomial helpers (a coefficient is a list indexed by the log power)


def _trim(c: list) -> list:
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    return c


def _add_into(acc: list, c: Sequence, scale=1) -> None:
    if len(acc) < len(c):
        acc.extend([mpf(0)] * (len(c) - len(acc)))
    for i, v in enumerate(c):
        if v:
            acc[i] += scale * v


def _mul(a: Sequence, b: Sequence) -> list:
    out = [mpf(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        if x:
            for j, y in enumerate(b):
                out[i + j] += x * y
    return out


def _poly_derivs(coeffs: Sequence, g) -> list:
    """Values ``[P(g), P'(g), P''(g), P'''(g), ...]`` of a polynomial (high degree first)."""
    coeffs = list(coeffs)
    out = []
    while coeffs:
        acc = 0
        for c in coeffs:
            acc = acc * g + c
        out.append(acc)
        deg = len(coeffs) - 1
        coeffs = [c * (deg - i) for i, c in enumerate(coeffs[:-1])]
    return out


def _apply_theta_poly(derivs: Sequence, c: Sequence) -> list:
    """Apply ``R(theta)`` to ``x^g sum_p c_p L^p``, given ``R^(j)(g)`` values."""
    top = len(c) - 1
    out = []
    for r in range(top + 1):
        acc = mpf(0)
        for j in range(0, top - r + 1):
            if j < len(derivs) and c[r + j]:
                acc += comb(r + j, j) * derivs[j] * c[r + j]
        out.append(acc)
    return out


# ---------------------------------------------------------------------------
# the recursion


@dataclass(frozen=True)
class Resonance:
    """A loaded monomial on which ``P`` vanishes, and the log coefficient it produced."""

    index: GradeIndex
    grade: float
    log_coefficient: mpf


@dataclass(frozen=True)
class Expansion:
    """A truncated graded expansion ``A x^alpha (1 + sum c x^g (log x)^p)``."""

    problem: ExpansionProblem
    amplitude: mpf
    alpha: mpf
    generators: tuple
    coefficients: dict  # GradeIndex -> mpf (nonzero entries only)
    free_params: dict  # name -> value
    resonances: tuple
    max_grade: float
    dps: int
    next_grade: float = math.inf
    next_load: tuple = field(default=())
    tail: tuple = field(default=())  # (grade, load log-polynomial) of omitted grades

    @property
    def config(self) -> ProblemConfig:
        return self.problem.config

    def grade(self, index: GradeIndex):
        return self.problem.grade(index.k, index.l)

    def grade_float(self, index: GradeIndex) -> float:
        return float(self.grade(index))

    def coefficient(self, k: int, l: int, p: int = 0) -> mpf:
        return self.coefficients.get(GradeIndex(k, l, p), mpf(0))

    @property
    def max_log_power(self) -> int:
        return max((i.p for i in self.coefficients), default=0)

    @property
    def kernel(self) -> GradeIndex | None:
        kern = self.problem.kernel
        return GradeIndex(kern[0], kern[1], 0) if kern else None

    # -- term lists ------------------------------------------------------

    def terms(self) -> list[tuple[mpf, int, mpf]]:
        """``(exponent, log power, coefficient)`` of ``H`` including the leading term."""
        with mp.workdps(self.dps):
            out = [(self.alpha, 0, self.amplitude)]
            g1, g2 = self.generators
            for idx in sorted(self.coefficients, key=lambda i: (self.grade_float(i), i)):
                out.append((self.alpha + idx.k * g1 + idx.l * g2, idx.p, self.amplitude * self.coefficients[idx]))
        return out

    def evaluate(self, x, orders: int = 4, dps: int | None = None):
        """``(H, H', H'', H''')`` at ``x >= 0`` as floats, plus a truncation estimate.

        Summation is done in mpmath at the expansion's precision.  At ``x = 0``
        a derivative that diverges is returned as a signed infinity.
        """
        dps = dps or self.dps
        with mp.workdps(dps):
            values = self.evaluate_mp(x, orders)
            est = self.truncation_estimate(x)
        return tuple(float(v) if not isinstance(v, float) else v for v in values), est

    def evaluate_mp(self, x, orders: int = 4) -> list:
        """Derivatives ``0..orders-1`` of ``H`` at ``x`` in mpmath at the current precision."""
        terms = [(to_mp(a), p, to_mp(c)) for a, p, c in self.terms()]
        x = to_mp(x)
        return [_sum_terms(ts, x) for ts in _derivative_tables(terms, orders)]

    def evaluate_theta(self, x, orders: int = 3) -> list:
        """``theta^j F`` for ``F = H / x^alpha = A (1 + u)``, ``j = 0..orders-1``."""
        with mp.workdps(self.dps):
            x = to_mp(x)
            L = mpmath.log(x)
            g1, g2 = self.generators
            out = []
            for j in range(orders):
                acc = self.amplitude if j == 0 else mpf(0)
                for idx, c in self.coefficients.items():
                    g = idx.k * g1 + idx.l * g2
                    # theta^j (x^g L^p) = sum_i C(j,i) g^(j-i) (p)_i x^g L^(p-i)
                    for i in range(0, min(j, idx.p) + 1):
                        falling = math.perm(idx.p, i)
                        acc += self.amplitude * c * comb(j, i) * g ** (j - i) * falling * x**g * L ** (idx.p - i)
                out.append(acc)
            return [float(v) for v in out]

    def truncation_estimate(self, x, relative: bool = True) -> float:
        """Largest term in the top generator band ``(Gamma - max(g), Gamma]``.

        Relative to the leading term ``A x^alpha`` unless ``relative=False``.
        """
        if not self.coefficients:
            return 0.0
        with mp.workdps(self.dps):
            x = to_mp(x)
            if x == 0:
                return 0.0
            L = mpmath.log(x)
            band = max(float(g) for g in self.generators)
            worst = mpf(0)
            for idx, c in self.coefficients.items():
                g = self.grade_float(idx)
                if g > self.max_grade - band - 1e-12:
                    g_mp = idx.k * self.generators[0] + idx.l * self.generators[1]
                    worst = max(worst, abs(c * x**g_mp * L**idx.p))
            if not relative:
                worst *= abs(self.amplitude * x**self.alpha)
            return float(worst)

    # -- float rows (serialization contract) ------------------------------

    def rows(self) -> list[dict]:
        """Serialization rows ``{k, l, p, gamma, coefficient}`` sorted by grade."""
        out = []
        for idx in sorted(self.coefficients, key=lambda i: (self.grade_float(i), i)):
            g = self.grade(idx)
            out.append(
                {
                    "k": idx.k,
                    "l": idx.l,
                    "p": idx.p,
                    "gamma": format_number(g) if isinstance(g, Fraction) else repr(float(g)),
                    "coefficient": repr(float(self.coefficients[idx])),
                }
            )
        return out

    def header(self) -> dict:
        cfg = self.config
        alpha = self.problem.regime.alpha
        beta = self.problem.regime.beta
        return {
            "n": format_number(cfg.n),
            "theta": format_number(cfg.theta),
            "d": cfg.d,
            "regime": self.problem.regime.kind,
            "alpha": format_number(alpha) if isinstance(alpha, Fraction) else repr(float(alpha)),
            "beta": format_number(beta) if isinstance(beta, Fraction) else repr(float(beta)),
            "generators": [format_number(g) if isinstance(g, Fraction) else repr(float(g)) for g in self.problem.generators],
            "A": repr(float(self.amplitude)),
            "freeParams": {k: repr(float(v)) for k, v in sorted(self.free_params.items())},
            "maxGrade": repr(float(self.max_grade)),
            "resonances": [
                {"k": r.index.k, "l": r.index.l, "p": r.index.p, "logCoefficient": repr(float(r.log_coefficient))}
                for r in self.resonances
            ],
        }

    def to_json(self) -> str:
        return json.dumps({"header": self.header(), "rows": self.rows()}, indent=2, sort_keys=True) + "\n"

    def float_series(self) -> "FloatSeries":
        return FloatSeries.from_record(json.loads(self.to_json()))


def _derivative_tables(terms, orders):
    """Term lists of ``H, H', H'', ...`` using ``d/dx x^a L^p = a x^(a-1) L^p + p x^(a-1) L^(p-1)``."""
    tables = [terms]
    for _ in range(orders - 1):
        nxt = []
        for a, p, c in tables[-1]:
            if a != 0:
                nxt.append((a - 1, p, c * a))
            if p > 0:
                nxt.append((a - 1, p - 1, c * p))
        tables.append(nxt)
    return tables


def _sum_terms(terms, x):
    if x > 0:
        L = mpmath.log(x)
        return mpmath.fsum(c * x**a * L**p for a, p, c in terms)
    # x = 0: finite iff every surviving term has a > 0, or a == 0 with p == 0
    singular = [(a, p, c) for a, p, c in terms if c != 0 and (a < 0 or (a == 0 and p > 0))]
    if not singular:
        return mpmath.fsum(c for a, p, c in terms if a == 0 and p == 0)
    a_min = min(a for a, _, _ in singular)
    lead = [(p, c) for a, p, c in singular if a == a_min]
    p_max = max(p for p, _ in lead)
    c_lead = mpmath.fsum(c for p, c in lead if p == p_max)
    sign = mpmath.sign(c_lead) * (-1) ** p_max
    return math.inf if sign > 0 else -math.inf


def compute_coefficients(
    problem: ExpansionProblem,
    params: dict | None = None,
    max_grade=DEFAULT_MAX_GRADE,
    dps: int | None = None,
) -> Expansion:
    """Solve the graded recursion up to grade ``max_grade``.

    ``params`` may contain ``kappa`` (zero-angle, n < 3/2; default 1) and ``b``
    (kernel coefficient for the other regimes; default 0).
    """
    if not max_grade > 0:
        raise ValueError("max_grade must be positive")
    params = dict(params or {})
    dps = dps or default_dps()
    cfg = problem.config
    branch = cfg.branch
    with mp.workdps(dps):
        n = to_mp(cfg.n)
        g1, g2 = problem.generators_mp()
        if branch == ZERO_ANGLE_LOW:
            kappa = to_mp(params.get("kappa", 1))
            if not kappa > 0:
                raise ValueError("kappa must be positive")
            amplitude = kappa
            alpha = mpf(2)
            free = {"kappa": kappa}
        elif branch == NONZERO_ANGLE:
            amplitude = to_mp(cfg.theta)
            alpha = mpf(1)
            free = {"b": to_mp(params.get("b", 0))}
        else:
            alpha = 3 / n
            mu = alpha * (alpha - 1) * (2 - alpha)
            amplitude = mu ** (-1 / n)
            free = {"b": to_mp(params.get("b", 0))}
        a_neg_n = amplitude ** (-n)
        e = 1 - n
        dm1 = cfg.d - 1
        sigma_term = (n - 1) * mu if branch == ZERO_ANGLE_HIGH else 0
        P_coeffs = [mpf(c) for c in _indicial_coefficients(alpha, sigma_term)]
        r_coeffs = [mpf(1), 2 * alpha - 1, alpha * (alpha - 1)]
        s_coeffs = [mpf(1), alpha]
        exact_P = _indicial_coefficients(problem.regime.alpha, 0) if problem.exact else None

        lattice = problem.lattice(max_grade)
        u: dict[tuple[int, int], list] = {}
        w: dict[tuple[int, int], list] = {(0, 0): [mpf(1)]}
        f: dict[tuple[int, int], list] = {(0, 0): [mpf(1)]}
        r_cache: dict = {}
        s_cache: dict = {}
        resonances: list[Resonance] = []

        def grade_mp(k, l):
            return k * g1 + l * g2

        def theta_image(cache, coeffs, kl):
            if kl not in cache:
                cache[kl] = _apply_theta_poly(_poly_derivs(coeffs, grade_mp(*kl)), f.get(kl, [mpf(0)]))
            return cache[kl]

        def assemble(kl):
            """Load at monomial kl from strictly lower monomials, and the composite rest."""
            k, l = kl
            # composite f^e at kl, without the e*u[kl] contribution
            rest: list = [mpf(0)]
            deg = k + l
            for bk in range(k + 1):
                for bl in range(l + 1):
                    b = (bk, bl)
                    a = (k - bk, l - bl)
                    if b == (0, 0) or a == (0, 0):
                        continue
                    wb = bk + bl
                    _add_into(rest, _mul(w[a], u[b]), e * wb)
                    _add_into(rest, _mul(u[a], w[b]), -wb)
            rest = [v / deg for v in rest]
            load: list = [mpf(0)]
            for (sk, sl), weight in problem.source:
                if (sk, sl) == (0, 0):
                    _add_into(load, rest, a_neg_n * weight)
                    continue
                src = (k - sk, l - sl)
                if src[0] >= 0 and src[1] >= 0:
                    _add_into(load, w[src], a_neg_n * weight)
            if dm1:
                for i in range(1, k + 1):
                    _add_into(load, theta_image(r_cache, r_coeffs, (k - i, l)), dm1)
                for i in range(2, k + 1):
                    _add_into(load, theta_image(s_cache, s_coeffs, (k - i, l)), dm1 * (i - 1))
            return _trim(load), rest

        for kl in lattice:
            load, rest = assemble(kl)
            gamma = grade_mp(*kl)
            derivs = _poly_derivs(P_coeffs, gamma)
            if exact_P is not None:
                g_exact = problem.grade(*kl)
                p_zero = _poly_derivs(exact_P, g_exact)[0] == 0
            else:
                p_zero = derivs[0] == 0 or (problem.kernel == kl)
            loaded = any(v != 0 for v in load)
            if p_zero:
                c0 = free["b"] if problem.kernel == kl else mpf(0)
                coeff = [c0] + [mpf(0)] * len(load)
                if loaded:
                    if derivs[1] == 0:
                        raise SeriesError(f"double resonance at monomial {kl}")
                    top = len(load) - 1
                    for r in range(top, -1, -1):
                        acc = load[r]
                        for j in range(2, len(derivs)):
                            if r + j <= top + 1:
                                acc -= comb(r + j, j) * derivs[j] * coeff[r + j]
                        coeff[r + 1] = acc / ((r + 1) * derivs[1])
                    resonances.append(Resonance(GradeIndex(kl[0], kl[1], 1), float(gamma), coeff[1]))
            else:
                if loaded and abs(derivs[0]) < NEAR_RESONANCE * abs(derivs[1]):
                    raise NearResonanceError(
                        f"near-resonant grade {float(gamma)!r} at monomial {kl}; supply exact rational n"
                    )
                top = len(load) - 1
                coeff = [mpf(0)] * (top + 1)
                for r in range(top, -1, -1):
                    acc = load[r]
                    for j in range(1, top - r + 1):
                        if j < len(derivs):
                            acc -= comb(r + j, j) * derivs[j] * coeff[r + j]
                    coeff[r] = acc / derivs[0]
            coeff = _trim(coeff)
            u[kl] = coeff
            f[kl] = coeff
            w_kl = [v for v in rest]
            _add_into(w_kl, coeff, e)
            w[kl] = w_kl

        # Omitted monomials: with their coefficients set to zero, the load at
        # each one is exactly minus the truncated series' residual there.  One
        # generator band of them drives the residual-order prediction.
        band = max(float(g1), float(g2))
        tail_loads: dict = {}
        have = set(lattice)
        for kl in problem.lattice(max_grade + band):
            if kl in have:
                continue
            load, rest = assemble(kl)
            u[kl] = [mpf(0)]
            f[kl] = [mpf(0)]
            w[kl] = rest
            gamma = round(float(grade_mp(*kl)), 12)
            acc = tail_loads.setdefault(gamma, [mpf(0)])
            _add_into(acc, load)
        tail = tuple(
            (g, tuple(float(v) for v in _trim(c))) for g, c in sorted(tail_loads.items()) if any(v != 0 for v in c)
        )
        next_grade = min(tail_loads, default=math.inf)
        next_load = tuple(float(v) for v in _trim(tail_loads[next_grade])) if tail_loads else ()

        coefficients = {}
        for (k, l), coeff in u.items():
            for p, c in enumerate(coeff):
                if c != 0:
                    coefficients[GradeIndex(k, l, p)] = c
        return Expansion(
            problem=problem,
            amplitude=amplitude,
            alpha=alpha,
            generators=(g1, g2),
            coefficients=coefficients,
            free_params=free,
            resonances=tuple(resonances),
            max_grade=float(max_grade),
            dps=dps,
            next_grade=next_grade,
            next_load=next_load,
            tail=tail,
        )


def expand(config: ProblemConfig, params: dict | None = None, max_grade=DEFAULT_MAX_GRADE, dps: int | None = None) -> Expansion:
    """Convenience wrapper: build the problem and compute its coefficients."""
    return compute_coefficients(build_expansion_problem(config), params, max_grade, dps)


def detect_resonances(problem: ExpansionProblem, max_grade=DEFAULT_MAX_GRADE) -> list[GradeIndex]:
    """Loaded monomials with ``P = 0`` up to ``max_grade``, plus kernel monomials of equal grade."""
    expansion = compute_coefficients(problem, None, max_grade, dps=30)
    out: list[GradeIndex] = []
    for res in expansion.resonances:
        out.append(GradeIndex(res.index.k, res.index.l, 0))
    if out and problem.kernel is not None:
        kern = GradeIndex(problem.kernel[0], problem.kernel[1], 0)
        grades = {problem.grade(i.k, i.l) for i in out}
        if problem.grade(kern.k, kern.l) in grades and kern not in out:
            out.append(kern)
    return out


def scaling_check(first: Expansion, second: Expansion, rtol: float = 1e-12) -> bool:
    """Check the amplitude scaling law ``c * kappa^(n * weight)`` is invariant.

    For the one-dimensional low-mobility expansion each generator carries one
    factor ``kappa^(-n)`` (weight ``k + l``); in higher dimensions only the
    second generator does (weight ``l``).
    """
    if first.config != second.config:
        raise ValueError("scaling check needs identical configurations")
    if first.config.branch != ZERO_ANGLE_LOW:
        raise ValueError("scaling check applies to the zero-angle low-mobility branch")
    with mp.workdps(max(first.dps, second.dps)):
        n = to_mp(first.config.n)
        k1, k2 = first.free_params["kappa"], second.free_params["kappa"]
        keys = set(first.coefficients) | set(second.coefficients)
        for idx in keys:
            weight = idx.k + idx.l if first.config.d == 1 else idx.l
            a = first.coefficient(*idx) * k1 ** (n * weight)
            b = second.coefficient(*idx) * k2 ** (n * weight)
            if abs(a - b) > rtol * max(abs(a), abs(b)):
                return False
    return True


# ---------------------------------------------------------------------------
# serialized (float) expansions


@dataclass(frozen=True)
class FloatSeries:
    """A deserialized expansion evaluated in double precision.

    The same code path evaluates in-process and re-read series, so the two
    agree bit for bit.
    """

    header: dict
    alpha: float
    amplitude: float
    exponents: tuple
    powers: tuple
    coefficients: tuple

    @classmethod
    def from_record(cls, record: dict) -> "FloatSeries":
        header = record["header"]
        alpha = float(Fraction(header["alpha"])) if "/" in header["alpha"] else float(header["alpha"])
        rows = record["rows"]
        gammas = [float(Fraction(r["gamma"])) if "/" in r["gamma"] else float(r["gamma"]) for r in rows]
        return cls(
            header=header,
            alpha=alpha,
            amplitude=float(header["A"]),
            exponents=tuple(gammas),
            powers=tuple(int(r["p"]) for r in rows),
            coefficients=tuple(float(r["coefficient"]) for r in rows),
        )

    @classmethod
    def from_json(cls, text: str) -> "FloatSeries":
        return cls.from_record(json.loads(text))

    def config(self) -> ProblemConfig:
        h = self.header
        return ProblemConfig(parse_number(h["n"]), parse_number(h["theta"]), int(h["d"]))

    def evaluate(self, x: float) -> tuple[float, float, float, float]:
        """``(H, H', H'', H''')`` at ``x > 0`` in double precision."""
        L = math.log(x)
        out = [0.0, 0.0, 0.0, 0.0]
        terms = [(self.alpha, 0, 1.0)] + list(zip((self.alpha + g for g in self.exponents), self.powers, self.coefficients))
        for a, p, c in terms:
            poly = {p: c}  # log power -> coefficient of x^(a - order)
            for order in range(4):
                e = a - order
                out[order] += sum(cc * x**e * L**pp for pp, cc in poly.items())
                nxt: dict = {}
                for pp, cc in poly.items():
                    if e != 0:
                        nxt[pp] = nxt.get(pp, 0.0) + cc * e
                    if pp > 0:
                        nxt[pp - 1] = nxt.get(pp - 1, 0.0) + cc * pp
                poly = nxt
        return tuple(self.amplitude * v for v in out)


def float_evaluate(expansion: Expansion, x: float) -> tuple[float, float, float, float]:
    """Double-precision evaluation through the serialization contract."""
    return expansion.float_series().evaluate(x)
