"""Autonomous systems in the logarithmic variable ``s = log x`` and their spectra.

Near the contact line the profile ODE becomes autonomous after setting
``s = log x``, rescaling ``F = H / x^alpha`` and promoting the powers of ``x``
that appear in the equation to extra state variables.  Four systems are
covered:

``zero-angle-5d``     ``(x1, x2, F, F', F'')`` with ``x1 = x^(4-2n)``, ``x2 = x^(3-2n)``,
                      ``F = H/x^2`` (theta = 0, n < 3/2, d = 1)
``nonzero-angle-5d``  ``(x1, x2, F, F', F'')`` with ``x1 = x``, ``x2 = x^(3-n)``, ``F = H/x``
``high-d-zero-low``   ``(x1, x2, F, F', F'')`` with ``x1 = x``, ``x2 = x^(3-2n)``, ``F = H/x^2``
                      (theta = 0, n < 3/2, d >= 2)
``high-d-zero-high``  ``(x, F, F', F'')`` with ``F = H / (mu^(-1/n) x^(3/n))`` (theta = 0, n > 3/2)

Primes on ``F`` are derivatives in ``s``.  Jacobians are closed forms.  All
four Jacobians at the equilibrium are block lower-triangular: a diagonal block
for the ``x`` variables and a companion block for ``(F, F', F'')``, so the
spectrum is read off from the diagonal plus the roots of one cubic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np
from scipy import linalg
from scipy.integrate import solve_ivp

from .model import NONZERO_ANGLE, ZERO_ANGLE_HIGH, ZERO_ANGLE_LOW, ProblemConfig, high_mobility_mu, high_mobility_roots

ZERO_ANGLE_5D = "zero-angle-5d"
NONZERO_ANGLE_5D = "nonzero-angle-5d"
HIGH_D_ZERO_LOW = "high-d-zero-low"
HIGH_D_ZERO_HIGH = "high-d-zero-high"

#: eigenvalues closer than this are treated as one cluster
CLUSTER_TOL = 1e-9
#: |Re lambda| below this counts as a center direction
CENTER_TOL = 1e-10


class DomainError(ValueError):
    """State outside the domain F > 0 where a negative power is needed."""


@dataclass(frozen=True)
class AutonomousSystem:
    """One of the four log-variable systems for a fixed configuration."""

    config: ProblemConfig
    variant: str
    labels: tuple

    @property
    def dimension(self) -> int:
        return len(self.labels)

    @property
    def f_index(self) -> int:
        """Position of ``F`` in the state vector."""
        return self.dimension - 3

    def _params(self):
        n = float(self.config.n)
        return n, self.config.d - 1

    def rhs(self, state) -> np.ndarray:
        """Velocity ``dy/ds`` at ``state``."""
        y = np.asarray(state, dtype=float)
        n, dm1 = self._params()
        F, Fp, Fpp = y[-3:]
        if F <= 0:
            raise DomainError(f"F = {F!r} <= 0")
        Fpow = math.exp((1.0 - n) * math.log(F))  # F^(1-n)
        if self.variant == ZERO_ANGLE_5D:
            x1, x2 = y[0], y[1]
            third = (x1 - x2) * Fpow - 3 * Fpp - 2 * Fp
            return np.array([(4 - 2 * n) * x1, (3 - 2 * n) * x2, Fp, Fpp, third])
        if self.variant == NONZERO_ANGLE_5D:
            x1, x2 = y[0], y[1]
            third = x2 * (x1 - 1) * Fpow + Fp
            return np.array([x1, (3 - n) * x2, Fp, Fpp, third])
        if self.variant == HIGH_D_ZERO_LOW:
            x1, x2 = y[0], y[1]
            a = x1 / (1 - x1)
            third = (
                (x1 * x2 - x2) * Fpow
                - 3 * Fpp
                - 2 * Fp
                + dm1 * a * (Fpp + 3 * Fp + 2 * F)
                + dm1 * a * a * (Fp + 2 * F)
            )
            return np.array([x1, (3 - 2 * n) * x2, Fp, Fpp, third])
        x = y[0]
        al = 3.0 / n
        mu = al * (al - 1) * (2 - al)
        a = x / (1 - x)
        third = (
            mu * (-1 + x) * Fpow
            - 3 * (al - 1) * Fpp
            - (3 * al * al - 6 * al + 2) * Fp
            + mu * F
            + dm1 * a * (Fpp + (2 * al - 1) * Fp + al * (al - 1) * F)
            + dm1 * a * a * (Fp + al * F)
        )
        return np.array([x, Fp, Fpp, third])

    def __call__(self, s, y):
        return self.rhs(y)

    def jacobian(self, state) -> np.ndarray:
        """Closed-form Jacobian of :meth:`rhs`."""
        y = np.asarray(state, dtype=float)
        n, dm1 = self._params()
        F, Fp, Fpp = y[-3:]
        if F <= 0:
            raise DomainError(f"F = {F!r} <= 0")
        Fpow = math.exp((1.0 - n) * math.log(F))
        dFpow = (1.0 - n) * Fpow / F  # d/dF F^(1-n)
        dim = self.dimension
        J = np.zeros((dim, dim))
        i = dim - 3
        J[i, i + 1] = 1.0
        J[i + 1, i + 2] = 1.0
        last = dim - 1
        if self.variant == ZERO_ANGLE_5D:
            x1, x2 = y[0], y[1]
            J[0, 0] = 4 - 2 * n
            J[1, 1] = 3 - 2 * n
            J[last] = [Fpow, -Fpow, (x1 - x2) * dFpow, -2.0, -3.0]
        elif self.variant == NONZERO_ANGLE_5D:
            x1, x2 = y[0], y[1]
            J[0, 0] = 1.0
            J[1, 1] = 3 - n
            J[last] = [x2 * Fpow, (x1 - 1) * Fpow, x2 * (x1 - 1) * dFpow, 1.0, 0.0]
        elif self.variant == HIGH_D_ZERO_LOW:
            x1, x2 = y[0], y[1]
            a = x1 / (1 - x1)
            da = 1.0 / (1 - x1) ** 2
            J[0, 0] = 1.0
            J[1, 1] = 3 - 2 * n
            J[last] = [
                x2 * Fpow + dm1 * da * (Fpp + 3 * Fp + 2 * F) + dm1 * 2 * a * da * (Fp + 2 * F),
                (x1 - 1) * Fpow,
                (x1 * x2 - x2) * dFpow + dm1 * (2 * a + 2 * a * a),
                -2.0 + dm1 * (3 * a + a * a),
                -3.0 + dm1 * a,
            ]
        else:
            x = y[0]
            al = 3.0 / n
            mu = al * (al - 1) * (2 - al)
            a = x / (1 - x)
            da = 1.0 / (1 - x) ** 2
            J[0, 0] = 1.0
            J[last] = [
                mu * Fpow
                + dm1 * da * (Fpp + (2 * al - 1) * Fp + al * (al - 1) * F)
                + dm1 * 2 * a * da * (Fp + al * F),
                mu * (-1 + x) * dFpow + mu + dm1 * a * al * (al - 1) + dm1 * a * a * al,
                -(3 * al * al - 6 * al + 2) + dm1 * a * (2 * al - 1) + dm1 * a * a,
                -3 * (al - 1) + dm1 * a,
            ]
        return J

    def equilibrium(self, amplitude: float | None = None) -> np.ndarray:
        """``p = (0, .., 0, amplitude, 0, 0)``; the 4-d system is normalised to ``F = 1``."""
        if self.variant == HIGH_D_ZERO_HIGH:
            return np.array([0.0, 1.0, 0.0, 0.0])
        if amplitude is None:
            amplitude = float(self.config.theta) if self.variant == NONZERO_ANGLE_5D else 1.0
        if not amplitude > 0:
            raise ValueError("amplitude must be positive")
        return np.array([0.0, 0.0, float(amplitude), 0.0, 0.0])


def build_system(config: ProblemConfig) -> AutonomousSystem:
    """Pick the log-variable system matching the configuration's branch."""
    if config.branch == NONZERO_ANGLE:
        return AutonomousSystem(config, NONZERO_ANGLE_5D, ("x1", "x2", "F", "F'", "F''"))
    if config.branch == ZERO_ANGLE_LOW:
        variant = ZERO_ANGLE_5D if config.d == 1 else HIGH_D_ZERO_LOW
        return AutonomousSystem(config, variant, ("x1", "x2", "F", "F'", "F''"))
    return AutonomousSystem(config, HIGH_D_ZERO_HIGH, ("x", "F", "F'", "F''"))


# ---------------------------------------------------------------------------
# spectral analysis


@dataclass(frozen=True)
class EquilibriumReport:
    system: AutonomousSystem
    amplitude: float
    point: np.ndarray
    jacobian: np.ndarray
    eigenvalues: tuple
    jordan_blocks: tuple  # (eigenvalue, block sizes) for every cluster
    dims: tuple  # (stable, center, unstable)
    eigenvectors: tuple = field(default=())  # (eigenvalue, vector) pairs, one per geometric direction

    @property
    def variant(self) -> str:
        return self.system.variant

    @property
    def diagonalizable(self) -> bool:
        return all(max(sizes) == 1 for _, sizes in self.jordan_blocks)

    def to_dict(self) -> dict:
        cfg = self.system.config
        from .model import format_number

        return {
            "variant": self.variant,
            "n": format_number(cfg.n),
            "d": cfg.d,
            "theta_or_kappa": repr(float(self.amplitude)),
            "eigenvalues": [_r(v) for v in self.eigenvalues],
            "jordan_blocks": [{"eigenvalue": _r(v), "sizes": list(s)} for v, s in self.jordan_blocks],
            "dims": {"s": self.dims[0], "c": self.dims[1], "u": self.dims[2]},
            "eigenvectors": [[_r(c) for c in vec] for _, vec in self.eigenvectors],
        }


def _r(v: float) -> float:
    """Round-trip-safe float with -0.0 folded to 0.0 for stable output."""
    v = float(v)
    return 0.0 if v == 0 else v


def _cubic_roots(a2: float, a1: float, a0: float) -> list[float]:
    """Real roots of ``z^3 - a2 z^2 - a1 z - a0`` polished by Newton steps."""
    coeffs = [1.0, -a2, -a1, -a0]
    roots = []
    for z in np.roots(coeffs):
        z = float(np.real(z))
        for _ in range(6):
            p = ((z - a2) * z - a1) * z - a0
            dp = (3 * z - 2 * a2) * z - a1
            if dp == 0:
                break
            step = p / dp
            z -= step
            if abs(step) < 1e-17 * max(1.0, abs(z)):
                break
        roots.append(z)
    return sorted(roots, reverse=True)


def _structured_eigenvalues(J: np.ndarray) -> list[float]:
    """Eigenvalues from the block lower-triangular structure of the Jacobian."""
    dim = J.shape[0]
    m = dim - 3
    if np.any(J[:m, m:] != 0) or np.any(J[:m, :m] != np.diag(np.diag(J[:m, :m]))):
        raise ValueError("Jacobian is not block lower-triangular with a diagonal x-block")
    block = J[m:, m:]
    if not (block[0, 1] == 1 and block[1, 2] == 1 and block[0, 0] == 0 and block[0, 2] == 0 and block[1, 0] == 0 and block[1, 1] == 0):
        raise ValueError("F-block is not a companion matrix")
    a0, a1, a2 = block[2]
    return list(np.diag(J[:m, :m])) + _cubic_roots(a2, a1, a0)


def _rank(M: np.ndarray, tol: float = 1e-8) -> int:
    s = linalg.svdvals(M)
    return int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))


def _clusters(values: list[float]) -> list[tuple[float, int]]:
    out: list[list[float]] = []
    for v in sorted(values, reverse=True):
        if out and abs(out[-1][0] - v) <= CLUSTER_TOL:
            out[-1].append(v)
        else:
            out.append([v])
    return [(float(np.mean(c)), len(c)) for c in out]


def _jordan_sizes(J: np.ndarray, lam: float, mult: int) -> tuple:
    """Jordan block sizes for ``lam`` from the ranks of ``(J - lam I)^k``."""
    dim = J.shape[0]
    A = J - lam * np.eye(dim)
    ranks = [dim]
    Ak = np.eye(dim)
    for _ in range(mult):
        Ak = Ak @ A
        ranks.append(_rank(Ak))
    at_least = [ranks[k - 1] - ranks[k] for k in range(1, mult + 1)]  # blocks of size >= k
    sizes = []
    for k in range(1, mult + 1):
        exactly = at_least[k - 1] - (at_least[k] if k < mult else 0)
        sizes.extend([k] * exactly)
    return tuple(sorted(sizes, reverse=True))


def analyze_equilibrium(system: AutonomousSystem, amplitude: float | None = None) -> EquilibriumReport:
    """Jacobian, spectrum, Jordan structure and invariant-subspace dimensions at ``p``."""
    point = system.equilibrium(amplitude)
    amp = float(point[system.f_index]) if system.variant != HIGH_D_ZERO_HIGH else float(
        high_mobility_mu(float(system.config.n)) ** (-1.0 / float(system.config.n))
    )
    J = system.jacobian(point)
    eigenvalues = _structured_eigenvalues(J)
    blocks = []
    vectors = []
    for lam, mult in _clusters(eigenvalues):
        sizes = _jordan_sizes(J, lam, mult) if mult > 1 else (1,)
        blocks.append((lam, sizes))
        basis = linalg.null_space(J - lam * np.eye(J.shape[0]), rcond=1e-9)
        for col in basis.T:
            vectors.append((lam, col / col[np.argmax(np.abs(col))]))
    stable = sum(1 for v in eigenvalues if v < -CENTER_TOL)
    unstable = sum(1 for v in eigenvalues if v > CENTER_TOL)
    center = len(eigenvalues) - stable - unstable
    return EquilibriumReport(
        system=system,
        amplitude=amp,
        point=point,
        jacobian=J,
        eigenvalues=tuple(float(v) for v in eigenvalues),
        jordan_blocks=tuple(blocks),
        dims=(stable, center, unstable),
        eigenvectors=tuple(vectors),
    )


def closed_form_spectrum(config: ProblemConfig) -> list[float]:
    """Reference eigenvalues of the variant, in the report's ordering."""
    n = float(config.n)
    if config.branch == NONZERO_ANGLE:
        return [1.0, 3 - n, 1.0, 0.0, -1.0]
    if config.branch == ZERO_ANGLE_LOW:
        first = 4 - 2 * n if config.d == 1 else 1.0
        return [first, 3 - 2 * n, 0.0, -1.0, -2.0]
    beta, alpha_neg = high_mobility_roots(n)
    return [1.0] + sorted([beta, -1.0, alpha_neg], reverse=True)


# ---------------------------------------------------------------------------
# unstable eigenvectors with the conventional normalisations


@dataclass(frozen=True)
class EigenvectorSet:
    """Unstable eigenvectors (or a Jordan chain) with reference forms where known."""

    eigenvalues: tuple
    vectors: tuple
    labels: tuple
    closed_forms: tuple  # reference vectors or None
    generalized: tuple  # True where the vector is a generalized eigenvector
    verified: bool


def closed_form_eigenvectors(config: ProblemConfig, amplitude: float) -> dict:
    """Reference unstable eigenvectors keyed by label, when a closed form is known."""
    n = float(config.n)
    if config.branch == ZERO_ANGLE_LOW and config.d == 1:
        kap = amplitude ** (n - 1)
        return {
            "V1": np.array([-(n - 2) * (2 * n - 5) * (n - 3) * kap, 0.0, 0.25, (2 - n) / 2, (n - 2) ** 2]),
            "V2": np.array([0.0, 2 * (2 * n - 3) * (n - 2) * (2 * n - 5) * kap, 1.0, 3 - 2 * n, (2 * n - 3) ** 2]),
        }
    if config.branch == NONZERO_ANGLE:
        th = amplitude ** (n - 1)
        out = {"V1": np.array([1.0, 0, 0, 0, 0]), "V3": np.array([0.0, 0, 1, 1, 1])}
        if n == 2:
            out["V2"] = np.array([0.0, 2 * amplitude, 2, 1, 0])
        else:
            out["V2"] = np.array([0.0, (n - 2) * (n - 3) * (n - 4) * th, 1, 3 - n, (3 - n) ** 2])
        return out
    if config.branch == ZERO_ANGLE_HIGH:
        beta, _ = high_mobility_roots(n)
        d = config.d
        return {
            "V1": np.array([2 * (3 - n) * n / ((d + 1) * n - 3), 1, 1, 1]),
            "V2": np.array([0.0, 1 / beta**2, 1 / beta, 1]),
        }
    return {}


def _normalise(v: np.ndarray, index: int, value: float) -> np.ndarray:
    if abs(v[index]) < 1e-300:
        raise ValueError("cannot normalise on a vanishing component")
    return v * (value / v[index])


def _combo(basis: np.ndarray, zero_at: list[int]) -> np.ndarray:
    """A nonzero vector in span(basis columns) with the listed components zero."""
    ns = linalg.null_space(basis[zero_at, :], rcond=1e-12)
    if ns.shape[1] != 1:
        raise ValueError("constraint does not single out one direction")
    return basis @ ns[:, 0]


def unstable_eigenvectors(report: EquilibriumReport) -> EigenvectorSet:
    """Unstable eigenvectors normalised like the closed forms.

    Zero angle (d = 1): ``V1`` (eigenvalue ``4-2n``) with third component 1/4
    and ``V2`` (eigenvalue ``3-2n``) with third component 1.  Nonzero angle:
    ``V1 = e1``, ``V3 = (0,0,1,1,1)`` and ``V2`` with third component 1; at
    ``n = 2`` ``V2`` is the generalized vector with ``(A - I) V2 = -V3`` and
    vanishing first and last components, scaled to second component ``2 theta``.
    The four-dimensional system uses last component 1.
    """
    J = report.jacobian
    dim = J.shape[0]
    cfg = report.system.config
    amp = report.amplitude
    refs = closed_form_eigenvectors(cfg, amp)
    variant = report.variant
    vals, vecs, labels, gen = [], [], [], []

    def eig_basis(lam):
        return linalg.null_space(J - lam * np.eye(dim), rcond=1e-9)

    unstable = [lam for lam, _ in report.jordan_blocks if lam > CENTER_TOL]
    if variant == ZERO_ANGLE_5D:
        n = float(cfg.n)
        for label, lam, norm in (("V1", 4 - 2 * n, 0.25), ("V2", 3 - 2 * n, 1.0)):
            lam_num = min(unstable, key=lambda v: abs(v - lam))
            v = _normalise(eig_basis(lam_num)[:, 0], 2, norm)
            vals.append(lam_num), vecs.append(v), labels.append(label), gen.append(False)
    elif variant == NONZERO_ANGLE_5D:
        n = float(cfg.n)
        one = min(unstable, key=lambda v: abs(v - 1.0))
        basis = eig_basis(one)
        v1 = _normalise(_combo(basis, [2]), 0, 1.0)
        v3 = _normalise(_combo(basis, [0]), 2, 1.0)
        sizes = dict(report.jordan_blocks)[one]
        if max(sizes) > 1:
            A = J - one * np.eye(dim)
            gbasis = linalg.null_space(A @ A, rcond=1e-9)
            v2 = _normalise(_combo(gbasis, [0, dim - 1]), 1, 2 * amp)
            lam2, is_gen = one, True
        else:
            lam2 = min(unstable, key=lambda v: abs(v - (3 - n)))
            v2 = _normalise(eig_basis(lam2)[:, 0], 2, 1.0)
            is_gen = False
        for label, lam, v, g in (("V1", one, v1, False), ("V2", lam2, v2, is_gen), ("V3", one, v3, False)):
            vals.append(lam), vecs.append(v), labels.append(label), gen.append(g)
    elif variant == HIGH_D_ZERO_HIGH:
        beta, _ = high_mobility_roots(float(cfg.n))
        for label, lam in (("V1", 1.0), ("V2", beta)):
            lam_num = min(unstable, key=lambda v: abs(v - lam))
            v = _normalise(eig_basis(lam_num)[:, 0], dim - 1, 1.0)
            vals.append(lam_num), vecs.append(v), labels.append(label), gen.append(False)
    else:
        for i, lam in enumerate(sorted(unstable, reverse=True), 1):
            v = _normalise(eig_basis(lam)[:, 0], 2, 1.0)
            vals.append(lam), vecs.append(v), labels.append(f"V{i}"), gen.append(False)
    closed = tuple(refs.get(label) for label in labels)
    return EigenvectorSet(
        eigenvalues=tuple(vals),
        vectors=tuple(vecs),
        labels=tuple(labels),
        closed_forms=closed,
        generalized=tuple(gen),
        verified=bool(refs),
    )


@dataclass(frozen=True)
class TangentRelations:
    """``F' = a . (x1, x2, F - theta)`` and ``F'' = b . (x1, x2, F - theta)``."""

    theta: float
    dF: tuple
    d2F: tuple

    def closed_form(self, n: float) -> tuple:
        th = self.theta
        return (
            (0.0, -(th ** (1 - n)) / ((n - 3) * (n - 4)), 1.0),
            (0.0, th ** (1 - n) / (n - 3), 1.0),
        )


def tangent_space_equations(report: EquilibriumReport) -> TangentRelations:
    """Affine relations describing the unstable (generalized) eigenspace at ``p_theta``."""
    if report.variant != NONZERO_ANGLE_5D:
        raise ValueError("tangent-space relations are defined for the nonzero-angle system")
    ev = unstable_eigenvectors(report)
    U = np.column_stack(ev.vectors)  # 5 x 3
    M = U[3:5] @ np.linalg.inv(U[0:3])
    return TangentRelations(theta=report.amplitude, dF=tuple(M[0]), d2F=tuple(M[1]))


# ---------------------------------------------------------------------------
# vector resonances of the three-dimensional unstable flow


def nonzero_angle_spectrum(n) -> tuple:
    """``Lambda = (1, 3 - n, 1)``, exact when ``n`` is a Fraction."""
    if isinstance(n, Fraction):
        return (Fraction(1), 3 - n, Fraction(1))
    return (1.0, 3.0 - float(n), 1.0)


def enumerate_vector_resonances(eigenvalues, max_order: int, tol: float = 1e-12) -> list[tuple[tuple, int]]:
    """All ``(q, k)`` with ``q`` in N0^3, ``2 <= |q| <= max_order`` and ``q . Lambda = lambda_k``.

    ``k`` is 1-based.  Exact arithmetic is used when all eigenvalues are
    Fractions; otherwise the comparison uses ``tol``.
    """
    if max_order < 2:
        raise ValueError("max_order must be at least 2")
    lam = tuple(eigenvalues)
    exact = all(isinstance(v, Fraction) for v in lam)
    out = []
    for q in product(range(max_order + 1), repeat=len(lam)):
        if not 2 <= sum(q) <= max_order:
            continue
        dot = sum(qi * li for qi, li in zip(q, lam))
        for k, lk in enumerate(lam, 1):
            if (dot == lk) if exact else abs(float(dot) - float(lk)) <= tol:
                out.append((q, k))
    return sorted(out)


# ---------------------------------------------------------------------------
# trajectories in s


@dataclass(frozen=True)
class Trajectory:
    s: np.ndarray
    y: np.ndarray
    status: str  # "completed" | "F<=0" | "blow-up" | "failed"


def flow_in_s(system: AutonomousSystem, initial_state, s_range, rtol: float = 1e-12, atol: float | None = None,
              dense_points: int = 0, blowup: float = 1e8) -> Trajectory:
    """Integrate the autonomous system in ``s`` (forward or backward).

    The default absolute tolerance is ``1e-3 * rtol`` times each component of
    the initial state, so components that start tiny are still resolved.
    """
    y0 = np.asarray(initial_state, dtype=float)
    if atol is None:
        atol = np.maximum(1e-3 * rtol * np.abs(y0), 1e-300)
    fi = system.f_index
    if y0[fi] <= 0:
        raise DomainError("initial state must have F > 0")

    def positivity(s, y):
        return y[fi] - 1e-12

    positivity.terminal = True
    positivity.direction = -1

    def explosion(s, y):
        return blowup - np.max(np.abs(y))

    explosion.terminal = True

    def rhs(s, y):
        if y[fi] <= 0:
            return np.zeros_like(y)
        return system.rhs(y)

    s0, s1 = s_range
    t_eval = np.linspace(s0, s1, dense_points) if dense_points else None
    sol = solve_ivp(rhs, (s0, s1), y0, method="DOP853", rtol=rtol, atol=atol, events=(positivity, explosion),
                    t_eval=t_eval)
    if sol.status == 1:
        status = "F<=0" if sol.t_events[0].size else "blow-up"
    elif sol.status == 0:
        status = "completed"
    else:
        status = "failed"
    return Trajectory(s=sol.t, y=sol.y.T, status=status)


def series_state(expansion, x: float, system: AutonomousSystem) -> np.ndarray:
    """State of ``system`` at ``s = log x`` read off a series expansion."""
    n = float(system.config.n)
    F = expansion.evaluate_theta(x, 3)
    if system.variant == ZERO_ANGLE_5D:
        return np.array([x ** (4 - 2 * n), x ** (3 - 2 * n), *F])
    if system.variant == NONZERO_ANGLE_5D:
        return np.array([x, x ** (3 - n), *F])
    if system.variant == HIGH_D_ZERO_LOW:
        return np.array([x, x ** (3 - 2 * n), *F])
    amp = float(expansion.amplitude)
    return np.array([x, *(v / amp for v in F)])
