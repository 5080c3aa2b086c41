"""Tests for the log-variable dynamical systems and their equilibrium spectra."""

from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfilm.dynsys import (
    HIGH_D_ZERO_HIGH,
    HIGH_D_ZERO_LOW,
    NONZERO_ANGLE_5D,
    ZERO_ANGLE_5D,
    DomainError,
    analyze_equilibrium,
    build_system,
    closed_form_spectrum,
    enumerate_vector_resonances,
    flow_in_s,
    nonzero_angle_spectrum,
    series_state,
    tangent_space_equations,
    unstable_eigenvectors,
)
from thinfilm.model import ProblemConfig
from thinfilm.series import expand

low_n = st.floats(0.05, 1.45)
high_n = st.floats(1.55, 2.95)
any_n = st.floats(0.05, 2.95)


def finite_difference_jacobian(system, y, h=1e-6):
    y = np.asarray(y, dtype=float)
    cols = []
    for i in range(y.size):
        e = np.zeros_like(y)
        e[i] = h
        cols.append((system.rhs(y + e) - system.rhs(y - e)) / (2 * h))
    return np.column_stack(cols)


# -- systems ------------------------------------------------------------------------


def test_variants():
    assert build_system(ProblemConfig(n=1)).variant == ZERO_ANGLE_5D
    assert build_system(ProblemConfig(n=1, theta=1)).variant == NONZERO_ANGLE_5D
    assert build_system(ProblemConfig(n=1, d=2)).variant == HIGH_D_ZERO_LOW
    high = build_system(ProblemConfig(n=2, d=3))
    assert high.variant == HIGH_D_ZERO_HIGH and high.dimension == 4


def test_rhs_examples():
    zero = build_system(ProblemConfig(n=1))
    assert np.all(zero.rhs(zero.equilibrium(1.0)) == 0)
    assert zero.rhs([1, 1, 1, 0, 0])[-1] == 0
    nonzero = build_system(ProblemConfig(n="17/10", theta=2))
    assert np.array_equal(nonzero.rhs([0, 0, 2, 0, 1]), [0, 0, 0, 1, 0])
    with pytest.raises(DomainError):
        nonzero.rhs([0, 0, 0, 0, 0])


@pytest.mark.parametrize(
    "cfg", [ProblemConfig(n=0.7), ProblemConfig(n=1.3, theta=0.6), ProblemConfig(n=0.9, d=3), ProblemConfig(n=2.2, d=2)]
)
def test_equilibrium_is_stationary(cfg):
    system = build_system(cfg)
    assert np.linalg.norm(system.rhs(system.equilibrium(0.8 if cfg.branch != "nonzero-angle" else None))) <= 1e-14


@given(st.sampled_from(["low", "nonzero", "low-d", "high-d"]), any_n, st.floats(0.2, 3.0), st.integers(0, 2**31 - 1))
@settings(max_examples=40, deadline=None)
def test_jacobian_matches_finite_differences(kind, n, amp, seed):
    rng = np.random.default_rng(seed)
    if kind == "low":
        cfg = ProblemConfig(n=min(n, 1.45))
    elif kind == "nonzero":
        cfg = ProblemConfig(n=n, theta=amp)
    elif kind == "low-d":
        cfg = ProblemConfig(n=min(n, 1.45), d=2)
    else:
        cfg = ProblemConfig(n=max(n, 1.55), d=3)
    system = build_system(cfg)
    y = rng.uniform(-0.3, 0.3, system.dimension)
    y[system.f_index] = amp
    if system.dimension == 5:
        y[0] = abs(y[0])
    exact = system.jacobian(y)
    approx = finite_difference_jacobian(system, y)
    assert np.allclose(exact, approx, rtol=1e-6, atol=1e-6)


# -- spectra ---------------------------------------------------------------------------


def test_spectrum_examples():
    report = analyze_equilibrium(build_system(ProblemConfig(n=1)), 1.0)
    assert sorted(report.eigenvalues) == pytest.approx([-2, -1, 0, 1, 2], abs=1e-12)
    assert report.dims == (2, 1, 2)
    report = analyze_equilibrium(build_system(ProblemConfig(n=2, theta=1)))
    assert sorted(report.eigenvalues) == pytest.approx([-1, 0, 1, 1, 1], abs=1e-12)
    assert not report.diagonalizable
    (lam, sizes), *_ = report.jordan_blocks
    assert lam == pytest.approx(1.0) and sorted(sizes) == [1, 2]
    report = analyze_equilibrium(build_system(ProblemConfig(n=1, theta=1)))
    assert sorted(report.eigenvalues) == pytest.approx([-1, 0, 1, 1, 2], abs=1e-12)
    assert report.diagonalizable


@given(st.sampled_from(["low", "nonzero", "low-d", "high-d"]), any_n, st.floats(0.1, 10.0))
@settings(max_examples=80, deadline=None)
def test_spectrum_matches_closed_form(kind, n, amp):
    if kind in ("low", "low-d"):
        n = min(n, 1.45)
    elif kind == "high-d":
        n = max(n, 1.55)
    cfg = {
        "low": lambda: ProblemConfig(n=n),
        "nonzero": lambda: ProblemConfig(n=n, theta=amp),
        "low-d": lambda: ProblemConfig(n=n, d=2),
        "high-d": lambda: ProblemConfig(n=n, d=3),
    }[kind]()
    report = analyze_equilibrium(build_system(cfg), amp if kind != "nonzero" else None)
    assert np.max(np.abs(np.array(report.eigenvalues) - closed_form_spectrum(cfg))) <= 1e-10
    assert sum(report.dims) == report.system.dimension
    residuals = [np.linalg.norm(report.jacobian @ v - lam * v) for lam, v in report.eigenvectors]
    assert max(residuals) <= 1e-10


@pytest.mark.parametrize("n", ["19/10", "199/100", "2", "201/100", "5/2"])
def test_jordan_block_only_at_two(n):
    report = analyze_equilibrium(build_system(ProblemConfig(n=n, theta=1)))
    assert report.diagonalizable == (n != "2")


# -- eigenvectors ------------------------------------------------------------------------


def test_zero_angle_eigenvectors_n1():
    ev = unstable_eigenvectors(analyze_equilibrium(build_system(ProblemConfig(n=1)), 1.0))
    assert ev.labels == ("V1", "V2")
    assert ev.vectors[0] == pytest.approx([6, 0, 0.25, 0.5, 1], abs=1e-12)
    assert ev.vectors[1] == pytest.approx([0, -6, 1, 1, 1], abs=1e-12)


@given(low_n.filter(lambda n: abs(n - 1.25) > 1e-3 and abs(n - 1) > 1e-3), st.floats(0.1, 10))
@settings(max_examples=40, deadline=None)
def test_zero_angle_eigenvectors_proportional_to_closed_form(n, kappa):
    report = analyze_equilibrium(build_system(ProblemConfig(n=n)), kappa)
    ev = unstable_eigenvectors(report)
    for lam, v, ref in zip(ev.eigenvalues, ev.vectors, ev.closed_forms):
        assert np.linalg.norm(report.jacobian @ v - lam * v) <= 1e-10 * max(1, np.linalg.norm(v))
        assert v == pytest.approx(ref, rel=1e-10, abs=1e-10)


@given(any_n.filter(lambda n: abs(n - 2) > 1e-3), st.floats(0.1, 10))
@settings(max_examples=40, deadline=None)
def test_nonzero_angle_eigenvectors(n, theta):
    report = analyze_equilibrium(build_system(ProblemConfig(n=n, theta=theta)))
    ev = unstable_eigenvectors(report)
    assert ev.vectors[0] == pytest.approx([1, 0, 0, 0, 0], abs=1e-12)
    for v, ref in zip(ev.vectors, ev.closed_forms):
        assert v == pytest.approx(ref, rel=1e-10, abs=1e-10)


def test_nonzero_angle_jordan_chain_n2():
    theta = 1.7
    report = analyze_equilibrium(build_system(ProblemConfig(n=2, theta=theta)))
    ev = unstable_eigenvectors(report)
    v2 = ev.vectors[ev.labels.index("V2")]
    A = report.jacobian - np.eye(5)
    assert ev.generalized[ev.labels.index("V2")]
    assert v2 == pytest.approx([0, 2 * theta, 2, 1, 0], abs=1e-10)
    assert np.linalg.norm(A @ A @ v2) <= 1e-10
    assert np.linalg.norm(A @ v2) > 1e-3


# -- tangent relations -----------------------------------------------------------------------


@pytest.mark.parametrize(
    "n,theta,dF,d2F",
    [
        (1, 1, (0, -1 / 6, 1), None),
        (2, 1, (0, -0.5, 1), (0, -1, 1)),
    ],
)
def test_tangent_relations_examples(n, theta, dF, d2F):
    rel = tangent_space_equations(analyze_equilibrium(build_system(ProblemConfig(n=n, theta=theta))))
    assert rel.dF == pytest.approx(dF, abs=1e-10)
    if d2F is not None:
        assert rel.d2F == pytest.approx(d2F, abs=1e-10)


@given(any_n, st.floats(0.2, 5))
@settings(max_examples=40, deadline=None)
def test_tangent_relations_closed_form(n, theta):
    rel = tangent_space_equations(analyze_equilibrium(build_system(ProblemConfig(n=n, theta=theta))))
    dF, d2F = rel.closed_form(n)
    assert rel.dF == pytest.approx(dF, rel=1e-10, abs=1e-10)
    assert rel.d2F == pytest.approx(d2F, rel=1e-10, abs=1e-10)


# -- vector resonances --------------------------------------------------------------------------


def test_vector_resonances_five_halves():
    found = enumerate_vector_resonances(nonzero_angle_spectrum(Fraction(5, 2)), 4)
    assert found == [((0, 2, 0), 1), ((0, 2, 0), 3)]


def test_vector_resonances_generic_empty():
    assert enumerate_vector_resonances(nonzero_angle_spectrum(1.7), 6) == []


def test_vector_resonances_n1_second_family():
    found = enumerate_vector_resonances(nonzero_angle_spectrum(Fraction(1)), 2)
    assert found == [((0, 0, 2), 2), ((1, 0, 1), 2), ((2, 0, 0), 2)]


def brute_force(lam, order):
    out = set()
    for q1 in range(order + 1):
        for q2 in range(order + 1):
            for q3 in range(order + 1):
                if 2 <= q1 + q2 + q3 <= order:
                    dot = q1 * lam[0] + q2 * lam[1] + q3 * lam[2]
                    for k in range(3):
                        if dot == lam[k]:
                            out.add(((q1, q2, q3), k + 1))
    return out


@given(st.fractions(Fraction(1, 20), Fraction(59, 20), max_denominator=20), st.integers(2, 6))
@settings(max_examples=60, deadline=None)
def test_vector_resonances_brute_force_and_symmetry(n, order):
    lam = nonzero_angle_spectrum(n)
    found = enumerate_vector_resonances(lam, order)
    assert set(found) == brute_force(lam, order)
    swapped = {((q[2], q[1], q[0]), {1: 3, 3: 1}.get(k, k)) for q, k in found}
    assert swapped == set(found)


def test_vector_resonances_rejects_low_order():
    with pytest.raises(ValueError):
        enumerate_vector_resonances((1, 2, 1), 1)


# -- flows -----------------------------------------------------------------------------------------


def test_flow_constant_at_equilibrium():
    system = build_system(ProblemConfig(n=1.2))
    p = system.equilibrium(1.0)
    traj = flow_in_s(system, p, (0.0, 5.0), dense_points=11)
    assert traj.status == "completed"
    assert np.all(traj.y == p)


def test_flow_follows_series():
    cfg = ProblemConfig(n=1.2)
    system = build_system(cfg)
    expansion = expand(cfg, {"kappa": 1}, max_grade=12)
    s0, s1 = np.log(1e-4), np.log(1e-2)
    traj = flow_in_s(system, series_state(expansion, 1e-4, system), (s0, s1), dense_points=9)
    assert traj.status == "completed"
    gaps = []
    for s, y in zip(traj.s, traj.y):
        ref = series_state(expansion, float(np.exp(s)), system)
        gaps.append(np.max(np.abs(y - ref) / np.maximum(np.abs(ref), 1e-300)))
    assert max(gaps) <= 1e-8


def test_reversed_flow_approaches_centre_line():
    # a point on the unstable manifold (read off the series) flows back to the
    # centre line; stable modes would be amplified, so none are excited
    cfg = ProblemConfig(n=1.2)
    system = build_system(cfg)
    expansion = expand(cfg, {"kappa": 0.7}, max_grade=12)
    y0 = series_state(expansion, 1e-2, system)
    traj = flow_in_s(system, y0, (np.log(1e-2), np.log(1e-6)), dense_points=9)
    norms = [np.linalg.norm(np.delete(y, 2)) for y in traj.y]
    assert traj.status == "completed"
    assert all(b < a for a, b in zip(norms, norms[1:]))
    # the slowest mode decays like x^(3-2n): four decades give a factor 10^-2.4
    assert norms[-1] < 1e-2 * norms[0]
    assert traj.y[-1] == pytest.approx(series_state(expansion, 1e-6, system), rel=1e-6, abs=1e-8)


def test_flow_rejects_nonpositive_f():
    system = build_system(ProblemConfig(n=1.2))
    with pytest.raises(DomainError):
        flow_in_s(system, [0, 0, 0, 0, 0], (0, 1))


def test_analyze_to_dict_fields():
    record = analyze_equilibrium(build_system(ProblemConfig(n=2, theta=1))).to_dict()
    assert set(record) >= {"variant", "n", "theta_or_kappa", "eigenvalues", "jordan_blocks", "dims", "eigenvectors"}
    assert record["dims"] == {"s": 1, "c": 1, "u": 3}
