"""Tests for the graded contact-line expansion engine."""

from __future__ import annotations

import json
import math
from collections import defaultdict
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfilm.dynsys import analyze_equilibrium, build_system, closed_form_eigenvectors, unstable_eigenvectors
from thinfilm.model import ProblemConfig
from thinfilm.series import (
    FloatSeries,
    GradeIndex,
    NearResonanceError,
    build_expansion_problem,
    compute_coefficients,
    default_dps,
    detect_resonances,
    expand,
    float_evaluate,
    scaling_check,
)


def by_grade(expansion, p=0) -> dict:
    """Coefficients with log power ``p`` summed over monomials of equal grade."""
    out: dict = defaultdict(float)
    for idx, c in expansion.coefficients.items():
        if idx.p == p:
            out[round(expansion.grade_float(idx), 12)] += float(c)
    return dict(out)


# -- problem set-up -------------------------------------------------------------


def test_problem_low_n1():
    problem = build_expansion_problem(ProblemConfig(n=1))
    assert problem.generators == (2, 1)
    for g in (0.3, 1.7, -2.5):
        assert problem.indicial(g) == pytest.approx(g * (g + 1) * (g + 2), abs=1e-14)
    assert dict(problem.source) == {(1, 0): 1, (0, 1): -1}


def test_problem_nonzero_five_halves():
    problem = build_expansion_problem(ProblemConfig(n="5/2", theta=1))
    assert problem.generators == (1, Fraction(1, 2))
    for g in (0.3, 1.7, -2.5):
        assert problem.indicial(g) == pytest.approx(g**3 - g, abs=1e-14)
    # x^{1/2}(-1 + x): the (0,1) and (1,1) monomials
    assert dict(problem.source) == {(1, 1): 1, (0, 1): -1}


def test_problem_high_n2_d2():
    problem = build_expansion_problem(ProblemConfig(n=2, d=2))
    assert problem.corrections
    beta = (math.sqrt(13) - 1) / 4
    for g in (0.1, 0.9, beta):
        expected = (g + 1.5) * (g + 0.5) * (g - 0.5) - 3 / 8
        assert problem.indicial(g) == pytest.approx(expected, abs=1e-14)
    assert abs(problem.indicial(beta)) <= 1e-12


@given(st.floats(0.05, 2.95).filter(lambda n: abs(n - 1.5) > 1e-3), st.integers(1, 3))
@settings(max_examples=40, deadline=None)
def test_lattice_ordered_and_well_founded(n, d):
    problem = build_expansion_problem(ProblemConfig(n=n, d=d))
    lattice = problem.lattice(4.0)
    grades = [float(problem.grade(*kl)) for kl in lattice]
    assert grades == sorted(grades)
    assert all(0 < g <= 4.0 + 1e-12 for g in grades)
    position = {kl: i for i, kl in enumerate(lattice)}
    # every proper sub-monomial precedes its super-monomial
    for (k, l), i in position.items():
        for kl in ((k - 1, l), (k, l - 1)):
            if kl in position:
                assert position[kl] < i


# -- coefficients -------------------------------------------------------------------


def test_smyth_hill_coefficients():
    expansion = expand(ProblemConfig(n=1), {"kappa": 1})
    grades = {g: c for g, c in by_grade(expansion).items() if c != 0}
    assert grades == pytest.approx({1.0: -1 / 6, 2.0: 1 / 24}, abs=1e-40)
    assert expansion.max_log_power == 0


def test_five_halves_coefficients():
    expansion = expand(ProblemConfig(n="5/2", theta=1), {"b": 0})
    assert expansion.coefficient(0, 1, 0) == pytest.approx(mpmath.mpf(8) / 3, rel=1e-40)
    assert expansion.coefficient(0, 2, 1) == pytest.approx(2, rel=1e-40)
    assert [r.index for r in expansion.resonances] == [GradeIndex(0, 2, 1)]


def off_ladder(n: float) -> bool:
    """Float ``n`` away from every resonant ``3 - 1/m`` (those need exact input)."""
    return all(abs(n - (3 - 1 / m)) > 1e-3 for m in range(1, 1000))


@given(
    st.floats(0.05, 2.95).filter(lambda n: off_ladder(n) and abs(n - 1) > 1e-3),
    st.floats(0.2, 5.0),
    st.floats(-3.0, 3.0),
)
@settings(max_examples=40, deadline=None)
def test_generic_nonzero_low_order(n, theta, b):
    expansion = expand(ProblemConfig(n=n, theta=theta), {"b": b}, max_grade=4.5)
    beta_coeff = -(theta**-n) / ((2 - n) * (3 - n) * (4 - n))
    mixed = theta**-n * (1 - (1 - n) * b) / ((3 - n) * (4 - n) * (5 - n))
    assert float(expansion.coefficient(0, 1)) == pytest.approx(beta_coeff, rel=1e-12)
    assert float(expansion.coefficient(1, 1)) == pytest.approx(mixed, rel=1e-12, abs=1e-14)
    assert float(expansion.coefficient(1, 0)) == pytest.approx(b, abs=1e-15)


@pytest.mark.parametrize("theta", [Fraction(1, 10), Fraction(1), Fraction(3)])
def test_n1_nonzero_terminates_as_polynomial(theta):
    b = (1 - 3 * theta) / (6 * theta)
    expansion = expand(ProblemConfig(n=1, theta=theta), {"b": b}, max_grade=10)
    grades = {g: c for g, c in by_grade(expansion).items() if abs(c) > 1e-40}
    t = float(theta)
    assert grades == pytest.approx({1.0: float(b), 2.0: -1 / (6 * t), 3.0: 1 / (24 * t)}, rel=1e-14)


def test_stored_indices_invariants():
    for cfg, params in [
        (ProblemConfig(n="6/5"), {"kappa": 0.7}),
        (ProblemConfig(n="17/10", theta=1), {"b": 0.3}),
        (ProblemConfig(n="5/2", theta=2), {"b": -1}),
        (ProblemConfig(n=2), {"b": 0.2}),
        (ProblemConfig(n="4/5", d=3), {"kappa": 1}),
    ]:
        expansion = expand(cfg, params, max_grade=6)
        assert GradeIndex(0, 0, 0) not in expansion.coefficients
        assert all(expansion.grade_float(i) <= 6 + 1e-12 for i in expansion.coefficients)
        if cfg.branch != "nonzero-angle" or cfg.n != Fraction(5, 2):
            assert expansion.max_log_power == 0, cfg
        else:
            first = min(r.grade for r in expansion.resonances)
            for idx in expansion.coefficients:
                if idx.p:
                    # logs appear only from the resonant grade on; products of
                    # lower log terms bound the power by the grade itself
                    g = expansion.grade_float(idx)
                    assert g >= first - 1e-12 and idx.p <= math.floor(g + 1e-12)


@given(st.floats(0.05, 1.45), st.integers(2, 3))
@settings(max_examples=20, deadline=None)
def test_higher_dimension_low_is_log_free(n, d):
    assert expand(ProblemConfig(n=n, d=d), {"kappa": 1}, max_grade=8).max_log_power == 0


@given(st.floats(-5, 5), st.floats(-1, 1).filter(lambda s: abs(s) > 1e-6))
@settings(max_examples=30, deadline=None)
def test_kernel_freedom(b, shift):
    cfg = ProblemConfig(n="5/2", theta=1)
    base = expand(cfg, {"b": b}, max_grade=3)
    moved = expand(cfg, {"b": b + shift}, max_grade=3)
    assert float(moved.coefficient(1, 0) - base.coefficient(1, 0)) == pytest.approx(shift, abs=1e-14)
    for idx, c in base.coefficients.items():
        if base.grade_float(idx) < 1:
            assert moved.coefficients[idx] == c


@pytest.mark.parametrize("n", ["1/2", "1", "13/10"])
def test_first_order_coefficients_match_eigenvectors(n):
    cfg = ProblemConfig(n=n)
    expansion = expand(cfg, {"kappa": 1})
    vectors = closed_form_eigenvectors(cfg, 1.0)
    V1, V2 = vectors["V1"], vectors["V2"]
    assert float(expansion.coefficient(1, 0)) == pytest.approx(V1[2] / V1[0], rel=1e-12)
    assert float(expansion.coefficient(0, 1)) == pytest.approx(V2[2] / V2[1], rel=1e-12)
    # the numerically computed eigenvectors give the same ratios
    numeric = unstable_eigenvectors(analyze_equilibrium(build_system(cfg), 1.0))
    W1, W2 = numeric.vectors
    assert float(expansion.coefficient(1, 0)) == pytest.approx(W1[2] / W1[0], rel=1e-12)
    assert float(expansion.coefficient(0, 1)) == pytest.approx(W2[2] / W2[1], rel=1e-12)


# -- resonances ------------------------------------------------------------------------


def test_detect_resonances_examples():
    res = detect_resonances(build_expansion_problem(ProblemConfig(n=2, theta=1)))
    assert {(i.k, i.l) for i in res} == {(0, 1), (1, 0)}
    res = detect_resonances(build_expansion_problem(ProblemConfig(n="5/2", theta=1)))
    assert {(i.k, i.l) for i in res} == {(0, 2), (1, 0)}
    assert detect_resonances(build_expansion_problem(ProblemConfig(n="17/10", theta=1)), 10) == []


@pytest.mark.parametrize("m", [1, 2, 3, 4, 10])
def test_resonant_grade_is_reached_by_power_m(m):
    res = detect_resonances(build_expansion_problem(ProblemConfig(n=3 - Fraction(1, m), theta=1)), 1.5)
    assert (0, m) in {(i.k, i.l) for i in res}


def test_near_resonance_guard():
    with pytest.raises(NearResonanceError):
        expand(ProblemConfig(n=2.5 + 1e-11, theta=1), {"b": 0}, max_grade=2)


# -- evaluation -------------------------------------------------------------------------


def test_evaluate_contact_line_limit():
    expansion = expand(ProblemConfig(n="17/10", theta=2), {"b": 0.5})
    (H, dH, _, _), _ = expansion.evaluate(1e-14)
    assert H == pytest.approx(2e-14, rel=1e-10)
    assert dH == pytest.approx(2.0, rel=1e-10)


def test_evaluate_smyth_hill_at_centre():
    expansion = expand(ProblemConfig(n=1), {"kappa": Fraction(1, 6)})
    (H, dH, d2H, d3H), est = expansion.evaluate(1.0)
    assert H == pytest.approx(1 / 24, abs=1e-15)
    assert dH == pytest.approx(0.0, abs=1e-15)
    assert d3H == pytest.approx(0.0, abs=1e-15)


def test_evaluate_curvature_at_contact_line():
    expansion = expand(ProblemConfig(n=1, theta=1), {"b": Fraction(-1, 3)})
    (_, _, d2H, _), _ = expansion.evaluate(0.0)
    assert d2H == pytest.approx(-2 / 3, abs=1e-15)


def test_evaluate_singular_third_derivative_is_signed_infinity():
    expansion = expand(ProblemConfig(n="6/5"), {"kappa": 1})
    (H, _, _, d3H), _ = expansion.evaluate(0.0)
    assert H == 0.0 and math.isinf(d3H)


# -- scaling -------------------------------------------------------------------------------


def test_scaling_check_examples():
    cfg = ProblemConfig(n="6/5")
    a = expand(cfg, {"kappa": 0.5})
    b = expand(cfg, {"kappa": 2})
    assert scaling_check(a, a)
    assert scaling_check(a, b)
    key = next(iter(a.coefficients))
    tampered = dict(a.coefficients)
    tampered[key] = tampered[key] * (1 + mpmath.mpf("1e-6"))
    from dataclasses import replace

    assert not scaling_check(replace(a, coefficients=tampered), b)


@given(st.floats(0.1, 1.4), st.floats(0.05, 20), st.floats(0.05, 20), st.integers(1, 3))
@settings(max_examples=25, deadline=None)
def test_scaling_law_property(n, k1, k2, d):
    cfg = ProblemConfig(n=n, d=d)
    assert scaling_check(expand(cfg, {"kappa": k1}, 5), expand(cfg, {"kappa": k2}, 5))


# -- serialization ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "cfg,params",
    [
        (ProblemConfig(n="5/2", theta=1), {"b": 0.25}),
        (ProblemConfig(n=1.2), {"kappa": 0.5}),
        (ProblemConfig(n=2.2), {"b": -0.3}),
    ],
)
def test_round_trip_bit_exact(cfg, params):
    expansion = expand(cfg, params)
    text = expansion.to_json()
    reread = FloatSeries.from_json(text)
    again = FloatSeries.from_json(json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n")
    for x in (1e-5, 3e-4, 1e-3, 0.02):
        assert reread.evaluate(x) == float_evaluate(expansion, x) == again.evaluate(x)
    for row in json.loads(text)["rows"]:
        idx = GradeIndex(row["k"], row["l"], row["p"])
        assert float(row["coefficient"]) == float(expansion.coefficients[idx])
    assert reread.config() == cfg


def test_round_trip_agrees_with_extended_evaluation():
    expansion = expand(ProblemConfig(n="6/5"), {"kappa": 0.5})
    values, _ = expansion.evaluate(1e-3)
    assert FloatSeries.from_json(expansion.to_json()).evaluate(1e-3) == pytest.approx(values, rel=1e-13)


def test_precision_environment(monkeypatch):
    monkeypatch.setenv("THINFILM_PRECISION", "double")
    assert default_dps() == 15
    monkeypatch.setenv("THINFILM_PRECISION", "extended")
    assert default_dps() >= 34
    monkeypatch.setenv("THINFILM_PRECISION", "quad")
    with pytest.raises(ValueError):
        default_dps()


def test_compute_rejects_bad_grade():
    with pytest.raises(ValueError):
        compute_coefficients(build_expansion_problem(ProblemConfig(n=1)), None, 0)
