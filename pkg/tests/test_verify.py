"""Tests for residuals, overlaps, the log-term probe, scans and the verification gate."""

from __future__ import annotations

import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thinfilm.model import ProblemConfig
from thinfilm.series import expand
from thinfilm.shoot import explicit_solution, shoot, solve_bvp
from thinfilm.verify import (
    OVERLAP_TOL,
    SLOPE_TOL,
    VerificationError,
    dyadic_grid,
    log_slope,
    log_term_probe,
    match_overlap,
    residual,
    series_overlap_with_parameter,
    tampered,
    uniqueness_scan,
    validity_window,
    verify_all,
)


@pytest.fixture(scope="module")
def smyth_hill():
    return solve_bvp(ProblemConfig(n=1))


@pytest.fixture(scope="module")
def five_halves():
    return solve_bvp(ProblemConfig(n="5/2", theta=1))


# -- residuals -------------------------------------------------------------------------


def test_dyadic_grid():
    grid = dyadic_grid()
    assert grid.size >= 8
    assert grid[0] >= 1e-6 and grid[-1] <= 1e-2
    assert np.allclose(grid[1:] / grid[:-1], 2.0)


@given(st.floats(-5, 5), st.floats(0.1, 100), st.floats(1e-8, 1e-4), st.integers(8, 40))
def test_log_slope_recovers_power(power, scale, lo, count):
    x = np.geomspace(lo, 1e-2, count)
    slope, fit = log_slope(x, -scale * x**power)
    assert slope == pytest.approx(power, abs=1e-9)
    assert fit < 1e-9


def test_exact_solution_residual():
    for theta in (0.0, 0.1, 1.0, 3.0):
        assert residual(explicit_solution(1, theta)).max_norm <= 1e-12


def test_expansion_residual_order_n12():
    expansion = expand(ProblemConfig(n="6/5"), {"kappa": 1}, max_grade=6)
    report = residual(expansion)
    assert abs(report.slope - report.predicted_slope) <= SLOPE_TOL
    # raising the truncation raises the observed decay rate
    finer = residual(expand(ProblemConfig(n="6/5"), {"kappa": 1}, max_grade=8))
    assert finer.slope > report.slope + 1.0


@pytest.mark.parametrize(
    "cfg,params",
    [
        (ProblemConfig(n="1/2"), {"kappa": 1}),
        (ProblemConfig(n="17/10", theta=1), {"b": 0.5}),
        (ProblemConfig(n="5/2", theta=1), {"b": 0}),
        (ProblemConfig(n=2), {"b": 0}),
        (ProblemConfig(n="4/5", d=2), {"kappa": 1}),
    ],
)
def test_residual_slope_within_window(cfg, params):
    expansion = expand(cfg, params, 8.0, dps=60)
    lo, hi = validity_window(expansion, tol=1e-8)
    report = residual(expansion, grid=dyadic_grid(lo, hi))
    assert report.grid.size >= 8
    assert abs(report.slope - report.predicted_slope) <= SLOPE_TOL


def test_profile_residual_and_tampering(smyth_hill):
    profile = smyth_hill.profile
    assert residual(profile).max_norm <= 1e-8
    bumped = tampered(profile, len(profile.x) // 2, 1e-6)
    assert residual(bumped).max_norm > 1e-7


def test_residual_rejects_nonpositive_height():
    # kappa x^2 - x^3/6 + x^4/24 turns negative near x = 0.1 for kappa = 0.01
    expansion = expand(ProblemConfig(n=1), {"kappa": Fraction(1, 100)})
    with pytest.raises(VerificationError):
        residual(expansion, grid=[0.05, 0.1])


# -- overlap --------------------------------------------------------------------------------


def test_overlap_smyth_hill():
    profile = shoot(ProblemConfig(n=1), 1 / 6).profile
    assert match_overlap(expand(ProblemConfig(n=1), {"kappa": Fraction(1, 6)}), profile) <= 1e-10


def test_overlap_five_halves(five_halves):
    reference = expand(ProblemConfig(n="5/2", theta=1), {"b": five_halves.value}, 16.0)
    assert match_overlap(reference, five_halves.profile) <= OVERLAP_TOL
    assert series_overlap_with_parameter(five_halves.config, five_halves.profile, 0.1) > 1e-3


def test_overlap_rejects_bad_window(smyth_hill):
    with pytest.raises(VerificationError):
        match_overlap(smyth_hill.profile.expansion, smyth_hill.profile, window=(1e-6, 1e-3))
    with pytest.raises(VerificationError):
        match_overlap(expand(ProblemConfig(n="6/5"), {"kappa": 1}), smyth_hill.profile)


# -- log-term probe ----------------------------------------------------------------------------


def test_probe_five_halves(five_halves):
    probe = log_term_probe(five_halves.config, five_halves.profile)
    assert abs(abs(probe.coefficient) - 2.0) <= 0.02 * 2.0
    assert probe.coefficient > 0 and probe.series_value == pytest.approx(2.0)
    assert probe.condition <= 1e10


def test_probe_nonresonant_vanishes():
    cfg = ProblemConfig(n="17/10", theta=1)
    probe = log_term_probe(cfg, solve_bvp(cfg).profile)
    assert abs(probe.coefficient) <= 1e-6


def test_probe_n2_matches_series():
    cfg = ProblemConfig(n=2, theta=1)
    probe = log_term_probe(cfg, solve_bvp(cfg).profile)
    assert probe.series_value == pytest.approx(-0.5, rel=1e-12)
    assert abs(probe.coefficient - probe.series_value) <= 0.02 * abs(probe.series_value)


def test_probe_eight_thirds_matches_series():
    cfg = ProblemConfig(n="8/3", theta=1)
    # the grade-1/3 ladder converges slowly; the fit needs a deeper window
    probe = log_term_probe(cfg, solve_bvp(cfg).profile, window=(1e-7, 1e-5))
    assert abs(probe.coefficient - probe.series_value) <= 0.02 * abs(probe.series_value)


def test_probe_rejects_zero_angle(smyth_hill):
    with pytest.raises(VerificationError):
        log_term_probe(ProblemConfig(n=1), smyth_hill.profile)


# -- uniqueness scans -----------------------------------------------------------------------------


def test_scan_n1_nonzero():
    cfg = ProblemConfig(n=1, theta=1)
    result = uniqueness_scan(cfg, np.linspace(-2, 2, 41))
    assert result.sign_changes == 1
    merits = np.array(result.merits)
    i = int(np.flatnonzero(np.diff(np.sign(merits)))[0])
    assert result.grid[i] <= -1 / 3 <= result.grid[i + 1]


def test_scan_kappa_n12():
    assert uniqueness_scan(ProblemConfig(n="6/5"), jobs=2).sign_changes == 1


def test_scan_five_halves():
    assert uniqueness_scan(ProblemConfig(n="5/2", theta=1), np.linspace(-10, 10, 41)).sign_changes == 1


def test_scan_rejects_higher_dimension():
    with pytest.raises(VerificationError):
        uniqueness_scan(ProblemConfig(n=1, d=2))


# -- the gate --------------------------------------------------------------------------------------


@pytest.mark.parametrize(
    "cfg",
    [ProblemConfig(n=1), ProblemConfig(n="6/5"), ProblemConfig(n="5/2", theta=1), ProblemConfig(n="4/5", d=2)],
)
def test_verify_all_passes(cfg):
    report = verify_all(cfg)
    record = report.to_dict()
    assert report.passed, record
    assert set(record) == {"checks", "pass"}
    for check in record["checks"]:
        assert set(check) == {"name", "status", "value", "tolerance"}
    json.dumps(record)
    names = [c["name"] for c in record["checks"]]
    assert names[:3] == ["spectrum", "series-residual-slope", "manifold-flow"]
    if cfg.d == 1:
        assert {"bvp-converged", "profile-residual", "overlap"} <= set(names)
        assert ("monotone" in names) == cfg.zero_angle


def test_verify_all_reports_values_finite():
    record = verify_all(ProblemConfig(n=1, theta=1)).to_dict()
    for check in record["checks"]:
        if check["value"] is not None:
            assert math.isfinite(check["value"])
