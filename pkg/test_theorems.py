#!/usr/bin/env python3
"""
Test script for the geodesic checks: logarithm bound, crossings, column multiples,
the diagonal obstruction, the local existence probe and membership diagnostics
"""

import math

import numpy as np
import pytest

from config import ProbeSettings
from src.geodesics.theorems import (
    bch_log_bound_check,
    bch_random_trials,
    column_multiple_check,
    crossing_factorization_check,
    hopf_rinow_probe,
    hopf_rinow_radius_sweep,
    obstruction_gap,
    random_antihermitian,
    unique_lift_check,
    unitary_membership_diagnostic,
)
from src.linalg.core import AntiHermitianOp, UnitaryMatrix, exp_antihermitian, spectral_norm
from src.linalg.errors import HypothesisNotMetError, InvalidInputError, WindowError
from src.operators.factory import TruncationSpec, build_b, build_z2


@pytest.fixture(scope="module")
def z2_16():
    return build_z2(TruncationSpec(16))


def crossing_time(z):
    return math.log(2.0) / (16.0 * spectral_norm(z))


def test_bch_bound_trivial_cases():
    zero = np.zeros((3, 3))
    assert bch_log_bound_check(zero, zero)["verdict"] == "pass"
    a = random_antihermitian(np.random.default_rng(1), 4, 0.1)
    report = bch_log_bound_check(a, -a)
    assert report["params"]["log_norm"] == pytest.approx(0.0, abs=1e-14)
    assert report["params"]["bound"] > 0


def test_bch_bound_window():
    a = random_antihermitian(np.random.default_rng(2), 3, 0.2)
    with pytest.raises(WindowError):
        bch_log_bound_check(a, a)


def test_bch_random_trials():
    report = bch_random_trials(8, trials=100, max_norm=0.05, seed=42)
    assert report["verdict"] == "pass"
    assert report["params"]["min_margin"] >= -1e-10


def test_random_antihermitian_has_requested_norm():
    a = random_antihermitian(np.random.default_rng(3), 6, 0.05, zero_diagonal=True)
    assert spectral_norm(a) == pytest.approx(0.05)
    assert np.all(np.diag(a) == 0)


def test_crossing_same_lift(z2_16):
    t1 = crossing_time(z2_16)
    report = crossing_factorization_check(z2_16, z2_16, t1, t1)
    assert report["verdict"] == "pass"
    assert np.max(np.abs(report["params"]["d_diagonal"])) <= 1e-12


def test_crossing_scalar_shift(z2_16):
    t1 = crossing_time(z2_16)
    shifted = AntiHermitianOp(z2_16.entries + 0.3j * np.eye(16))
    report = crossing_factorization_check(z2_16, shifted, t1, t1)
    assert report["verdict"] == "pass"
    assert report["residuals"]["d_offdiagonal"]["value"] <= 1e-9
    assert report["residuals"]["norm_equality"]["value"] <= 1e-9


def test_crossing_detects_endpoint_mismatch(z2_16):
    t1 = crossing_time(z2_16)
    perturbed = np.array(z2_16.entries)
    perturbed[1, 2] += 1e-3j
    perturbed[2, 1] += 1e-3j
    with pytest.raises(HypothesisNotMetError):
        crossing_factorization_check(z2_16, AntiHermitianOp(perturbed), t1, t1)


def test_crossing_window(z2_16):
    with pytest.raises(WindowError):
        crossing_factorization_check(z2_16, z2_16, 1.0, 1.0)


def test_column_multiple_cases(z2_16):
    t0 = crossing_time(z2_16)
    assert column_multiple_check(z2_16, z2_16, t0, t0, 1)["verdict"] == "pass"

    s0 = t0 / 2
    rescaled = AntiHermitianOp((t0 / s0) * z2_16.entries)
    report = column_multiple_check(z2_16, rescaled, t0, s0, 1)
    assert report["verdict"] == "pass"
    assert report["residuals"]["column"]["value"] <= 1e-9
    assert report["params"]["sphere_agreement"]["verdict"] == "pass"

    bumped = np.array(rescaled.entries)
    bumped[1, 0] += 1e-3j
    bumped[0, 1] += 1e-3j
    failed = column_multiple_check(z2_16, AntiHermitianOp(bumped), t0, s0, 1)
    assert failed["verdict"] == "fail"
    assert failed["residuals"]["column"]["value"] > 1e-9


def test_obstruction_on_z2():
    z2 = build_z2(TruncationSpec(128))
    norm_z = spectral_norm(z2)
    grid = np.linspace(0.0, math.pi / (2 * norm_z), 21)[1:]
    report = obstruction_gap(z2, crossing_time(z2), grid)
    assert report["verdict"] == "pass"
    assert report["params"]["obstruction_present"]
    assert min(report["params"]["ratios"]) >= 0.9


def test_obstruction_deviation_scales_with_t0_over_s0():
    z2 = build_z2(TruncationSpec(128))
    t0 = crossing_time(z2)
    grid = np.linspace(0.0, math.pi / (2 * spectral_norm(z2)), 11)[1:]
    report = obstruction_gap(z2, t0, grid)
    scaled = [d * s0 / t0 for d, s0 in zip(report["params"]["deviations"], grid)]
    assert max(scaled) <= 1.01 * min(scaled)
    assert min(scaled) > 0.0


def test_obstruction_control_and_errors(z2_16):
    off = z2_16.entries - np.diag(np.diag(z2_16.entries))
    constant = AntiHermitianOp(off + 0.5j * np.eye(16))
    t0 = crossing_time(constant)
    grid = [0.1, 0.2, 0.3]
    report = obstruction_gap(constant, t0, grid, control=True)
    assert report["verdict"] == "pass"
    assert not report["params"]["obstruction_present"]
    assert max(report["params"]["deviations"]) <= 1e-6
    with pytest.raises(HypothesisNotMetError):
        obstruction_gap(constant, t0, grid)
    with pytest.raises(WindowError):
        obstruction_gap(z2_16, 10.0, grid)


def test_probe_zero():
    z_star, report = hopf_rinow_probe(AntiHermitianOp(np.zeros((4, 4))), build_b(4))
    assert spectral_norm(z_star) == 0.0
    assert report["verdict"] == "pass"


def test_hopf_rinow_random_targets():
    rng = np.random.default_rng(20240917)
    b = build_b(16)
    for _ in range(10):
        k = AntiHermitianOp(random_antihermitian(rng, 16, 0.05, zero_diagonal=True))
        z_star, report = hopf_rinow_probe(k, b)
        assert report["residuals"]["endpoint"]["value"] <= 1e-8
        assert report["residuals"]["minimality_witness"]["value"] <= 1e-5
        e_k = exp_antihermitian(k).entries
        e_z = exp_antihermitian(z_star).entries
        target = e_k @ b.matrix() @ e_k.conj().T
        assert spectral_norm(e_z @ b.matrix() @ e_z.conj().T - target) <= 1e-8


def test_probe_rejects_bad_input():
    b = build_b(4)
    with pytest.raises(InvalidInputError):
        hopf_rinow_probe(AntiHermitianOp(np.diag([0.1j, 0, 0, 0])), b)
    k = AntiHermitianOp(random_antihermitian(np.random.default_rng(0), 4, 0.5, zero_diagonal=True))
    with pytest.raises(WindowError):
        hopf_rinow_probe(k, b, ProbeSettings(radius=0.1))


def test_radius_sweep_reports_largest_radius():
    report = hopf_rinow_radius_sweep(build_b(6), [0.02, 0.01], trials=2, seed=3)
    assert [row["radius"] for row in report["params"]["radii"]] == [0.01, 0.02]
    assert report["verdict"] == "pass"
    assert report["params"]["largest_radius"] == 0.02


def test_unique_lift(z2_16):
    b = build_b(16)
    assert unique_lift_check(z2_16, z2_16, b)["verdict"] == "pass"
    noisy = np.array(z2_16.entries)
    noisy[3, 5] += 1e-3j
    noisy[5, 3] += 1e-3j
    report = unique_lift_check(z2_16, AntiHermitianOp(noisy), b)
    assert report["verdict"] == "inconclusive"
    assert not report["params"]["velocity_match"]


def test_membership_scalar():
    report = unitary_membership_diagnostic(UnitaryMatrix(np.exp(1j * math.pi / 3) * np.eye(8)))
    assert report["params"]["theta"] == pytest.approx(math.pi / 3)
    assert report["residuals"]["tail"]["value"] <= 1e-15
    assert report["verdict"] == "pass"


def test_membership_fails_for_alternating_phases():
    signs = np.where(np.arange(32) % 2 == 0, 1.0, -1.0)
    report = unitary_membership_diagnostic(UnitaryMatrix(np.diag(np.exp(1j * signs))))
    assert report["verdict"] == "fail"
    assert report["params"]["theta"] == pytest.approx(0.0, abs=1e-12)
    assert report["residuals"]["tail"]["value"] == pytest.approx(2.0 * math.sin(0.5), rel=1e-12)
    assert not report["params"]["member_like"]


def test_membership_of_constructed_unitary():
    z2 = build_z2(TruncationSpec(128)).entries
    off = z2 - np.diag(np.diag(z2))
    u = UnitaryMatrix(exp_antihermitian(off, 0.1).entries * np.exp(0.2j))
    report = unitary_membership_diagnostic(u)
    assert report["verdict"] == "pass"
    assert report["params"]["theta"] == pytest.approx(0.2, abs=1e-6)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
