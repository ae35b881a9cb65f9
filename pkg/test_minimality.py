#!/usr/bin/env python3
"""
Test script for minimality: certificates and the quotient norm solver
"""

import numpy as np
import pytest

from config import SolverSettings
from src.linalg.core import column, spectral_norm
from src.linalg.errors import DegenerateColumnError, SizeError
from src.minimality.certificates import (
    CERTIFIED,
    NOT_CERTIFIED,
    certify_minimal,
    minimizing_diagonal_formula,
    sain_attainment_check,
    uniqueness_probe,
)
from src.minimality.quotient_norm import (
    infimum_equality_check,
    objective,
    quotient_norm,
    quotient_norm_bruteforce,
    smoothed_max_abs,
)
from src.operators.factory import TruncationSpec, build_z2, build_zo, orthogonalizing_diagonal


def random_antihermitian(rng, n, scale=0.5):
    g = rng.uniform(-scale, scale, (n, n)) + 1j * rng.uniform(-scale, scale, (n, n))
    return (g - g.conj().T) / 2


def random_offdiagonal(rng, n, scale=0.5):
    a = random_antihermitian(rng, n, scale)
    np.fill_diagonal(a, 0.0)
    return a


def test_certify_swap_matrix():
    certificate = certify_minimal(1j * np.array([[0.0, 1.0], [1.0, 0.0]]), 1)
    assert certificate.verdict == CERTIFIED
    assert certificate.spectral_norm == pytest.approx(1.0)
    assert certificate.nonzero_column_ok


@pytest.mark.parametrize("n", [16, 32, 64, 128])
def test_certify_z2(n):
    certificate = certify_minimal(build_z2(TruncationSpec(n)), 1)
    assert certificate.verdict == CERTIFIED
    assert certificate.norm_gap <= 1e-8
    assert certificate.max_orthogonality_residual <= 1e-10
    assert certificate.attainment["attains"]


def test_certify_detects_perturbed_diagonal():
    z2 = build_z2(TruncationSpec(16)).entries.copy()
    z2[1, 1] += 0.1j
    certificate = certify_minimal(z2, 1)
    assert certificate.verdict == NOT_CERTIFIED
    assert spectral_norm(z2) > float(np.linalg.norm(column(z2, 1)))


def test_attainment_criterion_on_eigenvector():
    t = np.diag([3.0, 1.0])
    report = sain_attainment_check(t, np.array([1.0, 0.0]))
    assert report["attains"]
    assert not sain_attainment_check(t, np.array([0.0, 1.0]))["attains"]


def test_formula_matches_orthogonalizing_diagonal():
    z_o = build_zo(TruncationSpec(16))
    formula = minimizing_diagonal_formula(z_o, 1)
    np.testing.assert_allclose(formula.entries, orthogonalizing_diagonal(z_o, 1).entries, atol=1e-12)


def test_formula_zero_for_orthogonal_columns():
    v = 1j * np.array([[0.0, 1.0], [1.0, 0.0]])
    np.testing.assert_array_equal(minimizing_diagonal_formula(v, 1).entries, np.zeros(2))


def test_formula_degenerate_column():
    v = 1j * np.array([[0.0, 1.0, 0.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
    with pytest.raises(DegenerateColumnError):
        minimizing_diagonal_formula(v, 1)


def test_uniqueness_probe_on_z2():
    report = uniqueness_probe(build_z2(TruncationSpec(12)), 1)
    assert report["verdict"] == "pass"


def test_quotient_norm_of_diagonal():
    x = np.diag([0.3j, -1.2j, 0.5j])
    result = quotient_norm(x)
    assert result.value == 0.0
    np.testing.assert_allclose(result.argmin_diagonal.real_values, [-0.3, 1.2, -0.5])


def test_quotient_norm_two_by_two():
    z = 0.6 - 0.8j
    result = quotient_norm(np.array([[0, z], [-np.conj(z), 0]]))
    assert result.value == pytest.approx(1.0, abs=1e-12)
    assert result.converged


def test_quotient_norm_of_zo():
    z_o = build_zo(TruncationSpec(16))
    result = quotient_norm(z_o)
    assert result.value == pytest.approx(float(np.linalg.norm(column(z_o, 1))), abs=1e-6)
    assert result.lower_bound <= result.value
    d0 = orthogonalizing_diagonal(z_o, 1)
    assert objective(z_o, result.argmin_diagonal.real_values) == pytest.approx(result.value, abs=1e-12)
    assert objective(z_o, d0.real_values) == pytest.approx(result.value, abs=1e-6)


def test_quotient_norm_against_bruteforce():
    rng = np.random.default_rng(20240917)
    # grid points are within step / 2 of any minimizer inside the box
    slack = 0.05
    for _ in range(50):
        x = random_antihermitian(rng, 3, scale=0.3)
        result = quotient_norm(x)
        brute = quotient_norm_bruteforce(x)
        assert result.value <= brute + result.certified_gap + 1e-8
        assert brute <= result.value + slack + 1e-8


def test_subgradient_engine_against_bruteforce():
    rng = np.random.default_rng(17)
    cfg = SolverSettings(method="subgradient")
    for _ in range(5):
        x = random_offdiagonal(rng, 3)
        result = quotient_norm(x, cfg)
        brute = quotient_norm_bruteforce(x)
        assert result.lower_bound <= result.value
        assert result.value <= brute + 1e-3


def test_bruteforce_limits():
    assert quotient_norm_bruteforce(np.zeros((3, 3))) == 0.0
    assert quotient_norm_bruteforce(np.diag([0.5j, -0.3j])) <= 0.05 + 1e-12
    with pytest.raises(SizeError):
        quotient_norm_bruteforce(np.zeros((5, 5)))


def test_quotient_norm_is_bounded_by_norm():
    rng = np.random.default_rng(5)
    x = random_offdiagonal(rng, 8)
    result = quotient_norm(x)
    assert result.value <= spectral_norm(x) + 1e-12
    assert result.lower_bound <= result.value


def test_infimum_equality():
    rng = np.random.default_rng(9)
    x = random_offdiagonal(rng, 5)
    report = infimum_equality_check(x, theta_grid=(-0.5, 0.5))
    assert report["verdict"] == "pass"
    assert set(report["residuals"]) == {"discrepancy", "attained"}
    assert len(report["params"]["reconstructed_values"]) == 2
    # each reconstructed diagonal is evaluated on x itself
    assert min(report["params"]["reconstructed_values"]) >= report["params"]["full_infimum"] - 1e-6
    assert report["params"]["full_infimum"] == pytest.approx(quotient_norm(x).value, abs=1e-9)


def test_objective_is_convex_in_diagonal():
    rng = np.random.default_rng(31)
    for _ in range(40):
        x = random_antihermitian(rng, 5)
        d1, d2 = rng.uniform(-1.0, 1.0, 5), rng.uniform(-1.0, 1.0, 5)
        lam = float(rng.uniform())
        mixed = objective(x, lam * d1 + (1.0 - lam) * d2)
        assert mixed <= lam * objective(x, d1) + (1.0 - lam) * objective(x, d2) + 1e-12


def test_passing_certificate_gives_the_quotient_norm():
    candidates = [1j * np.array([[0.0, 1.0], [1.0, 0.0]])]
    candidates += [build_z2(TruncationSpec(n)) for n in (16, 32)]
    rng = np.random.default_rng(3)
    candidates += [random_offdiagonal(rng, 4) for _ in range(5)]
    certified = 0
    for x in candidates:
        certificate = certify_minimal(x, 1)
        if not certificate.passed:
            continue
        certified += 1
        result = quotient_norm(x)
        assert result.value == pytest.approx(certificate.column_norm, abs=1e-6)
        assert result.value >= certificate.column_norm - 1e-8
    assert certified >= 3


def test_warm_start_reproduces_value():
    rng = np.random.default_rng(12)
    x = random_offdiagonal(rng, 8)
    cold = quotient_norm(x)
    warm = quotient_norm(x, x0=cold.argmin_diagonal.real_values)
    assert cold.converged and warm.converged
    assert warm.value == pytest.approx(cold.value, abs=1e-7)
    assert warm.lower_bound <= warm.value
    assert cold.certified_gap <= SolverSettings().gap_target * spectral_norm(x) + 1e-15


def test_smoothed_max_abs_bounds():
    w = np.array([-2.0, 0.5, 1.9])
    v = np.eye(3)
    mu = 1e-2
    value, grad, weights = smoothed_max_abs(w, v, mu)
    assert 2.0 <= value <= 2.0 + mu * np.log(6) + 1e-12
    assert grad.shape == (3,)
    assert float(np.sum(weights["p"]) + np.sum(weights["q"])) == pytest.approx(1.0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
