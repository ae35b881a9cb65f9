#!/usr/bin/env python3
"""
Test script for orbit curves, the Finsler length and the sphere reduction
"""

import math
import time

import numpy as np
import pytest

from config import CompetitorSettings, QuadratureSettings, SolverSettings
from src.geodesics.curves import (
    OrbitCurve,
    OrbitPoint,
    _competitor_status,
    curve_length,
    curve_point,
    finsler_norm_at,
    isotropy_check,
    length_additivity_check,
    perturbed_path_length,
    speed_samples,
    tangent,
    tangent_lift,
    verify_short_curve,
)
from src.geodesics.quadrature import integrate, integrate_fixed, make_lg_rule
from src.geodesics.sphere import (
    reflection_r0,
    sphere_curves_agree,
    sphere_geodesic_check,
    sphere_map,
    sphere_velocity,
)
from src.linalg.core import AntiHermitianOp, exp_antihermitian, spectral_norm
from src.linalg.errors import (
    CertificateError,
    DegenerateBaseError,
    DomainError,
    InvalidInputError,
    WindowError,
)
from src.operators.factory import DiagonalOp, TruncationSpec, build_b, build_z2


@pytest.fixture(scope="module")
def z2_16():
    return build_z2(TruncationSpec(16))


def test_gauss_legendre_rule_is_exact_for_low_degree():
    rule = make_lg_rule(5)
    assert rule(lambda t: t ** 9, 0.0, 1.0) == pytest.approx(0.1, abs=1e-15)


def test_adaptive_integration():
    result = integrate(math.sin, 0.0, math.pi, QuadratureSettings(atol=1e-12))
    assert result.value == pytest.approx(2.0, abs=1e-12)
    assert result.converged
    assert float(result) == result.value


def test_adaptive_integration_reports_exhaustion():
    settings = QuadratureSettings(nodes=2, atol=1e-15, max_depth=2, max_panels=4)
    result = integrate(lambda t: math.sqrt(abs(t)), -1.0, 1.0, settings)
    assert not result.converged


def test_fixed_rule_on_vector_integrand():
    values, errors, evaluations = integrate_fixed(lambda s: np.array([s ** 7, math.exp(s)]), 0.0, 1.0, 2, 5)
    assert values[0] == pytest.approx(0.125, abs=1e-14)
    assert values[1] == pytest.approx(math.e - 1.0, abs=1e-12)
    assert np.all(errors <= 1e-9)
    assert evaluations == 15
    _, rough, _ = integrate_fixed(lambda s: math.sqrt(s), 0.0, 1.0, 1, 3)
    assert rough[0] > 1e-4
    with pytest.raises(InvalidInputError):
        integrate_fixed(math.sin, 0.0, 1.0, 0, 5)


def test_curve_point_at_zero_is_base(z2_16):
    b = build_b(16)
    curve = OrbitCurve(z2_16, b)
    np.testing.assert_allclose(curve_point(curve, 0.0).c.entries, b.matrix(), atol=1e-15)
    with pytest.raises(DomainError):
        curve_point(curve, 1.5)


def test_diagonal_lift_fixes_base():
    b = build_b(6)
    curve = OrbitCurve(AntiHermitianOp(np.diag(1j * np.arange(6.0))), b)
    for t in (0.3, 0.9):
        np.testing.assert_allclose(curve_point(curve, t).c.entries, b.matrix(), atol=1e-14)
    assert isotropy_check(b, np.arange(6.0)) <= 1e-15


def test_tangent_matches_finite_difference(z2_16):
    b = build_b(16)
    curve = OrbitCurve(z2_16, b, (-1.0, 1.0))
    h = 1e-5
    difference = (curve_point(curve, h).c.entries - curve_point(curve, -h).c.entries) / (2 * h)
    x = tangent(z2_16, curve_point(curve, 0.0))
    assert spectral_norm(difference - x.entries) <= 1e-8


def test_tangent_lift_recovers_offdiagonal_part(z2_16):
    b = build_b(16)
    point = curve_point(OrbitCurve(z2_16, b), 0.4)
    lift = tangent_lift(tangent(z2_16, point), point)
    offdiagonal = z2_16.entries - np.diag(np.diag(z2_16.entries))
    assert spectral_norm(lift.entries - offdiagonal) <= 1e-9


def test_tangent_lift_needs_distinct_base():
    b = DiagonalOp(np.array([1.0, 1.0, 0.5]), "hermitian")
    point = OrbitPoint.from_unitary(exp_antihermitian(np.zeros((3, 3))), b)
    with pytest.raises(DegenerateBaseError):
        tangent_lift(np.zeros((3, 3)), point)


def test_finsler_norm_of_zero_vector():
    b = build_b(4)
    point = OrbitPoint.from_unitary(exp_antihermitian(np.zeros((4, 4))), b)
    assert finsler_norm_at(np.zeros((4, 4)), point) == 0.0


def test_finsler_norm_equals_lift_norm_for_minimal_lift(z2_16):
    b = build_b(16)
    point = curve_point(OrbitCurve(z2_16, b), 0.2)
    assert finsler_norm_at(tangent(z2_16, point), point) == pytest.approx(spectral_norm(z2_16), rel=1e-6)


def test_curve_length_of_minimal_lift():
    z2 = build_z2(TruncationSpec(32))
    t = math.pi / (4 * spectral_norm(z2))
    curve = OrbitCurve(z2, build_b(32), (0.0, t))
    length = curve_length(curve, 0.0, t)
    assert length.converged
    assert abs(length.value - t * spectral_norm(z2)) / (t * spectral_norm(z2)) <= 1e-6
    assert curve_length(curve, t / 2, t / 2).value == 0.0
    speeds = speed_samples(curve, np.linspace(0.0, t, 5))
    assert max(speeds) - min(speeds) <= 1e-8


def test_length_is_additive(z2_16):
    t = math.pi / (4 * spectral_norm(z2_16))
    curve = OrbitCurve(z2_16, build_b(16), (0.0, t))
    assert length_additivity_check(curve, t / 3, t)["verdict"] == "pass"


def test_short_curve_beats_competitors_at_n32():
    z2 = build_z2(TruncationSpec(32))
    t = math.pi / (4 * spectral_norm(z2))
    start = time.perf_counter()
    report = verify_short_curve(z2, build_b(32), t, paths=20, seed=4)
    elapsed = time.perf_counter() - start
    params = report["params"]
    assert report["verdict"] == "pass"
    assert params["competitor_status"] == ["longer"] * 20
    assert min(params["competitor_lengths"]) >= params["length"] - 1e-6
    assert all(lo <= hi for lo, hi in zip(params["competitor_lengths"], params["competitor_upper_lengths"]))
    assert params["competitor_evaluations"] == 20 * 15
    assert len(params["competitor_error_estimates"]) == 20
    assert 0 <= params["competitor_unconverged"] <= 20
    assert elapsed < 300.0


def test_competitor_status_uses_certified_bounds():
    longer = {"converged": True, "lower": 1.2, "upper": 1.21, "error_estimate": 1e-6}
    shorter = {"converged": True, "lower": 0.8, "upper": 0.9, "error_estimate": 1e-6}
    straddling = {"converged": True, "lower": 0.99, "upper": 1.01, "error_estimate": 1e-6}
    coarse_but_clear = dict(longer, converged=False, error_estimate=1e-3)
    rough = dict(longer, converged=False, error_estimate=0.5)
    assert _competitor_status(longer, 1.0, 1e-6) == "longer"
    assert _competitor_status(shorter, 1.0, 1e-6) == "shorter"
    assert _competitor_status(straddling, 1.0, 1e-6) == "unresolved"
    assert _competitor_status(coarse_but_clear, 1.0, 1e-6) == "longer"
    assert _competitor_status(rough, 1.0, 1e-6) == "unresolved"


def test_competitor_length_bounds_bracket_geodesic_length(z2_16):
    t = math.pi / (4 * spectral_norm(z2_16))
    direction = np.zeros((16, 16), dtype=complex)
    result = perturbed_path_length(z2_16, build_b(16), t, direction, CompetitorSettings(), SolverSettings())
    # a zero perturbation is the geodesic itself
    assert result["converged"]
    assert result["lower"] <= result["upper"] + 1e-12
    assert result["lower"] == pytest.approx(t * spectral_norm(z2_16), rel=1e-5)
    assert result["upper"] == pytest.approx(t * spectral_norm(z2_16), rel=1e-5)


def test_short_curve_not_certified_for_wrong_diagonal(z2_16):
    data = z2_16.entries.copy()
    data[0, 0] += 0.1j
    z = AntiHermitianOp(data)
    t = math.pi / (4 * spectral_norm(z))
    report = verify_short_curve(z, build_b(16), t, paths=0)
    assert report["verdict"] == "not-certified"
    assert not report["residuals"]["minimality"]["ok"]
    assert report["residuals"]["minimality"]["value"] > 1e-6


def test_doubled_lift_on_half_interval_has_same_length():
    block = np.array([[0.0, 1.0], [1.0, 0.0]])
    z = AntiHermitianOp(1j * np.block([[0.5 * block, np.zeros((2, 2))], [np.zeros((2, 2)), 0.3 * block]]))
    b = build_b(4)
    t = 0.7
    fast = OrbitCurve(AntiHermitianOp(2.0 * z.entries), b, (0.0, t))
    slow = OrbitCurve(z, b, (0.0, 2.0 * t))
    fast_length = curve_length(fast, 0.0, t).value
    slow_length = curve_length(slow, 0.0, 2.0 * t).value
    assert fast_length == pytest.approx(slow_length, rel=1e-8)
    assert slow_length == pytest.approx(2.0 * t * 0.5, rel=1e-8)


def test_short_curve_window(z2_16):
    with pytest.raises(WindowError):
        verify_short_curve(z2_16, build_b(16), math.pi / spectral_norm(z2_16), paths=0)


def test_reflection_and_sphere_map(z2_16):
    r0, state = reflection_r0(1, 16, z2_16)
    np.testing.assert_allclose(r0.entries @ r0.entries, np.eye(16), atol=1e-15)
    np.testing.assert_allclose(sphere_map(np.eye(16), state), state.xi, atol=1e-15)


def test_eigenvector_identity():
    z2 = build_z2(TruncationSpec(64))
    _, state = reflection_r0(1, 64, z2)
    v = state.xi + state.eta
    residual = np.linalg.norm(z2.entries @ v - 1j * spectral_norm(z2) * v)
    assert residual <= 1e-8


def test_sphere_curve_is_a_great_circle(z2_16):
    _, state = reflection_r0(1, 16, z2_16)
    norm_z = spectral_norm(z2_16)
    grid = np.linspace(0.0, math.pi / (4 * norm_z), 4)
    report = sphere_geodesic_check(z2_16, state, grid, build_b(16))
    assert report["verdict"] == "pass"
    assert report["params"]["speed"] == pytest.approx(2 * norm_z, rel=1e-8)
    assert report["params"]["length_ratio"] == pytest.approx(2.0, rel=1e-5)


def test_sphere_velocity_matches_finite_difference(z2_16):
    _, state = reflection_r0(1, 16, z2_16)
    h = 1e-6
    t = 0.1
    forward = sphere_map(exp_antihermitian(z2_16, t + h), state)
    backward = sphere_map(exp_antihermitian(z2_16, t - h), state)
    assert np.linalg.norm(sphere_velocity(z2_16, state, t) - (forward - backward) / (2 * h)) <= 1e-7


def test_sphere_check_requires_certificate(z2_16):
    perturbed = np.array(z2_16.entries)
    perturbed[1, 1] += 0.1j
    z = AntiHermitianOp(perturbed)
    _, state = reflection_r0(1, 16, z)
    with pytest.raises(CertificateError):
        sphere_geodesic_check(z, state, [0.0, 0.1])


def test_rescaled_lifts_share_sphere_image(z2_16):
    t0 = 0.05
    report = sphere_curves_agree(z2_16, AntiHermitianOp(2 * z2_16.entries), t0, t0 / 2, 1)
    assert report["verdict"] == "pass"


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
