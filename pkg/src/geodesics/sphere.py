#!/usr/bin/env python3
"""
Sphere reduction of orbit curves

F(u b u*) = u r0 u* xi maps the orbit into the unit sphere, with xi = i e_j0 and r0
the reflection fixing e_j0 and negating its orthogonal complement. For a lift whose
norm is attained on column j0, the image of the geodesic is a great circle.
"""

from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from config import QuadratureSettings, SolverSettings, Tolerances
from src.geodesics.curves import OrbitCurve, curve_length
from src.geodesics.quadrature import integrate
from src.linalg.core import (
    AntiHermitianOp,
    ComplexMatrix,
    MatrixLike,
    as_array,
    column,
    exp_antihermitian,
    spectral_norm,
)
from src.linalg.errors import CertificateError, IndexOutOfRangeError, InvalidInputError, ShapeError, SizeError
from src.minimality.certificates import certify_minimal
from src.operators.factory import DiagonalOp

logger = logging.getLogger(__name__)

TOLERANCES = Tolerances()


@dataclass(frozen=True)
class SphereState:
    """xi = i e_j0, eta = c_j0(z)/||c_j0(z)|| and the reflection r0"""

    xi: np.ndarray
    eta: Optional[np.ndarray]
    r0: np.ndarray
    j0: int

    def __post_init__(self):
        r0 = self.r0
        n = r0.shape[0]
        if float(np.max(np.abs(r0 @ self.xi - self.xi))) > 1e-12:
            raise InvalidInputError("r0 does not fix xi")
        if float(np.max(np.abs(r0 @ r0 - np.eye(n)))) > 1e-12:
            raise InvalidInputError("r0 is not an involution")
        if float(np.max(np.abs(r0 - r0.conj().T))) > 1e-12:
            raise InvalidInputError("r0 is not Hermitian")
        if self.eta is not None and float(np.max(np.abs(r0 @ self.eta + self.eta))) > 1e-12:
            raise InvalidInputError("r0 does not negate eta; the lift has a nonzero j0 diagonal entry")

    @property
    def dim(self) -> int:
        return self.r0.shape[0]


def reflection_r0(j0: int, n: int, z: Optional[MatrixLike] = None) -> Tuple[ComplexMatrix, SphereState]:
    """
    r0 = +1 on e_j0 and -1 on its complement, with the sphere state built on it

    Args:
        j0: 1-based index
        n: dimension
        z: optional lift; when given, eta = c_j0(z)/||c_j0(z)||
    """
    if n < 2:
        raise SizeError(f"reflection needs n >= 2, got {n}")
    if not 1 <= j0 <= n:
        raise IndexOutOfRangeError(f"j0={j0} outside 1..{n}")
    r0 = -np.eye(n, dtype=np.complex128)
    r0[j0 - 1, j0 - 1] = 1.0
    xi = np.zeros(n, dtype=np.complex128)
    xi[j0 - 1] = 1j
    eta = None
    if z is not None:
        c = column(z, j0)
        norm_c = float(np.linalg.norm(c))
        if norm_c == 0.0:
            raise InvalidInputError(f"column {j0} of the lift vanishes")
        eta = c / norm_c
    return ComplexMatrix(r0), SphereState(xi, eta, r0, j0)


def sphere_map(u: MatrixLike, s: SphereState) -> np.ndarray:
    """u r0 u* xi"""
    data = as_array(u)
    if data.shape[0] != s.dim:
        raise ShapeError(f"unitary of dim {data.shape[0]} against sphere state of dim {s.dim}")
    return data @ (s.r0 @ (data.conj().T @ s.xi))


def sphere_velocity(z: MatrixLike, s: SphereState, t: float) -> np.ndarray:
    """d/dt of e^{tz} r0 e^{-tz} xi, i.e. e^{tz} (z r0 - r0 z) e^{-tz} xi"""
    lift = as_array(z)
    u = exp_antihermitian(lift, t).entries
    bracket = lift @ s.r0 - s.r0 @ lift
    return u @ (bracket @ (u.conj().T @ s.xi))


def planarity_residual(points: Sequence[np.ndarray]) -> float:
    """Third singular value of the real point cloud relative to the first"""
    rows = np.array([np.concatenate([p.real, p.imag]) for p in points])
    sv = np.linalg.svd(rows, compute_uv=False)
    if sv.size < 3 or sv[0] == 0.0:
        return 0.0
    return float(sv[2] / sv[0])


def sphere_geodesic_check(
    z: AntiHermitianOp,
    s: SphereState,
    t_grid: Sequence[float],
    b: Optional[DiagonalOp] = None,
    tolerances: Optional[Tolerances] = None,
    quad: Optional[QuadratureSettings] = None,
    cfg: Optional[SolverSettings] = None,
) -> Dict[str, Any]:
    """
    Eigenvector identity, great-circle shape and the sphere/orbit length ratio

    Args:
        z: certified column-attained lift
        s: sphere state for z's column j0
        t_grid: sample times (0 may be included)
        b: base point for the orbit lengths; default 1/i

    Raises:
        CertificateError: z is not certified minimal at s.j0 with a nonzero column
    """
    tolerances = tolerances or TOLERANCES
    certificate = certify_minimal(z, s.j0, tolerances.certificate, tolerances.orthogonality)
    if not (certificate.passed and certificate.nonzero_column_ok):
        raise CertificateError(f"sphere check needs a column-attained lift at j0={s.j0}: {certificate.verdict}")
    if s.eta is None:
        raise InvalidInputError("sphere state carries no eta")

    norm_z = spectral_norm(z)
    v = s.xi + s.eta
    eigen_residual = float(np.linalg.norm(z.entries @ v - 1j * norm_z * v) / np.linalg.norm(v))
    eigen_ok = eigen_residual <= tolerances.eigenvector

    times = [float(t) for t in t_grid]
    points = [sphere_map(exp_antihermitian(z, t), s) for t in times]
    unit_residual = max(abs(float(np.linalg.norm(p)) - 1.0) for p in points)
    planar = planarity_residual([s.xi] + points)
    speeds = [float(np.linalg.norm(sphere_velocity(z, s, t))) for t in times]
    speed_spread = max(speeds) - min(speeds)
    start_residual = float(np.linalg.norm(sphere_map(np.eye(s.dim), s) - s.xi))

    if b is None:
        b = DiagonalOp(1.0 / np.arange(1, s.dim + 1), "hermitian")
    positive = [t for t in times if t > 0]
    ratios = []
    if positive:
        curve = OrbitCurve(z, b, (0.0, max(positive)))
        for t in positive:
            sphere_length = integrate(lambda r: float(np.linalg.norm(sphere_velocity(z, s, r))), 0.0, t, quad).value
            orbit_length = curve_length(curve, 0.0, t, quad, cfg).value
            ratios.append(sphere_length / orbit_length)
    ratio_spread = (max(ratios) - min(ratios)) if ratios else 0.0

    checks = {
        "eigenvector": {"value": eigen_residual, "tol": tolerances.eigenvector, "ok": eigen_ok},
        "unit_norm": {"value": unit_residual, "tol": 1e-12, "ok": unit_residual <= 1e-12},
        "planarity": {"value": planar, "tol": tolerances.speed, "ok": planar <= tolerances.speed},
        "speed_spread": {"value": speed_spread, "tol": tolerances.speed, "ok": speed_spread <= tolerances.speed},
        "start": {"value": start_residual, "tol": 1e-12, "ok": start_residual <= 1e-12},
        "ratio_spread": {"value": ratio_spread, "tol": tolerances.length, "ok": ratio_spread <= tolerances.length},
    }
    ok = all(item["ok"] for item in checks.values())
    ratio = ratios[0] if ratios else None
    logger.info(f"Sphere check j0={s.j0}: eigen={eigen_residual:.2e} planarity={planar:.2e} ratio={ratio}")
    return {
        "check": "sphere",
        "verdict": "pass" if ok else "fail",
        "residuals": checks,
        "params": {
            "j0": s.j0,
            "norm_z": norm_z,
            "t_grid": times,
            "speed": speeds[0] if speeds else None,
            "length_ratio": ratio,
            "length_ratios": ratios,
        },
    }


def sphere_curves_agree(
    z: MatrixLike,
    v: MatrixLike,
    t0: float,
    s0: float,
    j0: int,
    tol: float = TOLERANCES.crossing,
) -> Dict[str, Any]:
    """
    Compare the sphere images of two lifts at a crossing of their orbit curves

    Both images are great circles through xi; reaching the same point by minimal
    arcs forces equal positions and t0 w_z'(t0) = s0 w_v'(s0).
    """
    n = as_array(z).shape[0]
    _, state = reflection_r0(j0, n)
    w_z = sphere_map(exp_antihermitian(z, t0), state)
    w_v = sphere_map(exp_antihermitian(v, s0), state)
    position = float(np.linalg.norm(w_z - w_v))
    velocity = float(np.linalg.norm(t0 * sphere_velocity(z, state, t0) - s0 * sphere_velocity(v, state, s0)))
    angle = math.acos(max(-1.0, min(1.0, float(np.real(np.vdot(state.xi, w_z))))))
    ok = position <= tol and velocity <= tol
    return {
        "verdict": "pass" if ok else "fail",
        "position_residual": position,
        "velocity_residual": velocity,
        "arc_angle": angle,
        "tol": tol,
    }
