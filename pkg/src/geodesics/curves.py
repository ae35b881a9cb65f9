#!/usr/bin/env python3
"""
Orbit curves gamma(t) = e^{tZ} b e^{-tZ}, their tangents and Finsler lengths
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from config import CompetitorSettings, QuadratureSettings, SolverSettings, Tolerances
from src.geodesics.quadrature import QuadratureResult, integrate, integrate_fixed
from src.linalg.core import (
    AntiHermitianOp,
    ComplexMatrix,
    MatrixLike,
    UnitaryMatrix,
    as_array,
    dexp_antihermitian,
    exp_antihermitian,
    spectral_norm,
)
from src.linalg.errors import (
    DegenerateBaseError,
    DomainError,
    InvalidInputError,
    ShapeError,
    WindowError,
)
from src.minimality.certificates import certify_minimal
from src.minimality.quotient_norm import QuotientNormResult, quotient_norm
from src.operators.factory import DiagonalOp

logger = logging.getLogger(__name__)

TOLERANCES = Tolerances()


@dataclass(frozen=True)
class OrbitPoint:
    """c = u b u* together with the unitary that produced it"""

    c: ComplexMatrix
    u: UnitaryMatrix
    base: DiagonalOp
    tol: float = field(default=TOLERANCES.orbit, compare=False)

    def __post_init__(self):
        if self.base.hermitian_kind != "hermitian":
            raise InvalidInputError("orbit base point must be a Hermitian diagonal")
        if not (self.c.dim == self.u.dim == self.base.dim):
            raise ShapeError(f"orbit point dims differ: c={self.c.dim}, u={self.u.dim}, b={self.base.dim}")
        u = self.u.entries
        expected = (u * self.base.entries.real) @ u.conj().T
        residual = spectral_norm(self.c.entries - expected)
        if residual > self.tol:
            raise InvalidInputError(f"c differs from u b u* by {residual:.3e}")
        c = self.c.entries
        if float(np.max(np.abs(c - c.conj().T))) > TOLERANCES.atol:
            raise InvalidInputError("orbit point is not Hermitian")
        spectrum = np.linalg.eigvalsh((c + c.conj().T) / 2)
        drift = float(np.max(np.abs(spectrum - np.sort(self.base.entries.real))))
        if drift > self.tol:
            raise InvalidInputError(f"orbit point spectrum drifted from b by {drift:.3e}")

    @classmethod
    def from_unitary(cls, u: UnitaryMatrix, b: DiagonalOp) -> "OrbitPoint":
        data = u.entries
        c = (data * b.entries.real) @ data.conj().T
        return cls(ComplexMatrix((c + c.conj().T) / 2), u, b)


@dataclass(frozen=True)
class OrbitCurve:
    """t -> e^{tz} b e^{-tz} on [t_lo, t_hi]"""

    z: AntiHermitianOp
    b: DiagonalOp
    domain: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        if self.z.dim != self.b.dim:
            raise ShapeError(f"lift dim {self.z.dim} differs from base dim {self.b.dim}")
        if self.b.hermitian_kind != "hermitian":
            raise InvalidInputError("base point must be a Hermitian diagonal")
        lo, hi = self.domain
        if not lo <= hi:
            raise InvalidInputError(f"empty curve domain {self.domain}")


def curve_point(curve: OrbitCurve, t: float) -> OrbitPoint:
    lo, hi = curve.domain
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if t < lo - slack or t > hi + slack:
        raise DomainError(f"t={t} outside curve domain [{lo}, {hi}]")
    return OrbitPoint.from_unitary(exp_antihermitian(curve.z, t), curve.b)


def tangent(z: MatrixLike, c: OrbitPoint) -> ComplexMatrix:
    """x = z c - c z, Hermitian for anti-Hermitian z and Hermitian c"""
    lift = as_array(z)
    point = c.c.entries
    if lift.shape != point.shape:
        raise ShapeError(f"tangent of shapes {lift.shape} and {point.shape}")
    x = lift @ point - point @ lift
    residual = float(np.max(np.abs(x - x.conj().T)))
    if residual > TOLERANCES.atol * max(1.0, float(np.max(np.abs(x)))):
        raise InvalidInputError(f"tangent vector is not Hermitian (residual {residual:.3e})")
    return ComplexMatrix((x + x.conj().T) / 2)


def base_gaps(b: DiagonalOp) -> np.ndarray:
    """Matrix of b_k - b_j; raises when two entries coincide"""
    values = b.entries.real
    gaps = values[None, :] - values[:, None]
    off = ~np.eye(values.size, dtype=bool)
    if np.any(gaps[off] == 0.0):
        raise DegenerateBaseError("base point has repeated entries; the tangent lift is not unique")
    return gaps


def tangent_lift(x: MatrixLike, c: OrbitPoint, tol: float = 1e-8) -> AntiHermitianOp:
    """
    Zero-diagonal anti-Hermitian y with u y u* lifting x at c

    With x~ = u* x u the lift has y_jk = x~_jk / (b_k - b_j). x~ must have a vanishing
    diagonal, which is the condition for x to be tangent to the orbit at c.
    """
    data = as_array(x)
    gaps = base_gaps(c.base)
    u = c.u.entries
    pulled = u.conj().T @ data @ u
    diagonal = float(np.max(np.abs(np.diag(pulled))))
    if diagonal > tol * max(1.0, float(np.max(np.abs(data)))):
        raise InvalidInputError(f"x is not tangent to the orbit at c (diagonal residual {diagonal:.3e})")
    n = data.shape[0]
    off = ~np.eye(n, dtype=bool)
    y = np.zeros_like(pulled)
    y[off] = pulled[off] / gaps[off]
    return AntiHermitianOp.project(y)


def finsler_norm_result(
    x: MatrixLike,
    c: OrbitPoint,
    cfg: Optional[SolverSettings] = None,
    x0: Optional[Sequence[float]] = None,
) -> QuotientNormResult:
    return quotient_norm(tangent_lift(x, c), cfg, x0=x0)


def finsler_norm_at(x: MatrixLike, c: OrbitPoint, cfg: Optional[SolverSettings] = None) -> float:
    """||x||_c: quotient norm of the unique zero-diagonal lift of x pulled back to b"""
    return finsler_norm_result(x, c, cfg).value


class _SpeedFunction:
    """Finsler speed along a curve, warm-starting each solve from the last argmin"""

    def __init__(self, curve: OrbitCurve, cfg: Optional[SolverSettings]):
        self.curve = curve
        self.cfg = cfg
        self.warm: Optional[np.ndarray] = None

    def __call__(self, t: float) -> float:
        point = curve_point(self.curve, t)
        x = tangent(self.curve.z, point)
        # pushed-forward tangent: u (z b - b z) u* equals z c - c z
        result = finsler_norm_result(x, point, self.cfg, self.warm)
        self.warm = result.argmin_diagonal.real_values
        return result.value


def curve_length(
    curve: OrbitCurve,
    t0: float,
    t1: float,
    quad: Optional[QuadratureSettings] = None,
    cfg: Optional[SolverSettings] = None,
) -> QuadratureResult:
    """
    L = integral of ||gamma'(t)||_{gamma(t)} over [t0, t1]

    Returns:
        QuadratureResult (float() gives the length); converged is False when the
        adaptive rule ran out of depth or panels
    """
    lo, hi = curve.domain
    for t in (t0, t1):
        if t < lo or t > hi:
            raise DomainError(f"t={t} outside curve domain [{lo}, {hi}]")
    if t0 == t1:
        return QuadratureResult(0.0, 0.0, 0, 0, True)
    return integrate(_SpeedFunction(curve, cfg), t0, t1, quad)


def _random_antihermitian(rng: np.random.Generator, n: int) -> np.ndarray:
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = (g - g.conj().T) / 2
    return a / np.linalg.norm(a, 2)


def perturbed_path_length(
    z: AntiHermitianOp,
    b: DiagonalOp,
    t: float,
    direction: np.ndarray,
    settings: CompetitorSettings,
    cfg: SolverSettings,
) -> Dict[str, Any]:
    """
    Length bounds for s -> u(s) b u(s)*, u(s) = exp(s t z + epsilon s^2 (1 - s) P), s in [0, 1]

    Both endpoints coincide with those of the geodesic; the speed at s is the quotient
    norm of the lift u* u'. The solver's certified lower bound and its value are
    integrated on the same fixed rule, giving a lower and an upper length.
    """
    base_gaps(b)
    off = ~np.eye(b.dim, dtype=bool)
    generator = t * z.entries
    epsilon = settings.epsilon
    warm: List[Optional[np.ndarray]] = [None]

    def speed(s: float) -> np.ndarray:
        a = s * generator + epsilon * s * s * (1.0 - s) * direction
        da = generator + epsilon * (2.0 * s - 3.0 * s * s) * direction
        u, du = dexp_antihermitian(a, da)
        lift = u.conj().T @ du
        y = np.zeros_like(lift)
        y[off] = lift[off]
        result = quotient_norm(AntiHermitianOp.project(y), cfg, x0=warm[0])
        warm[0] = result.argmin_diagonal.real_values
        return np.array([result.lower_bound, result.value])

    values, errors, evaluations = integrate_fixed(speed, 0.0, 1.0, settings.panels, settings.nodes)
    error = float(np.max(errors))
    return {
        "lower": float(values[0]),
        "upper": float(values[1]),
        "error_estimate": error,
        "converged": error <= settings.atol,
        "evaluations": evaluations,
    }


def _competitor_status(competitor: Dict[str, Any], length: float, tol: float) -> str:
    """
    longer, shorter or unresolved against the geodesic length

    The coarse-minus-fine difference is used as the error bar of the fine rule, so a
    path whose estimate exceeds atol can still be decided when its margin is larger.
    """
    if competitor["lower"] - competitor["error_estimate"] >= length - tol:
        return "longer"
    if competitor["upper"] + competitor["error_estimate"] < length - tol:
        return "shorter"
    return "unresolved"


def verify_short_curve(
    z: AntiHermitianOp,
    b: DiagonalOp,
    t: float,
    paths: int = 20,
    seed: int = 0,
    tolerances: Optional[Tolerances] = None,
    quad: Optional[QuadratureSettings] = None,
    cfg: Optional[SolverSettings] = None,
    competitors: Optional[CompetitorSettings] = None,
) -> Dict[str, Any]:
    """
    Check that e^{sz} b e^{-sz}, s in [0, t], has length t ||z|| and that sampled
    endpoint-pinned competitors are not shorter

    A competitor counts as not shorter only when its certified lower length, less
    the quadrature error estimate, reaches L - tol. One whose upper length falls
    below L - tol fails the check; one that is neither makes it inconclusive.
    Paths whose error estimate exceeds the competitor atol are counted in
    competitor_unconverged.

    Raises:
        WindowError: t outside (0, pi / (2 ||z||)]
    """
    tolerances = tolerances or TOLERANCES
    quad = quad or QuadratureSettings()
    cfg = cfg or SolverSettings()
    competitors = competitors or CompetitorSettings()
    norm_z = spectral_norm(z)
    limit = math.pi / (2.0 * norm_z) if norm_z > 0 else math.inf
    if not 0.0 < t <= limit * (1.0 + 1e-12):
        raise WindowError(f"t={t} outside the short-curve window (0, {limit}]")

    j0 = int(np.argmax(np.linalg.norm(z.entries, axis=0))) + 1
    certificate = certify_minimal(z, j0, tolerances.certificate, tolerances.orthogonality)
    qnorm = quotient_norm(z, cfg, certificates=[certificate.column_norm] if certificate.passed else ())
    minimal = certificate.passed or qnorm.value >= norm_z - tolerances.qnorm

    curve = OrbitCurve(z, b, (0.0, t))
    length = curve_length(curve, 0.0, t, quad, cfg)
    expected = t * norm_z
    length_residual = abs(length.value - expected) / max(expected, 1e-300)
    length_ok = length_residual <= tolerances.length and length.converged

    competitor_cfg = cfg.model_copy(
        update={
            "stage_iter": competitors.stage_iter,
            "polish_iter": competitors.polish_iter,
            "mu_final": max(cfg.mu_final, competitors.mu_final),
            "gap_target": max(cfg.gap_target, competitors.gap_target),
        }
    )
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(paths):
        direction = _random_antihermitian(rng, z.dim)
        result = perturbed_path_length(z, b, t, direction, competitors, competitor_cfg)
        result["status"] = _competitor_status(result, length.value, tolerances.length)
        results.append(result)
    statuses = [r["status"] for r in results]
    certified_lengths = [r["lower"] - r["error_estimate"] for r in results]
    margin = min(certified_lengths) - length.value if results else None

    if not minimal:
        verdict = "not-certified"
    elif not length_ok or "shorter" in statuses:
        verdict = "fail"
    elif "unresolved" in statuses:
        verdict = "inconclusive"
    else:
        verdict = "pass"
    logger.info(
        f"Short curve t={t:.6g}: L={length.value:.12g}, t||z||={expected:.12g}, "
        f"{statuses.count('longer')}/{paths} competitors certified longer, verdict={verdict}"
    )
    return {
        "check": "short-curve",
        "verdict": verdict,
        "residuals": {
            "length": {"value": length_residual, "tol": tolerances.length, "ok": length_ok},
            "competitor_margin": {
                "value": margin,
                "tol": -tolerances.length,
                "ok": all(s == "longer" for s in statuses),
            },
            "minimality": {
                "value": norm_z - qnorm.value,
                "tol": tolerances.qnorm,
                "ok": minimal,
            },
        },
        "params": {
            "t": t,
            "norm_z": norm_z,
            "length": length.value,
            "t_norm_z": expected,
            "quadrature": length.to_dict(),
            "certificate": certificate.to_dict(),
            "quotient_norm": qnorm.to_dict(),
            "competitor_lengths": certified_lengths,
            "competitor_upper_lengths": [r["upper"] + r["error_estimate"] for r in results],
            "competitor_status": statuses,
            "competitor_evaluations": sum(r["evaluations"] for r in results),
            "competitor_error_estimates": [r["error_estimate"] for r in results],
            "competitor_unconverged": sum(not r["converged"] for r in results),
            "epsilon": competitors.epsilon,
            "seed": seed,
        },
    }


def isotropy_check(b: DiagonalOp, d: Sequence[float]) -> float:
    """||e^{iD} b e^{-iD} - b|| for the diagonal unitary e^{iD}"""
    phases = np.exp(1j * np.asarray(d, dtype=float))
    if phases.shape != (b.dim,):
        raise ShapeError(f"expected {b.dim} phases, got {phases.shape}")
    u = np.diag(phases)
    return spectral_norm(u @ b.matrix() @ u.conj().T - b.matrix())


def length_additivity_check(
    curve: OrbitCurve,
    t: float,
    t_prime: float,
    quad: Optional[QuadratureSettings] = None,
    cfg: Optional[SolverSettings] = None,
) -> Dict[str, Any]:
    """L[lo, t] + L[t, t'] against L[lo, t']"""
    quad = quad or QuadratureSettings()
    lo = curve.domain[0]
    first = curve_length(curve, lo, t, quad, cfg)
    second = curve_length(curve, t, t_prime, quad, cfg)
    whole = curve_length(curve, lo, t_prime, quad, cfg)
    residual = abs(first.value + second.value - whole.value)
    tol = 3.0 * quad.atol
    ok = residual <= tol
    return {
        "check": "length-additivity",
        "verdict": "pass" if ok else "fail",
        "residuals": {"additivity": {"value": residual, "tol": tol, "ok": ok}},
        "params": {"t": t, "t_prime": t_prime, "parts": [first.value, second.value], "whole": whole.value},
    }


def speed_samples(curve: OrbitCurve, ts: Sequence[float], cfg: Optional[SolverSettings] = None) -> List[float]:
    speed = _SpeedFunction(curve, cfg)
    return [speed(t) for t in ts]
