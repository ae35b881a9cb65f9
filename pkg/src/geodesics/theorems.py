#!/usr/bin/env python3
"""
Checkers for the geodesic phenomena of the orbit: crossing factorization, the
logarithm bound for products of exponentials, column multiples at crossings, the
oscillating-diagonal obstruction, the local existence probe, uniqueness of minimal
lifts and the unitary-group membership diagnostic.

Every checker returns a report dict {check, verdict, residuals, params} where each
residual is {value, tol, ok}.
"""

from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging
import math

import numpy as np
import scipy.linalg as la
from scipy.optimize import minimize, minimize_scalar

from config import ProbeSettings, SolverSettings, Tolerances
from src.geodesics.sphere import sphere_curves_agree
from src.linalg.core import (
    AntiHermitianOp,
    MatrixLike,
    UnitaryMatrix,
    column,
    exp_antihermitian,
    log_unitary,
    spectral_norm,
)
from src.linalg.errors import (
    BranchCutError,
    HypothesisNotMetError,
    InvalidInputError,
    WindowError,
)
from src.minimality.certificates import certify_minimal
from src.minimality.quotient_norm import quotient_norm, smoothed_max_abs
from src.operators.factory import DiagonalOp, build_b, oscillation_profile

logger = logging.getLogger(__name__)

TOLERANCES = Tolerances()
CROSSING_WINDOW = math.log(2.0) / 8.0


def _residual(value: Optional[float], tol: float, ok: Optional[bool] = None) -> Dict[str, Any]:
    if ok is None:
        ok = value is not None and value <= tol
    return {"value": value, "tol": tol, "ok": bool(ok)}


def _verdict(residuals: Dict[str, Dict[str, Any]]) -> str:
    return "pass" if all(item["ok"] for item in residuals.values()) else "fail"


def _conjugate(u: np.ndarray, b: DiagonalOp) -> np.ndarray:
    return (u * b.entries.real) @ u.conj().T


def _offdiagonal(m: np.ndarray) -> np.ndarray:
    return m - np.diag(np.diag(m))


def crossing_factorization_check(
    z: AntiHermitianOp,
    v: AntiHermitianOp,
    t1: float,
    s1: float,
    b: Optional[DiagonalOp] = None,
    tolerances: Optional[Tolerances] = None,
    cfg: Optional[SolverSettings] = None,
) -> Dict[str, Any]:
    """
    Two lifts whose curves meet at e^{t1 z} b e^{-t1 z} = e^{s1 v} b e^{-s1 v}

    Verifies e^{t1 z} = e^{s1 v} e^{-Diag(s1 v) + Diag(t1 z)}, equality of the Finsler
    norms ||[s1 v]|| and ||[t1 z]||, and that D = log(e^{-s1 v} e^{t1 z}) is diagonal.

    Raises:
        WindowError: ||t1 z|| >= log(2)/8
        HypothesisNotMetError: the curves do not meet at the given parameters
    """
    tolerances = tolerances or TOLERANCES
    b = b or build_b(z.dim)
    tz = t1 * z.entries
    sv = s1 * v.entries
    norm_tz = spectral_norm(tz)
    if norm_tz >= CROSSING_WINDOW:
        raise WindowError(f"||t1 z|| = {norm_tz:.6g} is not below log(2)/8")

    e_tz = exp_antihermitian(tz).entries
    e_sv = exp_antihermitian(sv).entries
    endpoint = spectral_norm(_conjugate(e_tz, b) - _conjugate(e_sv, b))
    if endpoint > tolerances.crossing:
        raise HypothesisNotMetError(f"curves do not meet: endpoint residual {endpoint:.3e}")

    d_expected = np.diag(np.diag(tz) - np.diag(sv))
    factorization = spectral_norm(e_tz - e_sv @ exp_antihermitian(d_expected).entries)
    d = log_unitary(e_sv.conj().T @ e_tz).entries
    off_residual = float(np.max(np.abs(_offdiagonal(d))))
    d_residual = float(np.max(np.abs(d - d_expected)))

    q_tz = quotient_norm(tz, cfg)
    q_sv = quotient_norm(sv, cfg)
    norm_sv = spectral_norm(sv)
    v_minimal = norm_sv - q_sv.value <= tolerances.qnorm
    norm_residual = abs(q_sv.value - q_tz.value)

    residuals = {
        "endpoint": _residual(endpoint, tolerances.crossing),
        "factorization": _residual(factorization, tolerances.crossing),
        "d_offdiagonal": _residual(off_residual, tolerances.crossing),
        "d_expected": _residual(d_residual, tolerances.crossing),
        "norm_equality": _residual(norm_residual, tolerances.crossing),
    }
    verdict = _verdict(residuals)
    logger.info(f"Crossing factorization t1={t1:.6g} s1={s1:.6g}: verdict={verdict}")
    return {
        "check": "lemma53",
        "verdict": verdict,
        "residuals": residuals,
        "params": {
            "t1": t1,
            "s1": s1,
            "norm_t1z": norm_tz,
            "norm_s1v": norm_sv,
            "finsler_t1z": q_tz.value,
            "finsler_s1v": q_sv.value,
            "v_minimal": bool(v_minimal),
            "d_diagonal": [[float(x.real), float(x.imag)] for x in np.diag(d)],
        },
    }


def bch_log_bound_check(
    a: MatrixLike,
    b2: MatrixLike,
    tol: float = TOLERANCES.bch,
) -> Dict[str, Any]:
    """
    ||log(e^a e^b2)|| <= -(1/2) log(2 - e^{2||a|| + 2||b2||})

    Raises:
        WindowError: 2||a|| + 2||b2|| >= log 2
    """
    norm_a = spectral_norm(a)
    norm_b = spectral_norm(b2)
    exponent = 2.0 * norm_a + 2.0 * norm_b
    if exponent >= math.log(2.0):
        raise WindowError(f"2||a|| + 2||b|| = {exponent:.6g} is not below log 2")
    product = exp_antihermitian(a).entries @ exp_antihermitian(b2).entries
    lhs = spectral_norm(log_unitary(product))
    bound = -0.5 * math.log(2.0 - math.exp(exponent))
    margin = bound - lhs
    ok = lhs <= bound + tol
    return {
        "check": "bch",
        "verdict": "pass" if ok else "fail",
        "residuals": {"excess": _residual(lhs - bound, tol, ok)},
        "params": {"norm_a": norm_a, "norm_b": norm_b, "log_norm": lhs, "bound": bound, "margin": margin},
    }


def random_antihermitian(rng: np.random.Generator, n: int, norm: float, zero_diagonal: bool = False) -> np.ndarray:
    """Seeded random anti-Hermitian matrix scaled to the given spectral norm"""
    g = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    a = (g - g.conj().T) / 2
    if zero_diagonal:
        a = _offdiagonal(a)
    current = spectral_norm(a)
    return a * (norm / current) if current > 0 else a


def bch_random_trials(
    n: int,
    trials: int = 100,
    max_norm: float = 0.05,
    seed: int = 0,
    tol: float = TOLERANCES.bch,
) -> Dict[str, Any]:
    """Run the logarithm bound on seeded random pairs with norms up to max_norm"""
    rng = np.random.default_rng(seed)
    margins = []
    failures = 0
    for _ in range(trials):
        a = random_antihermitian(rng, n, max_norm * rng.uniform(0.0, 1.0))
        b2 = random_antihermitian(rng, n, max_norm * rng.uniform(0.0, 1.0))
        report = bch_log_bound_check(a, b2, tol)
        margins.append(report["params"]["margin"])
        failures += report["verdict"] != "pass"
    worst = min(margins) if margins else 0.0
    return {
        "check": "bch",
        "verdict": "pass" if failures == 0 else "fail",
        "residuals": {"failed_trials": _residual(float(failures), 0.0)},
        "params": {"n": n, "trials": trials, "max_norm": max_norm, "seed": seed, "min_margin": worst},
    }


def column_multiple_check(
    z: AntiHermitianOp,
    v: AntiHermitianOp,
    t0: float,
    s0: float,
    j0: int,
    b: Optional[DiagonalOp] = None,
    tolerances: Optional[Tolerances] = None,
) -> Dict[str, Any]:
    """
    Column-attained lifts whose curves cross at gamma(t0) = delta(s0) have
    proportional columns: s0 c_j0(v) = t0 c_j0(z), and v_{j0,j0} = 0.

    Hypothesis failures are reported in the residuals, never raised.
    """
    tolerances = tolerances or TOLERANCES
    b = b or build_b(z.dim)
    tol = tolerances.crossing
    cert_z = certify_minimal(z, j0, tolerances.certificate, tolerances.orthogonality)
    cert_v = certify_minimal(v, j0, tolerances.certificate, tolerances.orthogonality)
    crossing = spectral_norm(
        _conjugate(exp_antihermitian(z, t0).entries, b) - _conjugate(exp_antihermitian(v, s0).entries, b)
    )
    column_residual = float(np.linalg.norm(s0 * column(v, j0) - t0 * column(z, j0)))
    diagonal_entry = abs(complex(v.entries[j0 - 1, j0 - 1]))
    sphere = sphere_curves_agree(z, v, t0, s0, j0, tol)

    residuals = {
        "z_certified": _residual(cert_z.norm_gap, tolerances.certificate, cert_z.passed),
        "v_certified": _residual(cert_v.norm_gap, tolerances.certificate, cert_v.passed),
        "crossing": _residual(crossing, tol),
        "column": _residual(column_residual, tol),
        "v_j0_diagonal": _residual(diagonal_entry, tolerances.certificate),
    }
    verdict = _verdict(residuals)
    logger.info(f"Column multiple j0={j0}: column residual {column_residual:.3e}, verdict={verdict}")
    return {
        "check": "lemma58",
        "verdict": verdict,
        "residuals": residuals,
        "params": {"t0": t0, "s0": s0, "j0": j0, "sphere_agreement": sphere},
    }


def _tail_deviation(values: np.ndarray) -> Tuple[float, float]:
    """min over theta of max_j |values_j - i theta|"""
    imag = values.imag

    def spread(theta: float) -> float:
        return float(np.max(np.abs(values - 1j * theta)))

    lo, hi = float(np.min(imag)), float(np.max(imag))
    if hi - lo == 0.0:
        return spread(lo), lo
    result = minimize_scalar(spread, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13 * max(1.0, hi - lo)})
    return float(result.fun), float(result.x)


def obstruction_gap(
    z: AntiHermitianOp,
    t0: float,
    s0_grid: Sequence[float],
    tail_fraction: float = 0.25,
    guard_fraction: float = 0.125,
    control: bool = False,
    ratio_floor: float = 0.9,
) -> Dict[str, Any]:
    """
    Quantify why no lift with a single diagonal tail limit can reach e^{t0 z} b e^{-t0 z}

    For each s0 the crossing condition forces V_jj = (t0 z_jj - i (t0 - s0) ||z||) / s0.
    The tail deviation of V's diagonal from the nearest constant i theta must stay at
    least (t0/s0) gap / 2, where gap is the oscillation gap of z's diagonal.

    Args:
        control: accept a zero gap and report obstruction_present = False

    Raises:
        WindowError: t0 outside (0, log(2) / (8 ||z||))
        HypothesisNotMetError: zero gap without control
    """
    norm_z = spectral_norm(z)
    limit = CROSSING_WINDOW / norm_z if norm_z > 0 else math.inf
    if not 0.0 < t0 < limit:
        raise WindowError(f"t0={t0} outside (0, {limit})")
    diagonal = DiagonalOp.of(z)
    profile = oscillation_profile(diagonal, tail_fraction, guard_fraction)
    gap = profile.gap
    if gap <= 1e-12 * max(1.0, norm_z) and not control:
        raise HypothesisNotMetError("diagonal of z has no oscillation gap")

    start, stop = profile.window["start"] - 1, profile.window["stop"]
    tail = np.arange(start, stop)
    entries = diagonal.entries
    deviations = []
    thresholds = []
    ratios = []
    for s0 in s0_grid:
        forced = (t0 * entries[tail] - 1j * (t0 - s0) * norm_z) / s0
        deviation, _ = _tail_deviation(forced)
        threshold = (t0 / s0) * gap / 2.0
        deviations.append(deviation)
        thresholds.append(threshold)
        ratios.append(deviation / threshold if threshold > 0 else None)

    present = gap > 1e-12 * max(1.0, norm_z)
    if present:
        min_ratio = min(r for r in ratios if r is not None)
        ok = min_ratio >= ratio_floor
        residuals = {"min_ratio": _residual(min_ratio, ratio_floor, ok)}
    else:
        max_deviation = max(deviations) if deviations else 0.0
        residuals = {"control_deviation": _residual(max_deviation, 1e-6)}
    verdict = _verdict(residuals)
    logger.info(f"Obstruction gap={gap:.6g} present={present} verdict={verdict}")
    return {
        "check": "thm59",
        "verdict": verdict,
        "residuals": residuals,
        "params": {
            "t0": t0,
            "s0_grid": [float(s) for s in s0_grid],
            "gap": gap,
            "profile": profile.to_dict(),
            "deviations": deviations,
            "thresholds": thresholds,
            "ratios": ratios,
            "obstruction_present": bool(present),
        },
    }


def _unitary_angles(w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    t, vectors = la.schur(w, output="complex", check_finite=False)
    return np.angle(np.diag(t)), vectors


def hopf_rinow_probe(
    k: AntiHermitianOp,
    b: DiagonalOp,
    cfg: Optional[ProbeSettings] = None,
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
) -> Tuple[AntiHermitianOp, Dict[str, Any]]:
    """
    Find a minimal lift reaching rho = e^k b e^{-k}

    Minimizes g(d) = ||log(e^k e^{i Diag(d)})|| = max_j |arg eig| over real d, first on
    a log-sum-exp smoothing (derivative of each angle is |U_mj|^2), then by COBYLA
    on the epigraph form. Returns Z* = log(e^k e^{i Diag(d*)}) and a report; optimizer
    stagnation gives a non-converged report, not an exception.

    Raises:
        InvalidInputError: k has a nonzero diagonal
        WindowError: ||k|| exceeds the probe radius
    """
    cfg = cfg or ProbeSettings()
    tolerances = tolerances or TOLERANCES
    data = k.entries
    n = data.shape[0]
    if float(np.max(np.abs(np.diag(data)))) > tolerances.atol:
        raise InvalidInputError("probe expects k with zero diagonal")
    norm_k = spectral_norm(data)
    if norm_k > cfg.radius * (1.0 + 1e-12):
        raise WindowError(f"||k|| = {norm_k:.6g} exceeds probe radius {cfg.radius:.6g}")

    if norm_k == 0.0:
        zero = AntiHermitianOp(np.zeros((n, n), dtype=np.complex128))
        report = {
            "check": "hopf-rinow",
            "verdict": "pass",
            "residuals": {
                "endpoint": _residual(0.0, tolerances.endpoint),
                "minimality_witness": _residual(0.0, tolerances.minimality_witness),
            },
            "params": {"norm_k": 0.0, "norm_z": 0.0, "converged": True},
        }
        return zero, report

    e_k = exp_antihermitian(data).entries

    def angles(d: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return _unitary_angles(e_k * np.exp(1j * d)[None, :])

    def g(d: np.ndarray) -> float:
        return float(np.max(np.abs(angles(d)[0])))

    d = np.zeros(n)
    best_d, best_g = d.copy(), g(d)
    reference = best_g
    evaluations = 0
    if cfg.method == "smooth+cobyla":
        solver = solver or SolverSettings()
        mu = solver.mu_start * reference
        while mu >= solver.mu_final * reference:
            def smooth(x: np.ndarray, mu=mu):
                theta, vectors = angles(x)
                value, grad, _ = smoothed_max_abs(theta, vectors, mu)
                return value, grad

            result = minimize(smooth, d, jac=True, method="L-BFGS-B", options={"maxiter": solver.stage_iter})
            evaluations += int(result.nfev)
            d = result.x
            current = g(d)
            if current < best_g:
                best_d, best_g = d.copy(), current
            mu *= solver.mu_factor

    def constraints(x: np.ndarray) -> np.ndarray:
        theta = angles(x[:-1])[0]
        return np.concatenate([x[-1] - theta, x[-1] + theta])

    start = np.concatenate([best_d, [best_g]])
    polished = minimize(
        lambda x: x[-1],
        start,
        method="COBYLA",
        constraints=[{"type": "ineq", "fun": constraints}],
        options={"rhobeg": cfg.cobyla_rhobeg, "maxiter": cfg.cobyla_maxiter},
    )
    evaluations += int(getattr(polished, "nfev", 0))
    candidate = g(polished.x[:-1])
    if candidate < best_g:
        best_d, best_g = polished.x[:-1].copy(), candidate

    try:
        z_star = log_unitary(e_k * np.exp(1j * best_d)[None, :])
    except BranchCutError as e:
        logger.error(f"Probe lift hit the branch cut: {e}")
        raise

    target = _conjugate(e_k, b)
    e_z = exp_antihermitian(z_star).entries
    endpoint = spectral_norm(_conjugate(e_z, b) - target)
    norm_z = spectral_norm(z_star)
    qnorm = quotient_norm(z_star, solver)
    witness = norm_z - qnorm.value
    endpoint_ok = endpoint <= tolerances.endpoint
    witness_ok = witness <= tolerances.minimality_witness
    converged = bool(endpoint_ok and witness_ok)
    if not converged:
        logger.warning(f"Probe did not converge: endpoint={endpoint:.3e} witness={witness:.3e}")
    report = {
        "check": "hopf-rinow",
        "verdict": "pass" if converged else "fail",
        "residuals": {
            "endpoint": _residual(endpoint, tolerances.endpoint),
            "minimality_witness": _residual(witness, tolerances.minimality_witness),
        },
        "params": {
            "norm_k": norm_k,
            "norm_z": norm_z,
            "quotient_norm": qnorm.value,
            "radius": cfg.radius,
            "method": cfg.method,
            "evaluations": evaluations,
            "cobyla_success": bool(polished.success),
            "converged": converged,
        },
    }
    return z_star, report


def hopf_rinow_radius_sweep(
    b: DiagonalOp,
    radii: Sequence[float],
    trials: int = 5,
    seed: int = 0,
    cfg: Optional[ProbeSettings] = None,
    solver: Optional[SolverSettings] = None,
    tolerances: Optional[Tolerances] = None,
) -> Dict[str, Any]:
    """Largest radius at which every seeded random k with ||k|| = radius is reached by a minimal lift"""
    cfg = cfg or ProbeSettings()
    rng = np.random.default_rng(seed)
    rows: List[Dict[str, Any]] = []
    largest = None
    for radius in sorted(float(r) for r in radii):
        settings = cfg.model_copy(update={"radius": radius})
        passed = 0
        for _ in range(trials):
            k = AntiHermitianOp(random_antihermitian(rng, b.dim, radius, zero_diagonal=True))
            try:
                _, report = hopf_rinow_probe(k, b, settings, solver, tolerances)
                passed += report["verdict"] == "pass"
            except BranchCutError:
                logger.warning(f"Probe at radius {radius:.4g} hit the branch cut")
        rows.append({"radius": radius, "trials": trials, "passed": passed})
        if passed == trials:
            largest = radius
    logger.info(f"Radius sweep: largest fully successful radius {largest}")
    return {
        "check": "hopf-rinow-sweep",
        "verdict": "pass" if largest is not None else "fail",
        "residuals": {},
        "params": {"radii": rows, "largest_radius": largest, "seed": seed},
    }


def _minimality_status(
    x: AntiHermitianOp,
    tolerances: Tolerances,
    cfg: Optional[SolverSettings],
) -> Dict[str, Any]:
    """Certificate at the largest column, or a quotient-norm witness without uniqueness"""
    j0 = int(np.argmax(np.linalg.norm(x.entries, axis=0))) + 1
    certificate = certify_minimal(x, j0, tolerances.certificate, tolerances.orthogonality)
    if certificate.passed:
        return {"minimal": True, "unique": certificate.nonzero_column_ok, "j0": j0, "source": "certificate"}
    qnorm = quotient_norm(x, cfg)
    minimal = spectral_norm(x) - qnorm.value <= tolerances.qnorm
    return {"minimal": bool(minimal), "unique": False, "j0": j0, "source": "quotient-norm"}


def unique_lift_check(
    z: AntiHermitianOp,
    v: AntiHermitianOp,
    b: DiagonalOp,
    tolerances: Optional[Tolerances] = None,
    cfg: Optional[SolverSettings] = None,
) -> Dict[str, Any]:
    """
    Minimal lifts with equal initial velocity coincide

    Verdict "inconclusive" when a lift is not minimal, when uniqueness of its
    minimizing diagonal is not certified, or when the velocities differ.
    """
    tolerances = tolerances or TOLERANCES
    tol = tolerances.crossing
    diff = v.entries - z.entries
    bm = b.matrix()
    velocity = spectral_norm(diff @ bm - bm @ diff)
    velocity_match = velocity <= tol
    status_z = _minimality_status(z, tolerances, cfg)
    status_v = _minimality_status(v, tolerances, cfg)
    distance = spectral_norm(diff)

    hypotheses = velocity_match and all(s["minimal"] and s["unique"] for s in (status_z, status_v))
    if not hypotheses:
        verdict = "inconclusive"
    else:
        verdict = "pass" if distance <= 3.0 * tol else "fail"
    return {
        "check": "unique-lift",
        "verdict": verdict,
        "residuals": {
            "velocity": _residual(velocity, tol),
            "distance": _residual(distance, 3.0 * tol),
        },
        "params": {"velocity_match": bool(velocity_match), "z": status_z, "v": status_v},
    }


def unitary_membership_diagnostic(
    u: UnitaryMatrix,
    tail_fraction: float = 0.25,
    threshold: float = 1e-3,
) -> Dict[str, Any]:
    """
    Does u look like e^K e^{i theta} with K compact?

    theta is the argument of the mean trailing diagonal entry; the tail residual is
    ||(u - e^{i theta} I) restricted to the trailing block||, small for members.
    """
    data = u.entries
    n = data.shape[0]
    width = max(1, int(math.ceil(tail_fraction * n)))
    tail = slice(n - width, n)
    theta = float(np.angle(np.mean(np.diag(data)[tail])))
    phase = np.exp(1j * theta)
    block = (data - phase * np.eye(n))[tail, tail]
    tail_residual = spectral_norm(block)
    decomposition = None
    k_norm = None
    try:
        k = log_unitary(data * np.conj(phase))
        rebuilt = exp_antihermitian(k).entries * phase
        decomposition = spectral_norm(data - rebuilt)
        k_norm = spectral_norm(k)
    except BranchCutError:
        logger.warning("u e^{-i theta} has eigenvalue -1; no principal decomposition")
    member_like = tail_residual <= threshold
    return {
        "check": "membership",
        "verdict": "pass" if member_like else "fail",
        "residuals": {
            "tail": _residual(tail_residual, threshold),
            "decomposition": _residual(
                decomposition, TOLERANCES.utol, decomposition is not None and decomposition <= TOLERANCES.utol
            ),
        },
        "params": {"theta": theta, "tail_width": width, "k_norm": k_norm, "member_like": bool(member_like)},
    }
