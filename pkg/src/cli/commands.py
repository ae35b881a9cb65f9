#!/usr/bin/env python3
"""
Command implementations: build, verify, curve, qnorm, probe

Each command takes a validated RunConfig, writes its artifacts under
config.output_dir and returns what it wrote so app.py can print it.
"""

from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple
import asyncio
import logging
import math

import numpy as np

from config import RunConfig
from src.cli.reports import (
    check_seeds,
    combine,
    curve_table,
    error_report,
    passed,
    suite_report,
    to_jsonable,
    write_csv,
    write_report,
)
from src.geodesics.curves import OrbitCurve, curve_length, speed_samples, verify_short_curve
from src.geodesics.sphere import reflection_r0, sphere_geodesic_check, sphere_velocity
from src.geodesics.theorems import (
    bch_random_trials,
    column_multiple_check,
    crossing_factorization_check,
    hopf_rinow_probe,
    hopf_rinow_radius_sweep,
    obstruction_gap,
    random_antihermitian,
    unitary_membership_diagnostic,
)
from src.linalg.core import AntiHermitianOp, UnitaryMatrix, column, exp_antihermitian, spectral_norm
from src.linalg.errors import ConfigError, OrbitGeodesicsError
from src.minimality.certificates import certify_minimal
from src.minimality.quotient_norm import infimum_equality_check, quotient_norm
from src.operators.factory import OperatorBundle, TruncationSpec, build_all, build_b
from src.operators.serialization import diagonal_to_dict, load_operator, operator_to_dict, write_json

logger = logging.getLogger(__name__)

CheckFunction = Callable[[RunConfig, OperatorBundle, int], Dict[str, Any]]


def build_bundle(config: RunConfig) -> OperatorBundle:
    spec = TruncationSpec(config.n, config.gamma, config.delta)
    values = config.b_values if config.b_rule == "user-list" else None
    return build_all(spec, values)


def cmd_build(config: RunConfig) -> Dict[str, Path]:
    """Write z_dg.json, z_o.json, z2.json, b.json and d0.json"""
    bundle = build_bundle(config)
    warnings = []
    if not bundle.spec.satisfies_construction:
        warnings.append(
            f"gamma={bundle.spec.gamma} and delta={bundle.spec.delta} do not satisfy "
            "gamma^2 = delta and delta^2 < gamma"
        )
    metadata = {"spec": bundle.spec.to_dict(), "tail_bound": bundle.tail_bound, "warnings": warnings}
    out = Path(config.output_dir)
    documents = {
        "z_dg": operator_to_dict(bundle.z_dg, bundle.spec, metadata),
        "z_o": operator_to_dict(bundle.z_o, bundle.spec, metadata),
        "z2": operator_to_dict(bundle.z2, bundle.spec, metadata),
        "b": diagonal_to_dict(bundle.b, metadata),
        "d0": diagonal_to_dict(bundle.d0, metadata),
    }
    written = {name: write_json(out / f"{name}.json", document) for name, document in documents.items()}
    logger.info(f"Built {len(written)} operators at n={config.n} into {out}")
    return written


def _crossing_time(z: AntiHermitianOp) -> float:
    return math.log(2.0) / (16.0 * spectral_norm(z))


def _check_certify(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    tol = config.tolerances
    certificate = certify_minimal(bundle.z2, 1, tol.certificate, tol.orthogonality)
    return {
        "check": "certify",
        "verdict": certificate.verdict,
        "residuals": {
            "norm_gap": {"value": certificate.norm_gap, "tol": tol.certificate, "ok": certificate.norm_gap <= tol.certificate},
            "orthogonality": {
                "value": certificate.max_orthogonality_residual,
                "tol": tol.orthogonality,
                "ok": certificate.max_orthogonality_residual <= tol.orthogonality,
            },
            "diagonal_j0": {
                "value": abs(certificate.diagonal_entry_j0),
                "tol": tol.certificate,
                "ok": abs(certificate.diagonal_entry_j0) <= tol.certificate,
            },
        },
        "params": certificate.to_dict(),
    }


def _check_qnorm(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    tol = config.tolerances
    result = quotient_norm(bundle.z_o, config.solver)
    expected = float(np.linalg.norm(column(bundle.z_o, 1)))
    residual = abs(result.value - expected)
    equality = infimum_equality_check(bundle.z_o, (-0.5, 0.0, 0.5), config.solver, tol.qnorm)
    main = {
        "check": "qnorm-value",
        "verdict": "pass" if residual <= tol.qnorm else "fail",
        "residuals": {"column_norm": {"value": residual, "tol": tol.qnorm, "ok": residual <= tol.qnorm}},
        "params": {"expected": expected, "result": result.to_dict()},
    }
    return combine("qnorm", {"value": main, "infimum_equality": equality})


def _check_short_curve(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    t = math.pi / (4.0 * spectral_norm(bundle.z2))
    report = verify_short_curve(
        bundle.z2,
        bundle.b,
        t,
        paths=config.competitor_paths,
        seed=seed,
        tolerances=config.tolerances,
        quad=config.quadrature,
        cfg=config.solver,
        competitors=config.competitors,
    )
    return report


def _check_sphere(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    _, state = reflection_r0(1, bundle.z2.dim, bundle.z2)
    t_end = math.pi / (4.0 * spectral_norm(bundle.z2))
    grid = np.linspace(0.0, t_end, 4)
    return sphere_geodesic_check(bundle.z2, state, grid, bundle.b, config.tolerances, config.quadrature, config.solver)


def _check_bch(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    return bch_random_trials(config.n, config.bch_trials, 0.05, seed, config.tolerances.bch)


def _check_lemma53(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    z = bundle.z2
    t1 = _crossing_time(z)
    shifted = AntiHermitianOp(z.entries + 0.3j * np.eye(z.dim))
    parts = {
        "same_lift": crossing_factorization_check(z, z, t1, t1, bundle.b, config.tolerances, config.solver),
        "scalar_shift": crossing_factorization_check(z, shifted, t1, t1, bundle.b, config.tolerances, config.solver),
    }
    return combine("lemma53", parts)


def _check_lemma58(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    z = bundle.z2
    t0 = _crossing_time(z)
    s0 = 0.5 * t0
    v = AntiHermitianOp((t0 / s0) * z.entries)
    bumped = np.array(v.entries)
    bumped[1, 0] += 1e-3j
    bumped[0, 1] += 1e-3j
    parts = {
        "rescaled": column_multiple_check(z, v, t0, s0, 1, bundle.b, config.tolerances),
        "perturbed": column_multiple_check(z, AntiHermitianOp(bumped), t0, s0, 1, bundle.b, config.tolerances),
    }
    return combine("lemma58", parts, {"perturbed": False})


def _check_thm59(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    z = bundle.z2
    norm_z = spectral_norm(z)
    t0 = _crossing_time(z)
    grid = np.linspace(0.0, math.pi / (2.0 * norm_z), config.obstruction_grid + 1)[1:]
    off = z.entries - np.diag(np.diag(z.entries))
    constant = AntiHermitianOp(off + 0.5j * np.eye(z.dim))
    parts = {
        "obstruction": obstruction_gap(z, t0, grid, config.tail_fraction, config.guard_fraction),
        "control": obstruction_gap(
            constant, _crossing_time(constant), grid, config.tail_fraction, config.guard_fraction, control=True
        ),
    }
    return combine("thm59", parts)


def _check_hopf_rinow(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    probe = config.probe
    b = build_b(probe.dim)
    rng = np.random.default_rng(seed)
    parts = {}
    for trial in range(probe.trials):
        k = AntiHermitianOp(random_antihermitian(rng, probe.dim, probe.k_norm, zero_diagonal=True))
        _, report = hopf_rinow_probe(k, b, probe, config.solver, config.tolerances)
        parts[f"trial_{trial:02d}"] = report
    return combine("hopf-rinow", parts)


def _check_membership(config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    z = bundle.z2.entries
    off = AntiHermitianOp(z - np.diag(np.diag(z)))
    member = UnitaryMatrix(exp_antihermitian(off, 0.1).entries * np.exp(0.2j))
    return unitary_membership_diagnostic(member, config.tail_fraction)


CHECKS: Dict[str, CheckFunction] = {
    "bch": _check_bch,
    "certify": _check_certify,
    "hopf-rinow": _check_hopf_rinow,
    "lemma53": _check_lemma53,
    "lemma58": _check_lemma58,
    "membership": _check_membership,
    "qnorm": _check_qnorm,
    "short-curve": _check_short_curve,
    "sphere": _check_sphere,
    "thm59": _check_thm59,
}


def run_check(name: str, config: RunConfig, bundle: OperatorBundle, seed: int) -> Dict[str, Any]:
    """Run one named check; workbench errors become an "error" verdict"""
    logger.info(f"Running check {name}")
    try:
        report = CHECKS[name](config, bundle, seed)
    except OrbitGeodesicsError as e:
        logger.error(f"Check {name} raised {type(e).__name__}: {e}")
        return error_report(name, e)
    report["check"] = name
    logger.info(f"Check {name}: {report['verdict']}")
    return report


async def _run_parallel(config: RunConfig, bundle: OperatorBundle, seeds: Dict[str, int]) -> List[Dict[str, Any]]:
    gate = asyncio.Semaphore(config.workers)

    async def guarded(name: str) -> Dict[str, Any]:
        async with gate:
            return await asyncio.to_thread(run_check, name, config, bundle, seeds[name])

    return await asyncio.gather(*(guarded(name) for name in sorted(config.suite)))


def cmd_verify(config: RunConfig) -> Tuple[Dict[str, Any], int]:
    """
    Run the selected checks and write report.json

    Returns:
        (suite report, exit status) with status 0 iff every check passed
    """
    bundle = build_bundle(config)
    names = sorted(set(config.suite))
    seeds = check_seeds(config.seed, names)
    if config.workers > 1:
        reports = asyncio.run(_run_parallel(config, bundle, seeds))
    else:
        reports = [run_check(name, config, bundle, seeds[name]) for name in names]
    report = suite_report(config, {r["check"]: r for r in reports})
    write_report(Path(config.output_dir) / "report.json", report)
    status = 0 if report["passed"] else 1
    logger.info(f"Verify finished: {sum(passed(r) for r in reports)}/{len(reports)} passed")
    return report, status


def cmd_curve(config: RunConfig, t_max: Optional[float] = None, samples: Optional[int] = None) -> Path:
    """
    Sample the Z2 geodesic and write curve.csv

    Columns: t, cumulative_length, speed, t_norm_z, sphere_speed, window_ok (t within
    the short-curve window pi / (2 ||z||)).
    """
    bundle = build_bundle(config)
    z, b = bundle.z2, bundle.b
    norm_z = spectral_norm(z)
    window = math.pi / (2.0 * norm_z)
    t_max = t_max or config.t_max or math.pi / (4.0 * norm_z)
    samples = samples or config.samples
    if t_max > window:
        logger.warning(f"t_max={t_max:.6g} exceeds the short-curve window {window:.6g}")

    ts = np.linspace(0.0, t_max, samples)
    curve = OrbitCurve(z, b, (0.0, float(t_max)))
    speeds = speed_samples(curve, ts, config.solver)
    _, state = reflection_r0(1, z.dim, z)
    rows = []
    cumulative = 0.0
    for i, t in enumerate(ts):
        if i > 0:
            cumulative += curve_length(curve, float(ts[i - 1]), float(t), config.quadrature, config.solver).value
        rows.append(
            {
                "t": float(t),
                "cumulative_length": cumulative,
                "speed": speeds[i],
                "t_norm_z": float(t) * norm_z,
                "sphere_speed": float(np.linalg.norm(sphere_velocity(z, state, float(t)))),
                "window_ok": bool(t <= window),
            }
        )
    return write_csv(curve_table(rows), Path(config.output_dir) / "curve.csv")


def cmd_qnorm(config: RunConfig, operator: str = "z_o") -> Dict[str, Any]:
    """Quotient norm of a built operator (z_dg, z_o, z2) or of a serialized one"""
    if operator in ("z_dg", "z_o", "z2"):
        x = getattr(build_bundle(config), operator)
    else:
        # unreadable or malformed operator files are usage errors, not numerical ones
        try:
            x = load_operator(operator)
            if not isinstance(x, AntiHermitianOp):
                x = AntiHermitianOp(x.entries)
        except (OSError, ValueError, AttributeError) as e:
            raise ConfigError(f"cannot use operator {operator!r}: {e}") from e
    result = to_jsonable(quotient_norm(x, config.solver).to_dict())
    write_json(Path(config.output_dir) / "qnorm.json", result)
    return result


def cmd_probe(config: RunConfig) -> Dict[str, Any]:
    """Radius sweep of the local existence probe; writes probe.json"""
    probe = config.probe
    seed = check_seeds(config.seed, ["hopf-rinow"])["hopf-rinow"]
    report = hopf_rinow_radius_sweep(
        build_b(probe.dim), probe.radii, probe.trials, seed, probe, config.solver, config.tolerances
    )
    report = to_jsonable(report)
    write_json(Path(config.output_dir) / "probe.json", report)
    return report
