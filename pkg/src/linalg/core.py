#!/usr/bin/env python3
"""
Dense complex linear algebra primitives for the orbit geodesics workbench

Finite truncations of operators on l^2 are held as immutable N x N complex
matrices. Exponentials and logarithms go through Hermitian eigendecompositions
(or a complex Schur form for unitaries), so unitarity and anti-Hermiticity hold
by construction rather than up to a series truncation.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Tuple, Union
import logging

import numpy as np
import scipy.linalg as la

from config import Tolerances
from src.linalg.errors import (  # noqa: F401
    BranchCutError,
    CertificateError,
    ConfigError,
    DegenerateBaseError,
    DegenerateColumnError,
    DomainError,
    HypothesisNotMetError,
    IndexOutOfRangeError,
    InsufficientDataError,
    InvalidInputError,
    NumericalError,
    OrbitGeodesicsError,
    ShapeError,
    SizeError,
    WindowError,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class ComplexMatrix:
    """Dense N x N complex matrix; entries are copied and frozen on construction"""

    entries: np.ndarray

    def __post_init__(self):
        data = np.array(self.entries, dtype=np.complex128)
        if data.ndim != 2 or data.shape[0] != data.shape[1]:
            raise ShapeError(f"expected a square matrix, got shape {data.shape}")
        if data.shape[0] < 1:
            raise SizeError("matrix dimension must be at least 1")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("matrix has non-finite entries")
        data.setflags(write=False)
        object.__setattr__(self, "entries", data)
        self._validate()

    def _validate(self):
        pass

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def adjoint(self) -> np.ndarray:
        return self.entries.conj().T

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)


@dataclass(frozen=True)
class AntiHermitianOp(ComplexMatrix):
    """Matrix with m* = -m up to an entrywise residual atol"""

    atol: float = field(default=DEFAULT_TOLERANCES.atol, compare=False)

    def _validate(self):
        residual = anti_hermitian_residual(self.entries)
        if residual > self.atol:
            raise InvalidInputError(f"matrix is not anti-Hermitian: max|m + m*| = {residual:.3e} > {self.atol:.1e}")

    @classmethod
    def project(cls, a: "MatrixLike") -> "AntiHermitianOp":
        """Anti-Hermitian part (a - a*)/2, exact by construction"""
        data = as_array(a)
        return cls((data - data.conj().T) / 2)

    def hermitian_generator(self) -> np.ndarray:
        """H = -i m, Hermitian, so that m = iH"""
        h = -1j * self.entries
        return (h + h.conj().T) / 2


@dataclass(frozen=True)
class UnitaryMatrix(ComplexMatrix):
    """Matrix with ||m* m - I|| <= utol in spectral norm"""

    utol: float = field(default=DEFAULT_TOLERANCES.utol, compare=False)

    def _validate(self):
        residual = unitarity_residual(self.entries)
        if residual > self.utol:
            raise InvalidInputError(f"matrix is not unitary: ||m*m - I|| = {residual:.3e} > {self.utol:.1e}")


MatrixLike = Union[ComplexMatrix, np.ndarray]


def as_array(m: MatrixLike) -> np.ndarray:
    """Complex ndarray view of a matrix-like value, validated for finiteness"""
    if isinstance(m, ComplexMatrix):
        return m.entries
    data = np.asarray(m, dtype=np.complex128)
    if data.ndim != 2 or data.shape[0] != data.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {data.shape}")
    if not np.all(np.isfinite(data)):
        raise InvalidInputError("matrix has non-finite entries")
    return data


def anti_hermitian_residual(m: MatrixLike) -> float:
    data = np.asarray(m.entries if isinstance(m, ComplexMatrix) else m, dtype=np.complex128)
    return float(np.max(np.abs(data + data.conj().T))) if data.size else 0.0


def hermitian_residual(m: MatrixLike) -> float:
    data = np.asarray(m.entries if isinstance(m, ComplexMatrix) else m, dtype=np.complex128)
    return float(np.max(np.abs(data - data.conj().T))) if data.size else 0.0


def unitarity_residual(m: MatrixLike) -> float:
    data = np.asarray(m.entries if isinstance(m, ComplexMatrix) else m, dtype=np.complex128)
    return float(np.linalg.norm(data.conj().T @ data - np.eye(data.shape[0]), 2))


def is_hermitian(m: MatrixLike, atol: float = DEFAULT_TOLERANCES.atol) -> bool:
    return hermitian_residual(m) <= atol


def is_antihermitian(m: MatrixLike, atol: float = DEFAULT_TOLERANCES.atol) -> bool:
    return anti_hermitian_residual(m) <= atol


def spectral_norm(m: MatrixLike, method: str = "svd", rtol: float = 1e-10) -> float:
    """
    Largest singular value of m

    Args:
        m: matrix
        method: "svd" (full singular values) or "power" (power iteration on m*m,
            relative tolerance rtol, at most 10*dim iterations, falls back to svd)

    Returns:
        sigma_max(m)
    """
    data = as_array(m)
    if data.shape[0] == 1:
        return float(abs(data[0, 0]))
    if method == "power":
        value = _power_norm(data, rtol)
        if value is not None:
            return value
        logger.warning("Power iteration did not converge; falling back to SVD")
    try:
        return float(la.svdvals(data, check_finite=False)[0])
    except la.LinAlgError as e:
        raise NumericalError(f"SVD failed: {e}", {"dim": data.shape[0]}) from e


def _power_norm(data: np.ndarray, rtol: float):
    n = data.shape[0]
    gram = data.conj().T @ data
    x = np.ones(n, dtype=np.complex128) + 1e-3 * np.arange(n)
    x /= np.linalg.norm(x)
    previous = 0.0
    for _ in range(10 * n):
        y = gram @ x
        norm_y = np.linalg.norm(y)
        if norm_y == 0.0:
            return 0.0
        x = y / norm_y
        estimate = float(np.sqrt(np.real(np.vdot(x, gram @ x))))
        if abs(estimate - previous) <= rtol * max(estimate, 1e-300):
            return estimate
        previous = estimate
    return None


def column(m: MatrixLike, j: int) -> np.ndarray:
    """c_j(m) = (m_1j, ..., m_Nj) with a 1-based index j"""
    data = as_array(m)
    n = data.shape[0]
    if not 1 <= j <= n:
        raise IndexOutOfRangeError(f"column index {j} outside 1..{n}")
    return data[:, j - 1].copy()


def inner(x: np.ndarray, y: np.ndarray) -> complex:
    """<x, y> = sum_k x_k conj(y_k)"""
    return complex(np.vdot(y, x))


def commutator(a: MatrixLike, b: MatrixLike) -> ComplexMatrix:
    """ab - ba"""
    left, right = as_array(a), as_array(b)
    if left.shape != right.shape:
        raise ShapeError(f"commutator of shapes {left.shape} and {right.shape}")
    return ComplexMatrix(left @ right - right @ left)


def spectral_decomposition(a: MatrixLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of an anti-Hermitian a through the Hermitian -i a

    Returns:
        (eigenvalues w, eigenvectors v) with a = v diag(i w) v*
    """
    data = as_array(a)
    h = -1j * data
    h = (h + h.conj().T) / 2
    try:
        w, v = la.eigh(h, check_finite=False)
    except la.LinAlgError as e:
        condition: Dict[str, Any] = {
            "dim": data.shape[0],
            "norm": float(np.linalg.norm(data)),
            "anti_hermitian_residual": anti_hermitian_residual(data),
        }
        raise NumericalError(f"Hermitian eigensolver failed: {e}", condition) from e
    return w, v


def exp_antihermitian(a: MatrixLike, t: float = 1.0) -> UnitaryMatrix:
    """e^{t a} for anti-Hermitian a, unitary by construction"""
    w, v = spectral_decomposition(a)
    u = (v * np.exp(1j * t * w)) @ v.conj().T
    return UnitaryMatrix(u)


def dexp_antihermitian(a: MatrixLike, direction: MatrixLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    e^{a} and its Frechet derivative in the given direction (Daleckii-Krein formula)

    Returns:
        (exp, dexp) as arrays
    """
    w, v = spectral_decomposition(a)
    # divided differences of e^{iw}, written with sinc so near-equal w stay accurate
    half_sum = (w[:, None] + w[None, :]) / 2
    half_diff = (w[:, None] - w[None, :]) / 2
    omega = np.exp(1j * half_sum) * np.sinc(half_diff / np.pi)
    rotated = v.conj().T @ as_array(direction) @ v
    dexp = v @ (rotated * omega) @ v.conj().T
    exp = (v * np.exp(1j * w)) @ v.conj().T
    return exp, dexp


def log_unitary(u: MatrixLike, branch_tol: float = DEFAULT_TOLERANCES.branch_angle) -> AntiHermitianOp:
    """
    Principal anti-Hermitian logarithm of a unitary

    Uses the complex Schur form, which is diagonal for normal matrices and keeps
    an orthonormal eigenbasis even for repeated eigenvalues.

    Raises:
        BranchCutError: an eigenvalue lies within branch_tol (radians) of -1
    """
    data = as_array(u)
    try:
        t, z = la.schur(data, output="complex", check_finite=False)
    except la.LinAlgError as e:
        raise NumericalError(f"Schur decomposition failed: {e}", {"dim": data.shape[0]}) from e
    angles = np.angle(np.diag(t))
    distance = np.pi - np.abs(angles)
    if np.any(distance <= branch_tol):
        worst = int(np.argmin(distance))
        raise BranchCutError(f"eigenvalue {np.diag(t)[worst]:.6g} is within {branch_tol:.1e} rad of -1")
    log = (z * (1j * angles)) @ z.conj().T
    return AntiHermitianOp.project(log)
