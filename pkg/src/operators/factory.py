#!/usr/bin/env python3
"""
Operator Factory
Builds finite truncations of the Z_{delta,gamma} family, the minimal operator Z2,
the base point b and the oscillating diagonal D0, with truncation bookkeeping.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Literal, Optional, Sequence
import logging
import math

import numpy as np

from src.linalg.core import (
    DEFAULT_TOLERANCES,
    AntiHermitianOp,
    MatrixLike,
    as_array,
    column,
    spectral_norm,
)
from src.linalg.errors import (
    DegenerateBaseError,
    DegenerateColumnError,
    IndexOutOfRangeError,
    InsufficientDataError,
    InvalidInputError,
    SizeError,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TruncationSpec:
    """Leading n x n truncation of Z_{delta,gamma}"""

    n: int
    gamma: float = 0.5
    delta: float = 0.25

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise SizeError(f"truncation dimension must be a positive integer, got {self.n}")
        for name, value in (("gamma", self.gamma), ("delta", self.delta)):
            if not 0.0 < value < 1.0:
                raise InvalidInputError(f"{name} must lie in (0, 1), got {value}")

    @property
    def satisfies_construction(self) -> bool:
        """gamma^2 = delta and delta^2 < gamma, needed for Z_o and Z2"""
        return math.isclose(self.gamma ** 2, self.delta, rel_tol=1e-12) and self.delta ** 2 < self.gamma

    def to_dict(self) -> Dict[str, Any]:
        return {
            "n": int(self.n),
            "gamma": float(self.gamma),
            "delta": float(self.delta),
            "satisfies_construction": self.satisfies_construction,
        }


@dataclass(frozen=True)
class DiagonalOp:
    """Diagonal operator stored by its entries"""

    entries: np.ndarray
    hermitian_kind: Literal["hermitian", "anti-hermitian"] = "anti-hermitian"
    atol: float = field(default=DEFAULT_TOLERANCES.atol, compare=False)

    def __post_init__(self):
        data = np.array(self.entries, dtype=np.complex128).reshape(-1)
        if data.size < 1:
            raise SizeError("diagonal operator needs at least one entry")
        if not np.all(np.isfinite(data)):
            raise InvalidInputError("diagonal has non-finite entries")
        if self.hermitian_kind == "hermitian":
            bad = np.max(np.abs(data.imag))
        elif self.hermitian_kind == "anti-hermitian":
            bad = np.max(np.abs(data.real))
        else:
            raise InvalidInputError(f"unknown hermitian_kind {self.hermitian_kind!r}")
        if bad > self.atol:
            raise InvalidInputError(f"{self.hermitian_kind} diagonal violated by {bad:.3e}")
        data.setflags(write=False)
        object.__setattr__(self, "entries", data)

    @classmethod
    def from_imaginary(cls, d: Sequence[float]) -> "DiagonalOp":
        """i * Diag(d) for a real vector d"""
        return cls(1j * np.asarray(d, dtype=float), "anti-hermitian")

    @classmethod
    def of(cls, m: MatrixLike, hermitian_kind: str = "anti-hermitian") -> "DiagonalOp":
        """Diagonal part of a matrix"""
        return cls(np.diag(as_array(m)).copy(), hermitian_kind)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def real_values(self) -> np.ndarray:
        """Real parameters: entries for Hermitian, Im(entries) for anti-Hermitian"""
        return self.entries.real.copy() if self.hermitian_kind == "hermitian" else self.entries.imag.copy()

    def matrix(self) -> np.ndarray:
        return np.diag(self.entries)

    def as_operator(self) -> AntiHermitianOp:
        if self.hermitian_kind != "anti-hermitian":
            raise InvalidInputError("only an anti-Hermitian diagonal is an anti-Hermitian operator")
        return AntiHermitianOp(self.matrix())


@dataclass(frozen=True)
class OscillationProfile:
    """Parity-class tail estimates of a diagonal"""

    even_estimate: complex
    odd_estimate: complex
    gap: float
    stability: Optional[float]
    window: Dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "even_estimate": [self.even_estimate.real, self.even_estimate.imag],
            "odd_estimate": [self.odd_estimate.real, self.odd_estimate.imag],
            "gap": self.gap,
            "stability": self.stability,
            "window": dict(self.window),
        }


@dataclass(frozen=True)
class OperatorBundle:
    """Everything cmd_build writes, plus the truncation metadata"""

    spec: TruncationSpec
    z_dg: AntiHermitianOp
    z_o: AntiHermitianOp
    z2: AntiHermitianOp
    b: DiagonalOp
    d0: DiagonalOp
    tail_bound: float


def _entry_value(k: np.ndarray, gamma: float, delta: float) -> np.ndarray:
    """Real value carried by every off-diagonal entry whose larger 1-based index is k"""
    even = k % 2 == 0
    return np.where(even, -(delta ** (k // 2)), gamma ** ((k - 1) // 2))


def build_zdg(spec: TruncationSpec) -> AntiHermitianOp:
    """
    N x N truncation of Z_{delta,gamma}

    The first row reads i(0, -delta, gamma, -delta^2, gamma^2, ...) and every entry
    (r, c) with r != c repeats the value of row 1 at index max(r, c).
    """
    if spec.n < 2:
        raise SizeError(f"Z_dg needs n >= 2, got {spec.n}")
    idx = np.arange(1, spec.n + 1)
    k = np.maximum.outer(idx, idx)
    values = _entry_value(k, spec.gamma, spec.delta).astype(float)
    np.fill_diagonal(values, 0.0)
    logger.debug(f"Built Z_dg n={spec.n} gamma={spec.gamma} delta={spec.delta}")
    return AntiHermitianOp(1j * values)


def strip_first(z: AntiHermitianOp) -> AntiHermitianOp:
    """Z^[1]: z with its first row and column zeroed"""
    if z.dim < 2:
        raise SizeError("strip_first needs dim >= 2")
    data = np.array(z.entries)
    data[0, :] = 0.0
    data[:, 0] = 0.0
    return AntiHermitianOp(data)


def orthogonalizing_diagonal(
    z: AntiHermitianOp,
    j0: int,
    atol: float = DEFAULT_TOLERANCES.atol,
) -> DiagonalOp:
    """
    Diagonal D with D_{j0,j0} = 0 making every column of z + D orthogonal to column j0

    For the zero-diagonal part w of z the entries are
    D_jj = -<c_j(w), c_j0(w)> / conj(w_{j,j0}), with <x, y> = sum x_k conj(y_k);
    the existing diagonal of z is then subtracted so that z + D carries them.

    Raises:
        DegenerateColumnError: some w_{j,j0} vanishes (names j, 1-based)
        InvalidInputError: z_{j0,j0} != 0, or no anti-Hermitian solution exists
    """
    n = z.dim
    if not 1 <= j0 <= n:
        raise IndexOutOfRangeError(f"j0={j0} outside 1..{n}")
    c = j0 - 1
    data = z.entries
    if abs(data[c, c]) > atol:
        raise InvalidInputError(f"z has a nonzero diagonal entry at j0={j0}: {data[c, c]:.3e}")

    w = np.array(data)
    np.fill_diagonal(w, 0.0)
    pivot = w[:, c]
    others = [j for j in range(n) if j != c]
    zero_rows = [j for j in others if pivot[j] == 0.0]
    if zero_rows:
        raise DegenerateColumnError(zero_rows[0] + 1)

    # <c_j(w), c_j0(w)> for every j at once
    inner = w.T @ pivot.conj()
    d = np.zeros(n, dtype=np.complex128)
    d[others] = -inner[others] / pivot[others].conj()
    real_part = float(np.max(np.abs(d.real)))
    scale = max(1.0, float(np.max(np.abs(d))))
    if real_part > atol * scale * n:
        raise InvalidInputError(
            f"orthogonalizing diagonal has real part {real_part:.3e}; no anti-Hermitian solution"
        )
    d[others] -= np.diag(data)[others]
    return DiagonalOp(1j * d.imag)


def build_zo(spec: TruncationSpec) -> AntiHermitianOp:
    """Z_o = (||Z^[1] + D0|| / ||c_1(Z_dg)||) (Z_dg - Z^[1]) + Z^[1]"""
    if not spec.satisfies_construction:
        logger.warning(f"gamma={spec.gamma}, delta={spec.delta} do not satisfy gamma^2 = delta, delta^2 < gamma")
    z_dg = build_zdg(spec)
    z_1 = strip_first(z_dg)
    d0 = orthogonalizing_diagonal(z_dg, 1)
    numerator = spectral_norm(z_1.entries + d0.matrix())
    denominator = float(np.linalg.norm(column(z_dg, 1)))
    scale = numerator / denominator
    z_o = scale * (z_dg.entries - z_1.entries) + z_1.entries
    logger.debug(f"Built Z_o n={spec.n} first-column scale={scale:.12g}")
    return AntiHermitianOp(z_o)


def build_z2(spec: TruncationSpec) -> AntiHermitianOp:
    """Z2 = Z_o + D0 with D0 the orthogonalizing diagonal of Z_o at column 1"""
    z_o = build_zo(spec)
    d0 = orthogonalizing_diagonal(z_o, 1)
    return AntiHermitianOp(z_o.entries + d0.matrix())


def build_b(n: int, values: Optional[Sequence[float]] = None) -> DiagonalOp:
    """
    Hermitian base point b

    Args:
        n: dimension
        values: explicit entries (must be real and pairwise distinct); default b_i = 1/i

    Returns:
        Hermitian DiagonalOp
    """
    if n < 2:
        raise SizeError(f"base point needs n >= 2, got {n}")
    if values is None:
        entries = 1.0 / np.arange(1, n + 1)
    else:
        entries = np.asarray(values, dtype=float)
        if entries.shape != (n,):
            raise SizeError(f"expected {n} base values, got {entries.shape}")
        if np.unique(entries).size != n:
            raise DegenerateBaseError("base point entries must be pairwise distinct")
    return DiagonalOp(entries.astype(np.complex128), "hermitian")


def _parity_means(entries: np.ndarray, tail_fraction: float, guard_fraction: float):
    n = entries.shape[0]
    guard = int(math.floor(guard_fraction * n))
    usable = n - guard
    width = int(math.ceil(tail_fraction * usable))
    start = usable - width
    indices = np.arange(start, usable)
    # 1-based parity: 0-based odd positions carry even indices
    even = indices[(indices + 1) % 2 == 0]
    odd = indices[(indices + 1) % 2 == 1]
    if even.size < 2 or odd.size < 2:
        raise InsufficientDataError(
            f"tail window [{start + 1}, {usable}] has {even.size} even and {odd.size} odd samples; need 2 of each"
        )
    window = {"start": int(start + 1), "stop": int(usable), "guard": guard}
    return complex(entries[even].mean()), complex(entries[odd].mean()), window


def oscillation_profile(d: DiagonalOp, tail_fraction: float = 0.25, guard_fraction: float = 0.125) -> OscillationProfile:
    """
    Tail means of the even- and odd-indexed entries of d

    Args:
        d: diagonal operator, dim >= 8
        tail_fraction: share of the usable indices forming the tail window
        guard_fraction: trailing share of indices skipped first (truncation edge)

    Returns:
        OscillationProfile; stability is |gap - gap_half| / gap against the leading
        dim/2 entries, None when that half is too short
    """
    if d.dim < 8:
        raise SizeError(f"oscillation profile needs dim >= 8, got {d.dim}")
    if not 0.0 < tail_fraction <= 0.5:
        raise InvalidInputError(f"tail_fraction must lie in (0, 0.5], got {tail_fraction}")
    even, odd, window = _parity_means(d.entries, tail_fraction, guard_fraction)
    gap = abs(even - odd)

    stability = None
    half = d.entries[: d.dim // 2]
    if half.size >= 8:
        try:
            h_even, h_odd, _ = _parity_means(half, tail_fraction, guard_fraction)
            half_gap = abs(h_even - h_odd)
            stability = abs(gap - half_gap) / gap if gap > 0 else abs(gap - half_gap)
        except InsufficientDataError:
            logger.warning("Half-size profile too short; stability not computed")
    return OscillationProfile(even, odd, float(gap), stability, window)


def _geometric_tail(m: int, r: float) -> float:
    return r ** m / (1.0 - r)


def _weighted_geometric_tail(m: int, r: float) -> float:
    """sum_{k>=m} k r^k"""
    return r ** m * (m * (1.0 - r) + r) / (1.0 - r) ** 2


def _discarded_square_sum(spec: TruncationSpec, n: int) -> float:
    """Sum of |entry|^2 over entries of Z_dg with max(r, c) > n"""
    d2 = spec.delta ** 2
    g2 = spec.gamma ** 2
    m_even = n // 2 + 1
    m_odd = (n + 1) // 2
    even = 4.0 * _weighted_geometric_tail(m_even, d2) - 2.0 * _geometric_tail(m_even, d2)
    odd = 4.0 * _weighted_geometric_tail(max(m_odd, 1), g2)
    return even + odd


def tail_bound(spec: TruncationSpec) -> float:
    """Frobenius bound on the spectral norm of the part of Z_dg beyond index n"""
    return math.sqrt(max(_discarded_square_sum(spec, spec.n), 0.0))


def hilbert_schmidt_diagnostic(spec: TruncationSpec) -> Dict[str, Any]:
    """
    Compare the Frobenius norm of the truncation with the Hilbert-Schmidt norm of Z_dg

    Returns:
        Report dict; tail_identity_residual is |hs^2 - frobenius^2 - tail_bound^2|
    """
    hs_squared = _discarded_square_sum(spec, 1)
    frobenius = float(np.linalg.norm(build_zdg(spec).entries))
    bound = tail_bound(spec)
    residual = abs(hs_squared - frobenius ** 2 - bound ** 2)
    return {
        "check": "hilbert-schmidt",
        "hilbert_schmidt_norm": math.sqrt(hs_squared),
        "frobenius_norm": frobenius,
        "tail_bound": bound,
        "tail_identity_residual": residual,
        "params": spec.to_dict(),
    }


def build_all(spec: TruncationSpec, b_values: Optional[Sequence[float]] = None) -> OperatorBundle:
    """Build Z_dg, Z_o, Z2, b and D0 for one truncation"""
    z_dg = build_zdg(spec)
    z_o = build_zo(spec)
    d0 = orthogonalizing_diagonal(z_o, 1)
    z2 = AntiHermitianOp(z_o.entries + d0.matrix())
    b = build_b(spec.n, b_values)
    bound = tail_bound(spec)
    logger.info(f"Built operator bundle n={spec.n}: ||Z2||={spectral_norm(z2):.12g}, tail_bound={bound:.3e}")
    return OperatorBundle(spec, z_dg, z_o, z2, b, d0, bound)
