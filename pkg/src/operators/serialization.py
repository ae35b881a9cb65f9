"""
JSON documents for operators and diagonals

Matrices are written as {dim, gamma, delta, kind, entries: [[re, im], ...]} in
row-major order; diagonals write only their entries.
"""

from pathlib import Path
from typing import Any, Dict, Optional, Union
import json
import logging

import numpy as np

from src.linalg.core import AntiHermitianOp, ComplexMatrix, UnitaryMatrix
from src.linalg.errors import InvalidInputError
from src.operators.factory import DiagonalOp, TruncationSpec

logger = logging.getLogger(__name__)

_KINDS = {
    "anti-hermitian": AntiHermitianOp,
    "unitary": UnitaryMatrix,
    "complex": ComplexMatrix,
}


def _pairs(values: np.ndarray) -> list:
    return [[float(v.real), float(v.imag)] for v in values]


def _complex(pairs: list) -> np.ndarray:
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[1] != 2:
        raise InvalidInputError("entries must be a list of [re, im] pairs")
    return data[:, 0] + 1j * data[:, 1]


def operator_to_dict(
    op: ComplexMatrix,
    spec: Optional[TruncationSpec] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> Dict[str, Any]:
    kind = "complex"
    for name, cls in _KINDS.items():
        if type(op) is cls:
            kind = name
    document = {
        "dim": op.dim,
        "gamma": float(spec.gamma) if spec else None,
        "delta": float(spec.delta) if spec else None,
        "kind": kind,
        "entries": _pairs(op.entries.reshape(-1)),
    }
    if metadata:
        document["metadata"] = metadata
    return document


def operator_from_dict(document: Dict[str, Any]) -> ComplexMatrix:
    try:
        dim = int(document["dim"])
        kind = document.get("kind", "complex")
        values = _complex(document["entries"])
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"malformed operator document: {e}") from e
    if values.size != dim * dim:
        raise InvalidInputError(f"expected {dim * dim} entries, got {values.size}")
    if kind not in _KINDS:
        raise InvalidInputError(f"unknown operator kind {kind!r}")
    return _KINDS[kind](values.reshape(dim, dim))


def diagonal_to_dict(d: DiagonalOp, metadata: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    document = {"dim": d.dim, "kind": d.hermitian_kind, "entries": _pairs(d.entries)}
    if metadata:
        document["metadata"] = metadata
    return document


def diagonal_from_dict(document: Dict[str, Any]) -> DiagonalOp:
    try:
        return DiagonalOp(_complex(document["entries"]), document.get("kind", "anti-hermitian"))
    except (KeyError, TypeError, ValueError) as e:
        raise InvalidInputError(f"malformed diagonal document: {e}") from e


def dumps(document: Dict[str, Any]) -> str:
    """Deterministic JSON text (sorted keys, fixed indent, trailing newline)"""
    return json.dumps(document, indent=2, sort_keys=True) + "\n"


def write_json(path: Union[str, Path], document: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        f.write(dumps(document))
    logger.info(f"Wrote {path}")
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def load_operator(path: Union[str, Path]) -> ComplexMatrix:
    """Read an operator document; a diagonal document becomes its anti-Hermitian matrix"""
    document = read_json(path)
    if "dim" in document and len(document.get("entries", [])) == document["dim"] and document["dim"] > 1:
        return diagonal_from_dict(document).as_operator()
    return operator_from_dict(document)
