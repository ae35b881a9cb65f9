"""
Exception hierarchy shared by every module of the orbit geodesics workbench
"""

from typing import Any, Dict, Optional


class OrbitGeodesicsError(Exception):
    """Base class for all workbench errors"""


class InvalidInputError(OrbitGeodesicsError, ValueError):
    """Input matrix is non-finite or not of the required kind"""


class ShapeError(OrbitGeodesicsError, ValueError):
    """Operands have incompatible dimensions"""


class IndexOutOfRangeError(OrbitGeodesicsError, IndexError):
    """A 1-based column/row index is outside 1..dim"""


class SizeError(OrbitGeodesicsError, ValueError):
    """Dimension outside the range an operation accepts"""


class NumericalError(OrbitGeodesicsError):
    """An eigensolver or factorization failed"""

    def __init__(self, message: str, condition: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.condition = condition or {}


class BranchCutError(OrbitGeodesicsError):
    """Principal logarithm requested for a unitary with eigenvalue -1"""


class DegenerateColumnError(OrbitGeodesicsError):
    """Zero divisor in the minimizing diagonal formula"""

    def __init__(self, index: int, message: Optional[str] = None):
        super().__init__(message or f"column entry at row {index} vanishes; minimizing diagonal undefined")
        self.index = index


class DegenerateBaseError(OrbitGeodesicsError):
    """Base point b has repeated diagonal entries"""


class InsufficientDataError(OrbitGeodesicsError):
    """Too few samples to form an estimate"""


class DomainError(OrbitGeodesicsError, ValueError):
    """Curve parameter outside the curve's domain"""


class WindowError(OrbitGeodesicsError, ValueError):
    """Parameter outside the admissible window of a check"""


class HypothesisNotMetError(OrbitGeodesicsError):
    """A checker's hypothesis does not hold for the given input"""


class CertificateError(OrbitGeodesicsError):
    """A check requires a minimality certificate that does not pass"""


class ConfigError(OrbitGeodesicsError, ValueError):
    """Invalid run configuration"""
