"""
Adaptive Gauss-Legendre quadrature with interval bisection
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple
import logging

import numpy as np

from config import QuadratureSettings
from src.linalg.errors import InvalidInputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    panels: int
    evaluations: int
    converged: bool

    def __float__(self) -> float:
        return self.value

    def to_dict(self):
        return {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "panels": self.panels,
            "evaluations": self.evaluations,
            "converged": self.converged,
        }


def make_lg_rule(n: int) -> Callable[[Callable[[float], float], float, float], float]:
    """n-point Gauss-Legendre rule on [a, b] for a scalar integrand"""
    nodes, weights = np.polynomial.legendre.leggauss(n)

    def rule(f: Callable[[float], float], a: float, b: float) -> float:
        c = 0.5 * (a + b)
        d = 0.5 * (b - a)
        values = np.array([f(c + d * x) for x in nodes], dtype=float)
        return float(np.dot(weights, values) * d)

    return rule


def integrate(
    f: Callable[[float], float],
    a: float,
    b: float,
    settings: Optional[QuadratureSettings] = None,
) -> QuadratureResult:
    """
    Integrate f over [a, b]

    A panel is accepted when its two halves agree with the whole to within the
    panel's share of settings.atol, or when it reaches max_depth. Running out of
    the panel budget or hitting max_depth marks the result as not converged.
    """
    settings = settings or QuadratureSettings()
    if a == b:
        return QuadratureResult(0.0, 0.0, 0, 0, True)
    sign = 1.0
    if b < a:
        a, b, sign = b, a, -1.0

    rule = make_lg_rule(settings.nodes)
    evaluations = 0

    def counted(t: float) -> float:
        nonlocal evaluations
        evaluations += 1
        return f(t)

    total_width = b - a
    whole = rule(counted, a, b)
    stack: List[Tuple[float, float, float, int]] = [(a, b, whole, 0)]
    value = 0.0
    error = 0.0
    panels = 0
    converged = True
    while stack:
        lo, hi, estimate, depth = stack.pop()
        mid = 0.5 * (lo + hi)
        left = rule(counted, lo, mid)
        right = rule(counted, mid, hi)
        refined = left + right
        diff = abs(refined - estimate)
        budget_left = panels + len(stack) + 2 <= settings.max_panels
        if diff <= settings.atol * (hi - lo) / total_width:
            value += refined
            error += diff
            panels += 1
        elif depth + 1 >= settings.max_depth or not budget_left:
            value += refined
            error += diff
            panels += 1
            converged = False
        else:
            stack.append((mid, hi, right, depth + 1))
            stack.append((lo, mid, left, depth + 1))
    if not converged:
        logger.warning(f"Quadrature on [{a}, {b}] not converged: error estimate {error:.3e}, {panels} panels")
    return QuadratureResult(sign * value, error, panels, evaluations, converged)


def integrate_fixed(
    f: Callable[[float], np.ndarray],
    a: float,
    b: float,
    panels: int,
    nodes: int,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Composite Gauss-Legendre rule on a fixed number of equal panels for a vector integrand

    The error estimate is the difference from the same rule on half as many panels
    (a single panel is compared with the rule of one node fewer). Returns
    (values, error estimates, evaluations).
    """
    if panels < 1 or nodes < 2:
        raise InvalidInputError(f"need panels >= 1 and nodes >= 2, got {panels}, {nodes}")
    evaluations = 0

    def composite(count: int, order: int) -> np.ndarray:
        nonlocal evaluations
        x, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(a, b, count + 1)
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            c, d = 0.5 * (lo + hi), 0.5 * (hi - lo)
            values = np.array([np.atleast_1d(f(c + d * node)) for node in x], dtype=float)
            evaluations += order
            total = total + d * (w @ values)
        return np.asarray(total, dtype=float)

    fine = composite(panels, nodes)
    coarse = composite(panels // 2, nodes) if panels > 1 else composite(1, nodes - 1)
    return fine, np.abs(fine - coarse), evaluations
