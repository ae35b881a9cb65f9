import math
import os
from dotenv import load_dotenv, dotenv_values
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.linalg.errors import ConfigError

load_dotenv()

CHECK_NAMES = (
    "bch",
    "certify",
    "hopf-rinow",
    "lemma53",
    "lemma58",
    "membership",
    "qnorm",
    "short-curve",
    "sphere",
    "thm59",
)


class Config:
    """Environment configuration for the orbit geodesics workbench"""

    # Config file fallback for the CLI
    CONFIG_PATH: Optional[str] = os.getenv("ORBIT_GEODESICS_CONFIG")

    # Logging
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = os.getenv("LOG_FILE", "orbit_geodesics.log")

    # Output
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "./output")

    @classmethod
    def config_path(cls) -> Optional[str]:
        """Config path from the environment, read at call time so tests can patch it"""
        return os.getenv("ORBIT_GEODESICS_CONFIG", cls.CONFIG_PATH)

    @classmethod
    def validate(cls) -> bool:
        """Validate that the configured config file exists when one is named"""
        path = cls.config_path()
        if path and not os.path.exists(path):
            print(f"Warning: ORBIT_GEODESICS_CONFIG points to a missing file: {path}")
            return False
        return True


class Tolerances(BaseModel):
    """Every tolerance used by the workbench, in one record"""

    atol: float = Field(1e-12, gt=0)              # anti-Hermitian / Hermitian residual
    utol: float = Field(1e-10, gt=0)              # unitarity residual
    branch_angle: float = Field(1e-8, gt=0)       # distance of an eigen-angle from pi
    certificate: float = Field(1e-8, gt=0)        # column norm vs spectral norm
    orthogonality: float = Field(1e-10, gt=0)     # column inner products
    orbit: float = Field(1e-10, gt=0)             # OrbitPoint consistency
    qnorm: float = Field(1e-6, gt=0)              # quotient norm comparisons
    length: float = Field(1e-6, gt=0)             # relative length equality
    speed: float = Field(1e-8, gt=0)              # constant speed
    eigenvector: float = Field(1e-8, gt=0)        # xi + eta eigenvector residual
    crossing: float = Field(1e-9, gt=0)           # crossing and column-multiple residuals
    bch: float = Field(1e-10, gt=0)               # product-logarithm bound slack
    endpoint: float = Field(1e-8, gt=0)           # probe endpoint residual
    minimality_witness: float = Field(1e-5, gt=0)


class SolverSettings(BaseModel):
    """Quotient norm solver settings"""

    method: Literal["smooth", "subgradient"] = "smooth"
    ftol: float = Field(1e-10, gt=0)
    gap_target: float = Field(1e-6, gt=0)
    max_iter: int = Field(5000, ge=1)
    mu_start: float = Field(1e-1, gt=0)
    mu_final: float = Field(1e-10, gt=0)
    mu_factor: float = Field(0.1, gt=0, lt=1)
    stage_iter: int = Field(500, ge=1)
    polish_iter: int = Field(200, ge=0)
    degeneracy_tol: float = Field(1e-10, gt=0)
    warm_mu_start: float = Field(1e-4, gt=0)     # smoothing width when a warm start is given


class QuadratureSettings(BaseModel):
    """Adaptive Gauss-Legendre settings"""

    nodes: int = Field(5, ge=2)
    atol: float = Field(1e-8, gt=0)
    max_depth: int = Field(30, ge=1)
    max_panels: int = Field(256, ge=1)


class CompetitorSettings(BaseModel):
    """Endpoint-pinned competitor paths for the short-curve check"""

    epsilon: float = Field(0.25, gt=0)
    panels: int = Field(2, ge=1)                  # fixed composite Gauss-Legendre rule
    nodes: int = Field(5, ge=2)
    atol: float = Field(1e-4, gt=0)               # paths above this error estimate are reported unconverged
    stage_iter: int = Field(150, ge=1)
    polish_iter: int = Field(30, ge=0)
    mu_final: float = Field(1e-8, gt=0)
    gap_target: float = Field(1e-5, gt=0)         # relative solver gap accepted at each node


class ProbeSettings(BaseModel):
    """Local Hopf-Rinow probe settings"""

    radius: float = Field(math.log(2) / 8, gt=0)
    method: Literal["smooth+cobyla", "cobyla"] = "smooth+cobyla"
    cobyla_rhobeg: float = Field(1e-3, gt=0)
    cobyla_maxiter: int = Field(2000, ge=1)
    dim: int = Field(16, ge=2)                    # probe dimension used by verify and probe
    trials: int = Field(10, ge=1)
    k_norm: float = Field(0.05, gt=0)
    radii: List[float] = Field(default_factory=lambda: [0.025, 0.05, math.log(2) / 8])


class RunConfig(BaseModel):
    """A complete, validated run of the workbench"""

    n: int = Field(64, ge=2)
    gamma: float = Field(0.5, gt=0, lt=1)
    delta: float = Field(0.25, gt=0, lt=1)
    b_rule: Literal["reciprocal", "user-list"] = "reciprocal"
    b_values: Optional[List[float]] = None
    tolerances: Tolerances = Field(default_factory=Tolerances)
    solver: SolverSettings = Field(default_factory=SolverSettings)
    quadrature: QuadratureSettings = Field(default_factory=QuadratureSettings)
    probe: ProbeSettings = Field(default_factory=ProbeSettings)
    competitors: CompetitorSettings = Field(default_factory=CompetitorSettings)
    suite: List[str] = Field(default_factory=lambda: list(CHECK_NAMES))
    output_dir: str = Config.OUTPUT_DIR
    seed: int = 20240917
    tail_fraction: float = Field(0.25, gt=0, le=0.5)
    guard_fraction: float = Field(0.125, ge=0, lt=0.5)
    workers: int = Field(1, ge=1)
    t_max: Optional[float] = Field(None, gt=0)
    samples: int = Field(16, ge=2)
    competitor_paths: int = Field(20, ge=0)
    bch_trials: int = Field(100, ge=1)
    obstruction_grid: int = Field(20, ge=1)

    @field_validator("suite")
    @classmethod
    def _known_checks(cls, suite: List[str]) -> List[str]:
        unknown = [name for name in suite if name not in CHECK_NAMES]
        if unknown:
            raise ValueError(f"unknown check name(s): {unknown}; expected a subset of {list(CHECK_NAMES)}")
        return suite

    @model_validator(mode="after")
    def _b_values_match(self) -> "RunConfig":
        if self.b_rule == "user-list":
            if not self.b_values or len(self.b_values) != self.n:
                raise ValueError("b_rule=user-list requires b_values with exactly n entries")
        return self

    @property
    def satisfies_construction(self) -> bool:
        """gamma^2 = delta and delta^2 < gamma"""
        return math.isclose(self.gamma ** 2, self.delta, rel_tol=1e-12) and self.delta ** 2 < self.gamma


_LIST_KEYS = {"suite", "b_values", "radii"}


def _nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    """Turn dotted keys (solver.max_iter) into nested dicts and split list values"""
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        if value is None:
            continue
        key = key.strip().lower().replace("-", "_")
        if key.split(".")[-1] in _LIST_KEYS and isinstance(value, str):
            value = [item.strip() for item in value.split(",") if item.strip()]
        parts = key.split(".")
        target = nested
        for part in parts[:-1]:
            target = target.setdefault(part, {})
        target[parts[-1]] = value
    return nested


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(path: Optional[str] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build a RunConfig from defaults, a flat key-value file and overrides

    Args:
        path: config file; falls back to ORBIT_GEODESICS_CONFIG
        overrides: flat (possibly dotted) keys from the command line; None values are ignored

    Returns:
        Validated RunConfig
    """
    data: Dict[str, Any] = {}
    path = path or Config.config_path()
    if path:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        data = _nest(dict(dotenv_values(path)))
    if overrides:
        data = _merge(data, _nest(overrides))
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(str(e)) from e


# Config file template (flat key=value, dotted keys for nested records)
CONFIG_TEMPLATE = """
# Copy this to orbit.cfg and point ORBIT_GEODESICS_CONFIG at it
N=64
GAMMA=0.5
DELTA=0.25
B_RULE=reciprocal
SUITE=certify,qnorm,short-curve,sphere,bch,lemma53,lemma58,thm59,hopf-rinow,membership
SEED=20240917
OUTPUT_DIR=./output
SOLVER.MAX_ITER=5000
QUADRATURE.ATOL=1e-8
COMPETITORS.EPSILON=0.25
COMPETITORS.PANELS=2
PROBE.RADIUS=0.0866
"""
