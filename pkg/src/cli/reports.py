"""
Report assembly for the command line: JSON-safe conversion, per-check seeds,
the suite report and CSV tables
"""

from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Union
import logging
import math

import numpy as np
import pandas as pd

from config import CHECK_NAMES, RunConfig
from src.operators.serialization import write_json

logger = logging.getLogger(__name__)

PASSING_VERDICTS = {"pass", "certified-minimal"}

# recorded in every suite report; the randomized checks do not use xoshiro streams
RNG_NOTE = "numpy PCG64 (default_rng), per-check child seeds from SeedSequence(seed).spawn"


def check_seeds(seed: int, names: Iterable[str] = CHECK_NAMES) -> Dict[str, int]:
    """
    One independent integer seed per check

    numpy's SeedSequence spawns a child for every known check name in a fixed
    order, so a check's stream does not depend on which other checks run.
    """
    children = np.random.SeedSequence(seed).spawn(len(CHECK_NAMES))
    by_name = {name: int(child.generate_state(1)[0]) for name, child in zip(CHECK_NAMES, children)}
    return {name: by_name[name] for name in names}


def to_jsonable(value: Any) -> Any:
    """Plain Python structure with finite floats (non-finite become None)"""
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, (complex, np.complexfloating)):
        return [to_jsonable(value.real), to_jsonable(value.imag)]
    return value


def passed(report: Dict[str, Any]) -> bool:
    return report.get("verdict") in PASSING_VERDICTS


def error_report(name: str, error: Exception) -> Dict[str, Any]:
    return {
        "check": name,
        "verdict": "error",
        "residuals": {},
        "params": {"error": type(error).__name__, "message": str(error)},
    }


def combine(name: str, parts: Dict[str, Dict[str, Any]], expected: Optional[Dict[str, bool]] = None) -> Dict[str, Any]:
    """
    Merge sub-reports into one check report

    Args:
        expected: per part, whether it should pass (False for negative controls)
    """
    expected = expected or {}
    residuals = {}
    for key, report in parts.items():
        wanted = expected.get(key, True)
        residuals[key] = {
            "value": report.get("verdict"),
            "tol": "pass" if wanted else "fail",
            "ok": passed(report) == wanted,
        }
    return {
        "check": name,
        "verdict": "pass" if all(item["ok"] for item in residuals.values()) else "fail",
        "residuals": residuals,
        "params": {"parts": parts},
    }


def suite_report(config: RunConfig, results: Dict[str, Dict[str, Any]]) -> Dict[str, Any]:
    """Checks ordered by name, overall pass flag and the run configuration; no timestamps"""
    checks = [results[name] for name in sorted(results)]
    return to_jsonable(
        {
            "passed": all(passed(report) for report in checks),
            "checks": checks,
            "config": {**config.model_dump(mode="json"), "rng": RNG_NOTE},
        }
    )


def write_report(path: Union[str, Path], report: Dict[str, Any]) -> Path:
    return write_json(path, to_jsonable(report))


def curve_table(rows: List[Dict[str, Any]]) -> pd.DataFrame:
    columns = ["t", "cumulative_length", "speed", "t_norm_z", "sphere_speed", "window_ok"]
    return pd.DataFrame(rows, columns=columns)


def write_csv(frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    """CSV with '.' decimals and 17 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"Wrote {path} ({len(frame)} rows)")
    return path
