"""
Report emitters: a JSON envelope around pydantic reports and plot-ready CSV tables.

Output carries no timestamps; the same config produces byte-identical files.
"""

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import polars as pl
from pydantic import BaseModel, ConfigDict, Field

from .models import ExperimentConfig

logger = logging.getLogger(__name__)

Row = Dict[str, Any]


class ReportEnvelope(BaseModel):
    """What every `--json` run prints"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    version: str
    command: str
    config: ExperimentConfig
    checks: Dict[str, bool] = Field(default_factory=dict)
    passed: bool = True
    report: Any = None


def format_float(value: float) -> str:
    """17 significant digits, '.' decimal, inf/nan spelled out"""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return format(value, ".17g")


def _render(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return value
    if isinstance(value, (list, tuple)):
        return ";".join(str(_render(v)) for v in value)
    return str(value)


def rows_to_frame(rows: Sequence[Row], columns: Optional[List[str]] = None) -> pl.DataFrame:
    """Rows as a polars frame with floats already rendered to text"""
    if not rows:
        return pl.DataFrame({name: [] for name in columns or []})
    names = columns or list(rows[0].keys())
    return pl.DataFrame({name: [_render(row.get(name)) for row in rows] for name in names})


def write_csv(
    rows: Sequence[Row], path: Union[str, Path], columns: Optional[List[str]] = None
) -> Path:
    """Write rows with a header line; returns the path written"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows_to_frame(rows, columns).write_csv(path)
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path


def envelope(
    report: Any,
    config: ExperimentConfig,
    checks: Optional[Dict[str, bool]] = None,
) -> ReportEnvelope:
    from . import __version__

    checks = dict(checks or {})
    return ReportEnvelope(
        version=__version__,
        command=config.command,
        config=config,
        checks=checks,
        passed=all(checks.values()),
        report=report,
    )


def render_json(result: ReportEnvelope) -> str:
    return result.model_dump_json(indent=2)


def write_json(result: ReportEnvelope, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_json(result) + "\n", encoding="utf-8")
    logger.info(f"Wrote report to {path}")
    return path
