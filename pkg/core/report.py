"""
Quench Core - Run Report
Versioned record of a planning run: per-level configurations, costs, fault
summaries and placements, the aggregated plan, traces and the config echo.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import pandas as pd

from core.costs import CostBreakdown
from core.mssa import TraceRow
from core.network import LoadLevel, SwitchConfig
from core.placement import SfclPlacementResult
from exceptions import ReportError
from logging_config import get_logger, log_operation

logger = get_logger(__name__)

# Bump whenever the JSON layout changes.
SCHEMA_ID = "quench.report/v1"

REPORT_FILE = "report.json"
TABLES_FILE = "tables.csv"
TABLE_COLUMNS = [
    "section",
    "case",
    "open_switches",
    "total_cost",
    "worst_current_a",
    "location",
    "resistance_ohm",
]


def trace_file(level_index: int) -> str:
    return f"trace_level{level_index}.csv"


# =============================================================================
# Report Types
# =============================================================================

@dataclass
class LevelReport:
    """Everything decided for one load level."""
    level: LoadLevel
    config: SwitchConfig
    cost: CostBreakdown
    base_cost: CostBreakdown
    power_flow: dict[str, Any]
    fault_before: dict[str, Any]
    fault_after: dict[str, Any] | None = None
    placement: SfclPlacementResult | None = None
    trace: list[TraceRow] = field(default_factory=list)
    evaluations: int = 0
    cache_hits: int = 0
    cache_misses: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "level": {
                "index": self.level.index,
                "scale": self.level.scale,
                "duration_days": self.level.duration,
            },
            "open_switches": self.config.sorted(),
            "cost": self.cost.to_dict(),
            "base_cost": self.base_cost.to_dict(),
            "power_flow": self.power_flow,
            "fault_before": self.fault_before,
            "fault_after": self.fault_after,
            "placement": self.placement.to_dict() if self.placement else None,
            "trace": [
                {"iteration": r.iteration, "best_fitness": r.best_fitness, "mean_fitness": r.mean_fitness}
                for r in self.trace
            ],
            "evaluations": self.evaluations,
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> LevelReport:
        level = data["level"]
        placement = data.get("placement")
        return cls(
            level=LoadLevel(int(level["index"]), float(level["scale"]), float(level["duration_days"])),
            config=SwitchConfig.of(int(b) for b in data["open_switches"]),
            cost=CostBreakdown.from_dict(data["cost"]),
            base_cost=CostBreakdown.from_dict(data["base_cost"]),
            power_flow=data["power_flow"],
            fault_before=data["fault_before"],
            fault_after=data.get("fault_after"),
            placement=SfclPlacementResult.from_dict(placement) if placement else None,
            trace=[
                TraceRow(int(r["iteration"]), float(r["best_fitness"]), r.get("mean_fitness"))
                for r in data.get("trace", [])
            ],
            evaluations=int(data.get("evaluations", 0)),
            cache_hits=int(data.get("cache_hits", 0)),
            cache_misses=int(data.get("cache_misses", 0)),
        )


@dataclass
class RunReport:
    """A complete, or partially completed, planning run."""
    config: dict[str, Any]
    levels: list[LevelReport] = field(default_factory=list)
    aggregate: SfclPlacementResult | None = None
    failed_at: str | None = None
    error: str | None = None
    schema: str = SCHEMA_ID
    generated_at: str = field(
        default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec="seconds")
    )

    @property
    def feasible(self) -> bool:
        """True when the run finished and the aggregated plan holds on every level."""
        return self.failed_at is None and self.aggregate is not None and self.aggregate.feasible

    def level(self, index: int) -> LevelReport:
        for entry in self.levels:
            if entry.level.index == index:
                return entry
        raise KeyError(index)

    def to_dict(self) -> dict[str, Any]:
        return {
            "schema": self.schema,
            "generated_at": self.generated_at,
            "failed_at": self.failed_at,
            "error": self.error,
            "config": self.config,
            "levels": [entry.to_dict() for entry in self.levels],
            "aggregate": self.aggregate.to_dict() if self.aggregate else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> RunReport:
        schema = data.get("schema")
        if schema != SCHEMA_ID:
            raise ReportError(f"unsupported report schema '{schema}', expected '{SCHEMA_ID}'")
        aggregate = data.get("aggregate")
        return cls(
            config=data.get("config", {}),
            levels=[LevelReport.from_dict(entry) for entry in data.get("levels", [])],
            aggregate=SfclPlacementResult.from_dict(aggregate) if aggregate else None,
            failed_at=data.get("failed_at"),
            error=data.get("error"),
            schema=schema,
            generated_at=data.get("generated_at", ""),
        )


# =============================================================================
# Tables
# =============================================================================

def _row(**values: Any) -> dict[str, Any]:
    return {column: values.get(column) for column in TABLE_COLUMNS}


def _placement_rows(case: str, placement: SfclPlacementResult) -> list[dict[str, Any]]:
    if not placement.devices:
        return [_row(section="placement", case=case)]
    return [
        _row(section="placement", case=case, location=location, resistance_ohm=resistance)
        for location, resistance in placement.rows()
    ]


def summary_table(report: RunReport) -> pd.DataFrame:
    """Reconfiguration, fault and placement summaries in one long table."""
    rows: list[dict[str, Any]] = []
    for entry in report.levels:
        t = entry.level.index
        rows.append(_row(section="reconfiguration", case=f"level {t} base", total_cost=entry.base_cost.level_total(t)))
        rows.append(_row(
            section="reconfiguration",
            case=f"level {t}",
            open_switches=entry.config.label,
            total_cost=entry.cost.total,
        ))
        rows.append(_row(
            section="fault", case=f"level {t} without SFCL",
            open_switches=entry.config.label,
            worst_current_a=entry.fault_before.get("worst_current_a"),
        ))
        if entry.fault_after is not None:
            rows.append(_row(
                section="fault", case=f"level {t} with SFCL",
                open_switches=entry.config.label,
                worst_current_a=entry.fault_after.get("worst_current_a"),
            ))
        if entry.placement is not None:
            rows.extend(_placement_rows(f"level {t}", entry.placement))
    if report.aggregate is not None:
        rows.extend(_placement_rows("aggregate", report.aggregate))
    return pd.DataFrame(rows, columns=TABLE_COLUMNS)


def trace_table(entry: LevelReport) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.iteration, r.best_fitness, r.mean_fitness) for r in entry.trace],
        columns=["iteration", "best_fitness", "mean_fitness"],
    )


# =============================================================================
# Persistence
# =============================================================================

def emit_report(report: RunReport, output_dir: Path | str) -> list[Path]:
    """
    Write report.json, tables.csv and one trace CSV per level.

    Returns:
        The written paths, report.json first.

    Raises:
        ReportError: on any I/O failure, tagged with the offending path.
    """
    out = Path(output_dir)
    target = out
    try:
        out.mkdir(parents=True, exist_ok=True)

        target = out / REPORT_FILE
        with open(target, "w", encoding="utf-8") as f:
            json.dump(report.to_dict(), f, indent=2, ensure_ascii=False)
            f.write("\n")
        written = [target]

        target = out / TABLES_FILE
        summary_table(report).to_csv(target, index=False)
        written.append(target)

        for entry in report.levels:
            target = out / trace_file(entry.level.index)
            trace_table(entry).to_csv(target, index=False)
            written.append(target)
    except OSError as e:
        raise ReportError(f"cannot write report: {e}", path=str(target), cause=e) from e

    log_operation(logger, "Report emission", True, {
        "dir": str(out), "files": len(written), "failed_at": report.failed_at,
    })
    return written


def load_report(path: Path | str) -> RunReport:
    """Load a report from report.json or from the directory holding it."""
    path = Path(path)
    if path.is_dir():
        path = path / REPORT_FILE
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except OSError as e:
        raise ReportError(f"cannot read report: {e}", path=str(path), cause=e) from e
    except json.JSONDecodeError as e:
        raise ReportError(f"report is not valid JSON: {e.msg}", path=str(path), cause=e) from e
    return RunReport.from_dict(data)
