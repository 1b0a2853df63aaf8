"""
Quench Core - Pipeline
Reconfigure every load level, place SFCLs on each winning configuration,
aggregate the plans and verify the aggregate on every level.
"""

from __future__ import annotations

import asyncio
from dataclasses import dataclass
from typing import Any

from config import RunConfig
from core.costs import CostModel
from core.mssa import SsaParams
from core.network import Network, load_grid
from core.placement import PlacementProblem, aggregate, build_study, place, verify_plan
from core.reconfiguration import ReconfigurationResult, level_view, reconfigure_level
from core.report import LevelReport, RunReport
from exceptions import PipelineStageError, QuenchError
from logging_config import get_logger, log_operation
from utils.rng import spawn_sequences

logger = get_logger(__name__)

STAGES = ("ingestion", "reconfiguration", "placement", "aggregation", "verification")


@dataclass
class PipelineContext:
    """Inputs shared by every stage."""
    run_config: RunConfig
    network: Network
    cost_model: CostModel
    problem: PlacementProblem


def prepare(run_config: RunConfig) -> PipelineContext:
    """Validate the run configuration and ingest the grid."""
    run_config.require_valid()
    network = load_grid(run_config.grid_path)
    return PipelineContext(
        run_config=run_config,
        network=network,
        cost_model=CostModel.from_settings(run_config.cost),
        problem=PlacementProblem.for_network(network, run_config.placement, run_config.fault),
    )


async def reconfigure_levels(ctx: PipelineContext) -> list[ReconfigurationResult]:
    """One colony search per load level, each on its own seed stream and worker thread."""
    rc = ctx.run_config
    levels = ctx.network.levels
    seeds = spawn_sequences(rc.seed, len(levels))
    tasks = [
        asyncio.to_thread(
            reconfigure_level,
            ctx.network,
            level,
            ctx.cost_model,
            SsaParams.from_settings(rc.ssa, seed=seeds[i], workers=rc.workers),
            warm_start=rc.ssa.warm_start,
        )
        for i, level in enumerate(levels)
    ]
    return list(await asyncio.gather(*tasks))


def _level_report(ctx: PipelineContext, result: ReconfigurationResult) -> LevelReport:
    view = level_view(ctx.network, result.level)
    base_cost = ctx.cost_model.evaluate(view, ctx.network.base_config())
    before = build_study(ctx.problem, ctx.network, result.config).scan()
    return LevelReport(
        level=result.level,
        config=result.config,
        cost=result.cost,
        base_cost=base_cost,
        power_flow=result.solution.summary(),
        fault_before=before.summary(),
        trace=result.trace,
        evaluations=result.evaluations,
        cache_hits=result.cache_hits,
        cache_misses=result.cache_misses,
    )


class _Stage:
    """Tags any failure inside the block with the stage name and the partial report."""

    def __init__(self, name: str, report: RunReport) -> None:
        self.name = name
        self.report = report

    def __enter__(self) -> _Stage:
        logger.debug(f"Stage '{self.name}' started")
        return self

    def __exit__(self, exc_type: Any, exc: BaseException | None, tb: Any) -> bool:
        if exc is None or not isinstance(exc, Exception):
            return False
        if isinstance(exc, PipelineStageError):
            return False
        self.report.failed_at = self.name
        self.report.error = str(exc)
        log_operation(logger, f"Stage {self.name}", False, {"error": str(exc)})
        reason = str(exc) if isinstance(exc, QuenchError) else f"{type(exc).__name__}: {exc}"
        raise PipelineStageError(self.name, reason, partial=self.report, cause=exc) from exc


async def run_pipeline_async(run_config: RunConfig, *, place_sfcls: bool = True) -> RunReport:
    """
    Run the planning pipeline.

    With ``place_sfcls=False`` only the per-level reconfiguration runs. An
    infeasible placement is an outcome, not an error: the report comes back
    with ``feasible`` False.

    Raises:
        PipelineStageError: carrying the partial report in ``partial``.
    """
    report = RunReport(config=run_config.to_dict())

    with _Stage("ingestion", report):
        ctx = prepare(run_config)
        log_operation(logger, "Grid ingestion", True, {
            "grid": str(run_config.grid_path),
            "buses": len(ctx.network.buses),
            "branches": len(ctx.network.branches),
            "levels": len(ctx.network.levels),
        })

    with _Stage("reconfiguration", report):
        results = await reconfigure_levels(ctx)
        report.levels = [_level_report(ctx, r) for r in results]

    if not place_sfcls:
        return report

    with _Stage("placement", report):
        for entry in report.levels:
            entry.placement = await asyncio.to_thread(place, ctx.problem, ctx.network, entry.config)

    placements = [entry.placement for entry in report.levels if entry.placement is not None]
    if not all(p.feasible for p in placements):
        infeasible = [e.level.index for e in report.levels if e.placement and not e.placement.feasible]
        log_operation(logger, "SFCL aggregation", False, {"infeasible_levels": infeasible})
        return report

    with _Stage("aggregation", report):
        contexts = [(ctx.network, entry.config, ctx.problem) for entry in report.levels]
        report.aggregate = aggregate(placements, contexts)
        log_operation(logger, "SFCL aggregation", report.aggregate.feasible, {
            "devices": {d.branch: round(d.impedance, 4) for d in report.aggregate.devices},
        })

    with _Stage("verification", report):
        for entry in report.levels:
            scan = verify_plan(ctx.problem, ctx.network, entry.config, report.aggregate.devices)
            entry.fault_after = scan.summary()

    return report


def run_pipeline(run_config: RunConfig, *, place_sfcls: bool = True) -> RunReport:
    """Blocking entry point around ``run_pipeline_async``."""
    return asyncio.run(run_pipeline_async(run_config, place_sfcls=place_sfcls))
