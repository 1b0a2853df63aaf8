"""
Quench Core - Cost Model
Annualized power-loss cost plus expected customer interruption cost (ECOST),
per load level and in total, with a penalty for limit violations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from core.network import YEAR_DAYS, CcdfCurve, LoadLevel, Network, SwitchConfig, is_radial, radial_tree
from core.power_flow import PowerFlowSolution, check_limits, solve
from exceptions import GridValidationError, MissingLevelSolutionError
from logging_config import get_logger

logger = get_logger(__name__)

DEFAULT_LOSS_PRICE = 168.0       # $/kW-year
DEFAULT_REPAIR_MINUTES = 120.0
DEFAULT_PENALTY_WEIGHT = 1.0e6   # $ per unit normalized violation


# =============================================================================
# Elementary Costs
# =============================================================================

def loss_cost(total_loss: float, level: LoadLevel, price: float = DEFAULT_LOSS_PRICE) -> float:
    """Cost of losses over the level's share of the year."""
    return price * total_loss * (level.duration / YEAR_DAYS)


def interruption_cost(curve: CcdfCurve, duration: float) -> float:
    """
    $/kW for an outage of ``duration`` minutes.

    Linear in log-duration between knots, clamped to the end knots.
    """
    durations = curve.durations
    costs = curve.costs
    if duration <= durations[0]:
        return costs[0]
    if duration >= durations[-1]:
        return costs[-1]
    return float(np.interp(math.log(duration), np.log(durations), costs))


def bus_failure_rates(network: Network, config: SwitchConfig) -> dict[int, float]:
    """Failures/year seen by each bus: sum over its supply path."""
    tree = radial_tree(network, config)
    rates = {tree.root: 0.0}
    for bus in tree.order[1:]:
        rates[bus] = rates[tree.parent[bus]] + network.branch(tree.parent_branch[bus]).failure_rate
    return rates


def ecost(
    network: Network,
    config: SwitchConfig,
    level: LoadLevel,
    curves: Mapping[str, CcdfCurve] | None = None,
    repair_duration: float = DEFAULT_REPAIR_MINUTES,
) -> float:
    """
    Expected customer interruption cost of one level, prorated by its duration.

    Raises:
        NonRadialConfigError: if ``config`` is not radial.
    """
    curve_set = network.ccdf_curves if curves is None else curves
    rates = bus_failure_rates(network, config)
    unit_costs: dict[str, float] = {}
    annual = 0.0
    for bus in network.buses:
        if bus.is_substation or bus.load_p == 0:
            continue
        ref = bus.interruption_cost_ref
        if ref not in unit_costs:
            if ref not in curve_set:
                raise GridValidationError(f"unknown CCDF curve '{ref}'", location=f"bus {bus.id}")
            unit_costs[ref] = interruption_cost(curve_set[ref], repair_duration)
        annual += bus.load_p * level.scale * unit_costs[ref] * rates[bus.id]
    return annual * (level.duration / YEAR_DAYS)


# =============================================================================
# Breakdown
# =============================================================================

@dataclass
class CostBreakdown:
    """Per-level loss and reliability costs plus the violation penalty."""
    loss_cost: dict[int, float] = field(default_factory=dict)
    reliability_cost: dict[int, float] = field(default_factory=dict)
    penalty: float = 0.0
    total: float = 0.0

    @classmethod
    def infeasible(cls) -> CostBreakdown:
        """Sentinel for configurations rejected before evaluation."""
        return cls(total=math.inf)

    @classmethod
    def build(
        cls,
        loss: dict[int, float],
        reliability: dict[int, float],
        penalty: float,
    ) -> CostBreakdown:
        total = sum(loss.values()) + sum(reliability.values()) + penalty
        return cls(dict(loss), dict(reliability), penalty, total)

    @property
    def is_finite(self) -> bool:
        return math.isfinite(self.total)

    def level_total(self, index: int) -> float:
        return self.loss_cost.get(index, 0.0) + self.reliability_cost.get(index, 0.0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "loss_cost": {str(k): v for k, v in sorted(self.loss_cost.items())},
            "reliability_cost": {str(k): v for k, v in sorted(self.reliability_cost.items())},
            "penalty": self.penalty,
            "total": self.total if self.is_finite else None,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CostBreakdown:
        total = data.get("total")
        return cls(
            loss_cost={int(k): float(v) for k, v in data.get("loss_cost", {}).items()},
            reliability_cost={int(k): float(v) for k, v in data.get("reliability_cost", {}).items()},
            penalty=float(data.get("penalty", 0.0)),
            total=math.inf if total is None else float(total),
        )


# =============================================================================
# Cost Model
# =============================================================================

@dataclass(frozen=True)
class CostModel:
    """Parameters of the combined reconfiguration cost."""
    price: float = DEFAULT_LOSS_PRICE
    repair_duration: float = DEFAULT_REPAIR_MINUTES
    v_min: float = 0.95
    v_max: float = 1.05
    penalty_weight: float = DEFAULT_PENALTY_WEIGHT
    include_reliability: bool = True

    @classmethod
    def from_settings(cls, settings: Any) -> CostModel:
        """Build from ``config.CostSettings``."""
        return cls(
            price=settings.loss_price,
            repair_duration=settings.repair_duration_min,
            v_min=settings.v_min,
            v_max=settings.v_max,
            penalty_weight=settings.penalty_weight,
            include_reliability=settings.include_reliability,
        )

    def penalty(self, network: Network, solution: PowerFlowSolution) -> float:
        """Weighted normalized violations; non-convergence counts as one unit."""
        if not solution.converged:
            return self.penalty_weight * 1.0
        report = check_limits(network, solution, self.v_min, self.v_max)
        return self.penalty_weight * report.total_normalized()

    def solve_levels(self, network: Network, config: SwitchConfig) -> dict[int, PowerFlowSolution]:
        return {level.index: solve(network, config, level) for level in network.levels}

    def evaluate(self, network: Network, config: SwitchConfig) -> CostBreakdown:
        """Solve every level and price the configuration; +inf when not radial."""
        if not is_radial(network, config):
            return CostBreakdown.infeasible()
        return total_cost(network, config, self.solve_levels(network, config), self)


def total_cost(
    network: Network,
    config: SwitchConfig,
    solutions: Mapping[int, PowerFlowSolution],
    model: CostModel | None = None,
) -> CostBreakdown:
    """
    Combined cost over every load level of ``network``.

    Raises:
        MissingLevelSolutionError: if a level has no solution.
    """
    model = model or CostModel()
    if not is_radial(network, config):
        return CostBreakdown.infeasible()

    loss: dict[int, float] = {}
    reliability: dict[int, float] = {}
    penalty = 0.0
    for level in network.levels:
        solution = solutions.get(level.index)
        if solution is None:
            raise MissingLevelSolutionError(level.index)
        loss[level.index] = loss_cost(solution.total_loss, level, model.price)
        reliability[level.index] = (
            ecost(network, config, level, repair_duration=model.repair_duration)
            if model.include_reliability else 0.0
        )
        penalty += model.penalty(network, solution)
    return CostBreakdown.build(loss, reliability, penalty)
