"""
Quench Core Package
Grid model, power flow, fault study, costs, the spider colony optimizer,
reconfiguration, SFCL placement, the pipeline and its report.
"""

from core.network import Network, SwitchConfig, load_grid, load_bundled_grid, is_radial
from core.power_flow import PowerFlowSolution, check_limits, solve
from core.short_circuit import FaultScenario, FaultStudy, SfclDevice, fault_current, max_fault_scan
from core.costs import CostBreakdown, CostModel, total_cost
from core.mssa import Bounds, SsaParams, SocialSpiderOptimizer, optimize
from core.reconfiguration import Encoding, decode, encode, reconfigure_level
from core.placement import PlacementProblem, SfclPlacementResult, aggregate, place, verify_plan

__all__ = [
    # Grid
    "Network",
    "SwitchConfig",
    "load_grid",
    "load_bundled_grid",
    "is_radial",
    # Power flow
    "PowerFlowSolution",
    "check_limits",
    "solve",
    # Faults
    "FaultScenario",
    "FaultStudy",
    "SfclDevice",
    "fault_current",
    "max_fault_scan",
    # Costs
    "CostBreakdown",
    "CostModel",
    "total_cost",
    # Optimizer
    "Bounds",
    "SsaParams",
    "SocialSpiderOptimizer",
    "optimize",
    # Reconfiguration
    "Encoding",
    "decode",
    "encode",
    "reconfigure_level",
    # Placement
    "PlacementProblem",
    "SfclPlacementResult",
    "aggregate",
    "place",
    "verify_plan",
]
