"""
Quench Core - Reconfiguration
Maps spider positions to radial switch configurations, prices them per load level
with a cached objective, and runs the colony search or the exhaustive oracle.
"""

from __future__ import annotations

import itertools
import math
import threading
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator

import networkx as nx
import numpy as np

from core.costs import CostBreakdown, CostModel
from core.mssa import Bounds, OptimizationResult, SsaParams, TraceRow, optimize
from core.network import LoadLevel, Network, SwitchConfig, fundamental_loops, is_radial
from core.power_flow import PowerFlowSolution, solve
from exceptions import TopologyError
from logging_config import get_logger, log_operation

logger = get_logger(__name__)


# =============================================================================
# Encoding
# =============================================================================

@dataclass(frozen=True)
class Encoding:
    """One coordinate per fundamental loop; coordinate k indexes loop k's switches."""
    loops: tuple[tuple[int, ...], ...]

    @classmethod
    def from_network(cls, network: Network) -> Encoding:
        switchable = set(network.switchable_branches())
        loops = []
        for loop in fundamental_loops(network):
            members = tuple(b for b in loop if b in switchable)
            if not members:
                raise TopologyError("a fundamental loop has no switchable branch", details={"loop": loop})
            loops.append(members)
        return cls(tuple(loops))

    @property
    def dim(self) -> int:
        return len(self.loops)

    @property
    def bounds(self) -> Bounds:
        return Bounds(np.zeros(self.dim), np.array([float(len(loop)) for loop in self.loops]))

    def index(self, k: int, value: float) -> int:
        """Half-up rounding into loop k, clipped to the last switch."""
        return min(max(int(math.floor(value + 0.5)), 0), len(self.loops[k]) - 1)


def decode(encoding: Encoding, position: np.ndarray) -> SwitchConfig:
    """Open the rounded-to switch of every loop. The result may be non-radial."""
    return SwitchConfig.of(
        encoding.loops[k][encoding.index(k, float(x))] for k, x in enumerate(position)
    )


def encode(encoding: Encoding, config: SwitchConfig) -> np.ndarray:
    """
    A position that decodes to ``config``.

    Open branches are matched to loops through a bipartite matching, which
    exists for every radial configuration.

    Raises:
        TopologyError: when no loop-to-branch assignment reproduces ``config``.
    """
    opened = config.sorted()
    if len(opened) != encoding.dim:
        raise TopologyError(
            f"config opens {len(opened)} branches, the encoding has {encoding.dim} loops",
            details={"open": opened},
        )
    graph = nx.Graph()
    loop_nodes = [("loop", k) for k in range(encoding.dim)]
    graph.add_nodes_from(loop_nodes, bipartite=0)
    graph.add_nodes_from((("branch", b) for b in opened), bipartite=1)
    for k, loop in enumerate(encoding.loops):
        for b in opened:
            if b in loop:
                graph.add_edge(("loop", k), ("branch", b))

    matching = nx.bipartite.hopcroft_karp_matching(graph, top_nodes=loop_nodes)
    position = np.zeros(encoding.dim)
    for k in range(encoding.dim):
        partner = matching.get(("loop", k))
        if partner is None:
            raise TopologyError("config cannot be expressed in this loop basis", details={"open": opened})
        position[k] = float(encoding.loops[k].index(partner[1]))
    return position


def enumerate_radial_configs(network: Network, encoding: Encoding | None = None) -> Iterator[SwitchConfig]:
    """Every distinct radial configuration reachable with one open switch per loop."""
    encoding = encoding or Encoding.from_network(network)
    seen: set[frozenset[int]] = set()
    for combo in itertools.product(*encoding.loops):
        opened = frozenset(combo)
        if len(opened) != encoding.dim or opened in seen:
            continue
        seen.add(opened)
        config = SwitchConfig(opened)
        if is_radial(network, config):
            yield config


# =============================================================================
# Objective
# =============================================================================

def level_view(network: Network, level: LoadLevel) -> Network:
    """The network restricted to a single load level."""
    return replace(network, levels=(level,))


class ReconfigurationObjective:
    """
    Cost of a position for one network view, cached by open-switch set.

    Non-radial decodes score +inf without running a power flow.
    """

    def __init__(self, network: Network, encoding: Encoding, cost_model: CostModel) -> None:
        self.network = network
        self.encoding = encoding
        self.cost_model = cost_model
        self._cache: dict[frozenset[int], CostBreakdown] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def breakdown(self, config: SwitchConfig) -> CostBreakdown:
        key = config.open_branches
        with self._lock:
            cached = self._cache.get(key)
            if cached is not None:
                self.hits += 1
                return cached
            self.misses += 1
        result = self.cost_model.evaluate(self.network, config)
        with self._lock:
            self._cache.setdefault(key, result)
        return result

    def __call__(self, position: np.ndarray) -> float:
        return self.breakdown(decode(self.encoding, position)).total

    @property
    def cache_size(self) -> int:
        return len(self._cache)


# =============================================================================
# Search
# =============================================================================

@dataclass
class ReconfigurationResult:
    """Best configuration of one load level."""
    level: LoadLevel
    config: SwitchConfig
    cost: CostBreakdown
    solution: PowerFlowSolution
    trace: list[TraceRow] = field(default_factory=list)
    evaluations: int = 0
    cache_hits: int = 0
    cache_misses: int = 0


def reconfigure_level(
    network: Network,
    level: LoadLevel,
    cost_model: CostModel,
    params: SsaParams,
    *,
    warm_start: bool = True,
    on_iteration: Callable[[TraceRow], None] | None = None,
) -> ReconfigurationResult:
    """Colony search for the cheapest radial configuration of one level."""
    view = level_view(network, level)
    encoding = Encoding.from_network(network)
    objective = ReconfigurationObjective(view, encoding, cost_model)

    starts = []
    if warm_start:
        base = network.base_config()
        if is_radial(network, base):
            starts.append(encode(encoding, base))

    result: OptimizationResult = optimize(
        objective, encoding.bounds, params,
        initial_positions=starts, on_iteration=on_iteration,
    )
    config = decode(encoding, result.best_position)
    if not is_radial(network, config):
        raise TopologyError("colony search found no radial configuration", details={"level": level.index})

    breakdown = objective.breakdown(config)
    log_operation(logger, f"Reconfiguration level {level.index}", True, {
        "open": config.label,
        "total": f"{breakdown.total:.2f}",
        "cache_hits": objective.hits,
        "cache_misses": objective.misses,
    })
    return ReconfigurationResult(
        level=level,
        config=config,
        cost=breakdown,
        solution=solve(network, config, level),
        trace=result.trace,
        evaluations=result.evaluations,
        cache_hits=objective.hits,
        cache_misses=objective.misses,
    )


def exhaustive_optimum(
    network: Network,
    cost_model: CostModel,
    encoding: Encoding | None = None,
) -> tuple[SwitchConfig, CostBreakdown]:
    """
    Brute-force oracle over every radial configuration of the loop basis.

    Ties resolve to the lexicographically smallest open set.
    """
    best_config: SwitchConfig | None = None
    best = CostBreakdown.infeasible()
    for config in enumerate_radial_configs(network, encoding):
        cost = cost_model.evaluate(network, config)
        if cost.total < best.total or (
            cost.total == best.total and best_config is not None and config.sorted() < best_config.sorted()
        ):
            best_config, best = config, cost
    if best_config is None:
        raise TopologyError("network has no radial configuration")
    return best_config, best
