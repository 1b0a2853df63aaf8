"""
Quench Core - Power Flow
Backward/forward sweep load flow on a radial configuration, plus thermal,
ampacity and voltage limit checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from core.network import LoadLevel, Network, RadialTree, SwitchConfig, radial_tree
from exceptions import ConvergenceError
from logging_config import get_logger

logger = get_logger(__name__)

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_SWEEPS = 100


@dataclass(eq=False)
class PowerFlowSolution:
    """
    Steady-state result for one configuration and load level.

    Per-bus arrays follow ``network.buses`` order, per-branch arrays follow
    ``network.branches`` order. Branch flows are signed in the from->to
    orientation of the branch; open branches carry zeros.
    """
    bus_ids: tuple[int, ...]
    branch_ids: tuple[int, ...]
    v_mag: np.ndarray           # pu
    v_angle: np.ndarray         # rad
    i_mag: np.ndarray           # A
    p_flow: np.ndarray          # kW, sending end
    q_flow: np.ndarray          # kVAr, sending end
    total_loss: float           # kW
    converged: bool
    iterations: int
    max_mismatch: float         # pu, worst bus power mismatch
    level_index: int
    substation_injection: complex = 0j  # kW + j kVAr
    dg_injection: float = 0.0           # kW
    load_demand: complex = 0j           # kW + j kVAr, scheduled
    reactive_loss: float = 0.0          # kVAr

    _bus_pos: dict[int, int] = field(default_factory=dict, repr=False)
    _branch_pos: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        self._bus_pos = {b: i for i, b in enumerate(self.bus_ids)}
        self._branch_pos = {b: i for i, b in enumerate(self.branch_ids)}

    def voltage(self, bus_id: int) -> float:
        return float(self.v_mag[self._bus_pos[bus_id]])

    def current(self, branch_id: int) -> float:
        return float(self.i_mag[self._branch_pos[branch_id]])

    def flow(self, branch_id: int) -> float:
        return float(self.p_flow[self._branch_pos[branch_id]])

    @property
    def min_voltage(self) -> float:
        return float(self.v_mag.min())

    @property
    def max_voltage(self) -> float:
        return float(self.v_mag.max())

    def summary(self) -> dict[str, float | int | bool]:
        """Compact record for reports."""
        return {
            "level": self.level_index,
            "total_loss_kw": round(self.total_loss, 6),
            "min_voltage_pu": round(self.min_voltage, 6),
            "max_voltage_pu": round(self.max_voltage, 6),
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass
class Violation:
    """A single limit breach."""
    kind: str        # "voltage" | "flow" | "ampacity"
    element: int     # bus or branch id
    value: float
    limit: float

    @property
    def normalized(self) -> float:
        """Relative overshoot, used by the cost penalty."""
        if self.limit == 0:
            return abs(self.value)
        return abs(self.value - self.limit) / abs(self.limit)


@dataclass
class ViolationReport:
    """Every voltage and branch limit breach of a solution."""
    violations: list[Violation] = field(default_factory=list)

    @property
    def feasible(self) -> bool:
        return not self.violations

    def of_kind(self, kind: str) -> list[Violation]:
        return [v for v in self.violations if v.kind == kind]

    @property
    def branches(self) -> list[int]:
        return sorted({v.element for v in self.violations if v.kind in ("flow", "ampacity")})

    @property
    def buses(self) -> list[int]:
        return sorted({v.element for v in self.violations if v.kind == "voltage"})

    def total_normalized(self) -> float:
        return float(sum(v.normalized for v in self.violations))

    def __bool__(self) -> bool:
        return bool(self.violations)

    def __len__(self) -> int:
        return len(self.violations)


# =============================================================================
# Sweep Matrices
# =============================================================================

@dataclass(frozen=True)
class _SweepModel:
    """Bus-injection to branch-current matrix of a radial tree."""
    order: np.ndarray        # network bus positions, breadth-first, root first
    branch_pos: np.ndarray   # network branch position feeding each non-root bus
    orientation: np.ndarray  # +1 when the branch from_bus is the parent
    bibc: np.ndarray         # (n-1, n-1), rows = tree branches, cols = non-root buses
    z_pu: np.ndarray         # per tree branch
    root_children: np.ndarray


def _sweep_model(network: Network, tree: RadialTree) -> _SweepModel:
    bus_pos = network.bus_index
    nonroot = tree.order[1:]
    local = {bus: k for k, bus in enumerate(nonroot)}
    n = len(nonroot)

    bibc = np.zeros((n, n))
    z = np.zeros(n, dtype=complex)
    branch_pos = np.zeros(n, dtype=int)
    orientation = np.ones(n)
    root_children = []
    z_base = network.z_base_ohm

    for k, bus in enumerate(nonroot):
        parent = tree.parent[bus]
        if parent == tree.root:
            root_children.append(k)
        else:
            bibc[:, k] = bibc[:, local[parent]]
        bibc[k, k] = 1.0
        branch = network.branch(tree.parent_branch[bus])
        z[k] = branch.impedance / z_base
        branch_pos[k] = network.branch_index[branch.id]
        orientation[k] = 1.0 if branch.from_bus == parent else -1.0

    return _SweepModel(
        order=np.array([bus_pos[b] for b in tree.order], dtype=int),
        branch_pos=branch_pos,
        orientation=orientation,
        bibc=bibc,
        z_pu=z,
        root_children=np.array(root_children, dtype=int),
    )


def scheduled_power_pu(network: Network, level: LoadLevel, include_dgs: bool = True) -> np.ndarray:
    """Net complex demand per bus (network order), DGs as negative unity-pf loads."""
    s_base = network.s_base_kw
    demand = np.array(
        [complex(b.load_p, b.load_q) * level.scale / s_base for b in network.buses],
        dtype=complex,
    )
    if include_dgs:
        for dg in network.dgs:
            demand[network.bus_index[dg.bus]] -= dg.capacity * 1e3 / s_base
    return demand


# =============================================================================
# Solver
# =============================================================================

def solve(
    network: Network,
    config: SwitchConfig,
    level: LoadLevel,
    *,
    tolerance: float = DEFAULT_TOLERANCE,
    max_sweeps: int = DEFAULT_MAX_SWEEPS,
) -> PowerFlowSolution:
    """
    Solve the radial load flow by backward/forward sweeps.

    Convergence is declared when the largest bus voltage change between two
    sweeps drops below ``tolerance`` (pu). A run that exhausts ``max_sweeps``
    returns ``converged=False`` with its worst power mismatch.

    Raises:
        NonRadialConfigError: if ``config`` is not radial.
    """
    tree = radial_tree(network, config)
    model = _sweep_model(network, tree)

    demand = scheduled_power_pu(network, level)
    s_nonroot = demand[model.order[1:]]
    s_root = demand[model.order[0]]

    v = np.ones(len(s_nonroot), dtype=complex)
    j = np.zeros(len(s_nonroot), dtype=complex)
    i_inj = np.zeros(len(s_nonroot), dtype=complex)
    converged = False
    sweeps = 0

    for sweeps in range(1, max_sweeps + 1):
        i_inj = np.conj(s_nonroot / v)
        j = model.bibc @ i_inj
        v_new = 1.0 - model.bibc.T @ (model.z_pu * j)
        delta = float(np.max(np.abs(v_new - v))) if len(v) else 0.0
        v = v_new
        if delta < tolerance:
            converged = True
            break

    consumption = v * np.conj(i_inj)
    max_mismatch = float(np.max(np.abs(consumption - s_nonroot))) if len(v) else 0.0

    s_base = network.s_base_kw
    i_base = network.i_base_a
    branch_loss = model.z_pu * np.abs(j) ** 2

    v_full = np.ones(len(network.buses), dtype=complex)
    v_full[model.order[1:]] = v

    n_branches = len(network.branches)
    i_mag = np.zeros(n_branches)
    p_flow = np.zeros(n_branches)
    q_flow = np.zeros(n_branches)
    if len(v):
        parent_pos = np.array(
            [network.bus_index[tree.parent[b]] for b in tree.order[1:]], dtype=int,
        )
        parent_v = v_full[parent_pos]
        sending = parent_v * np.conj(j) * s_base
        i_mag[model.branch_pos] = np.abs(j) * i_base
        p_flow[model.branch_pos] = sending.real * model.orientation
        q_flow[model.branch_pos] = sending.imag * model.orientation

    substation = (s_root + np.conj(np.sum(j[model.root_children]))) * s_base
    dg_kw = sum(dg.capacity * 1e3 for dg in network.dgs)
    scheduled = np.sum(demand) * s_base + dg_kw

    if not converged:
        logger.warning(
            f"Power flow did not converge after {sweeps} sweeps "
            f"(level={level.index}, mismatch={max_mismatch:.3e})"
        )

    return PowerFlowSolution(
        bus_ids=tuple(b.id for b in network.buses),
        branch_ids=tuple(br.id for br in network.branches),
        v_mag=np.abs(v_full),
        v_angle=np.angle(v_full),
        i_mag=i_mag,
        p_flow=p_flow,
        q_flow=q_flow,
        total_loss=float(np.sum(branch_loss.real) * s_base),
        converged=converged,
        iterations=sweeps,
        max_mismatch=max_mismatch,
        level_index=level.index,
        substation_injection=complex(substation),
        dg_injection=dg_kw,
        load_demand=complex(scheduled),
        reactive_loss=float(np.sum(branch_loss.imag) * s_base),
    )


# =============================================================================
# Limits
# =============================================================================

def check_limits(
    network: Network,
    solution: PowerFlowSolution,
    v_min: float = 0.95,
    v_max: float = 1.05,
) -> ViolationReport:
    """
    List every bus outside [v_min, v_max] and every branch at or above its
    active-flow limit or above its ampacity.

    Raises:
        ConvergenceError: if the solution did not converge.
    """
    if not solution.converged:
        raise ConvergenceError(solution.iterations, solution.max_mismatch)

    report = ViolationReport()
    for bus_id, mag in zip(solution.bus_ids, solution.v_mag):
        if mag < v_min:
            report.violations.append(Violation("voltage", bus_id, float(mag), v_min))
        elif mag > v_max:
            report.violations.append(Violation("voltage", bus_id, float(mag), v_max))

    for branch, p, amps in zip(network.branches, solution.p_flow, solution.i_mag):
        if abs(p) >= branch.flow_limit:
            report.violations.append(Violation("flow", branch.id, float(abs(p)), branch.flow_limit))
        if amps > branch.ampacity:
            report.violations.append(Violation("ampacity", branch.id, float(amps), branch.ampacity))
    return report
