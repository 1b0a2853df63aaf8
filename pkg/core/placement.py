"""
Quench Core - SFCL Placement
Chooses SFCL locations and resistances per configuration so that every breaker
stays within rating, then aggregates the per-level plans into one installation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Sequence

from core.network import Network, SwitchConfig, is_radial
from core.short_circuit import (
    SUBTRANSIENT_SCALE,
    FaultScenario,
    FaultStudy,
    ScanResult,
    SfclDevice,
    default_fault_set,
    subtransient_view,
)
from exceptions import (
    InfeasiblePlacementError,
    NonRadialConfigError,
    PlacementError,
    UnusableCandidateError,
)
from logging_config import get_logger, log_operation

logger = get_logger(__name__)


# =============================================================================
# Problem and Result
# =============================================================================

@dataclass(frozen=True)
class PlacementProblem:
    """Candidates, device limits, breaker ratings and the fault set to cover."""
    candidates: tuple[int, ...]
    omega: float = 10.0
    impedance_bounds: tuple[float, float] = (0.01, 20.0)
    cb_constraints: dict[int, float] = field(default_factory=dict, hash=False)
    fault_set: tuple[FaultScenario, ...] = ()
    trigger_current: float = 700.0
    response_time: float = 2.0
    exhaustive_cap: int = 12
    tolerance: float = 1e-3
    max_bisections: int = 60
    subtransient_scale: float = SUBTRANSIENT_SCALE

    def __post_init__(self) -> None:
        if not self.candidates:
            raise PlacementError("placement needs at least one candidate branch")
        z_min, z_max = self.impedance_bounds
        if not 0 <= z_min <= z_max:
            raise PlacementError("impedance bounds must satisfy 0 <= z_min <= z_max")
        if self.omega < 0:
            raise PlacementError("omega must be non-negative")
        object.__setattr__(self, "candidates", tuple(sorted(set(self.candidates))))

    @property
    def z_min(self) -> float:
        return self.impedance_bounds[0]

    @property
    def z_max(self) -> float:
        return self.impedance_bounds[1]

    def device(self, branch: int, impedance: float) -> SfclDevice:
        z = min(max(impedance, self.z_min), self.z_max)
        return SfclDevice(
            branch=branch,
            impedance=z,
            trigger_current=self.trigger_current,
            response_time=self.response_time,
            min_impedance=self.z_min,
            max_impedance=self.z_max,
        )

    def devices(self, impedances: Mapping[int, float]) -> list[SfclDevice]:
        return [self.device(b, z) for b, z in sorted(impedances.items())]

    def objective(self, impedances: Mapping[int, float]) -> float:
        return float(sum(impedances.values()) + self.omega * len(impedances))

    @classmethod
    def for_network(
        cls,
        network: Network,
        settings: Any | None = None,
        fault_settings: Any | None = None,
    ) -> PlacementProblem:
        """
        Default problem: CB branches plus DG branches as candidates, breaker
        ratings from the grid and a fault at every bus. ``settings`` is a
        ``config.PlacementSettings`` and ``fault_settings`` a ``config.FaultSettings``.
        """
        candidates = getattr(settings, "candidates", None) or sorted(
            set(network.cb_branches()) | set(network.dg_branches())
        )
        override = getattr(settings, "cb_rating_a", None)
        ratings = {
            br.id: float(override if override is not None else br.cb_rating)
            for br in network.branches if br.has_cb
        }
        fault_set = default_fault_set(
            network,
            fault_impedance=getattr(fault_settings, "fault_impedance_ohm", 0.0),
            buses=getattr(fault_settings, "fault_buses", None),
        )
        kwargs: dict[str, Any] = {}
        if settings is not None:
            kwargs = dict(
                omega=settings.omega,
                impedance_bounds=(settings.z_min_ohm, settings.z_max_ohm),
                trigger_current=settings.trigger_current_a,
                response_time=settings.response_time_ms,
                exhaustive_cap=settings.exhaustive_cap,
                tolerance=settings.tolerance_ohm,
                max_bisections=settings.max_bisections,
            )
        if fault_settings is not None:
            kwargs["subtransient_scale"] = fault_settings.subtransient_scale
        return cls(
            candidates=tuple(candidates),
            cb_constraints=ratings,
            fault_set=fault_set,
            **kwargs,
        )


@dataclass
class SfclPlacementResult:
    """Chosen devices with their objective value and feasibility record."""
    devices: tuple[SfclDevice, ...] = ()
    objective: float = 0.0
    feasible: bool = True
    residual_violations: dict[int, float] = field(default_factory=dict)
    omega: float = 10.0
    mode: str = "exhaustive"

    @property
    def branches(self) -> tuple[int, ...]:
        return tuple(d.branch for d in self.devices)

    @property
    def impedances(self) -> dict[int, float]:
        return {d.branch: d.impedance for d in self.devices}

    def rows(self) -> list[tuple[int, float]]:
        """(location, resistance in ohm) per device."""
        return [(d.branch, d.impedance) for d in self.devices]

    def to_dict(self) -> dict[str, Any]:
        return {
            "devices": [
                {
                    "branch": d.branch,
                    "impedance_ohm": d.impedance,
                    "trigger_current_a": d.trigger_current,
                    "response_time_ms": d.response_time,
                    "min_impedance_ohm": d.min_impedance,
                    "max_impedance_ohm": d.max_impedance,
                }
                for d in self.devices
            ],
            "objective": self.objective if math.isfinite(self.objective) else None,
            "feasible": self.feasible,
            "residual_violations": {str(k): v for k, v in sorted(self.residual_violations.items())},
            "omega": self.omega,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> SfclPlacementResult:
        objective = data.get("objective")
        return cls(
            devices=tuple(
                SfclDevice(
                    branch=int(d["branch"]),
                    impedance=float(d["impedance_ohm"]),
                    trigger_current=float(d["trigger_current_a"]),
                    response_time=float(d["response_time_ms"]),
                    min_impedance=float(d["min_impedance_ohm"]),
                    max_impedance=float(d["max_impedance_ohm"]),
                )
                for d in data.get("devices", [])
            ),
            objective=math.inf if objective is None else float(objective),
            feasible=bool(data.get("feasible", False)),
            residual_violations={int(k): float(v) for k, v in data.get("residual_violations", {}).items()},
            omega=float(data.get("omega", 10.0)),
            mode=str(data.get("mode", "exhaustive")),
        )


# =============================================================================
# Sizing
# =============================================================================

def build_study(problem: PlacementProblem, network: Network, config: SwitchConfig) -> FaultStudy:
    """Fault study on the sub-transient view of ``network``."""
    view = subtransient_view(network, problem.subtransient_scale)
    fault_set = problem.fault_set or default_fault_set(network)
    ratings = problem.cb_constraints or None
    return FaultStudy(view, config, fault_set, ratings)


def _scan(problem: PlacementProblem, study: FaultStudy, impedances: Mapping[int, float]) -> ScanResult:
    return study.scan(problem.devices(impedances))


def min_impedance_for_set(
    problem: PlacementProblem,
    branch_set: Iterable[int],
    study: FaultStudy,
) -> dict[int, float] | None:
    """
    Componentwise-minimal resistances on ``branch_set`` that keep every
    breaker within rating, or None when even every device at Z_max fails.

    Bisects a common scale between Z_min and Z_max, then trims each device
    on its own, largest resistance first (ties by branch id).

    Raises:
        PlacementError: if a branch is not a candidate.
        UnusableCandidateError: if a branch is open in the study's configuration.
    """
    branches = sorted(set(branch_set))
    for branch in branches:
        if branch not in problem.candidates:
            raise PlacementError(f"branch {branch} is not a placement candidate", details={"branch": branch})
        if study.config.is_open(branch):
            raise UnusableCandidateError(branch)

    if not branches:
        return {} if study.scan(()).feasible else None

    z_min, z_max = problem.z_min, problem.z_max
    at = lambda scale: {b: z_min + scale * (z_max - z_min) for b in branches}  # noqa: E731

    if _scan(problem, study, at(0.0)).feasible:
        return at(0.0)
    if not _scan(problem, study, at(1.0)).feasible:
        return None

    lo, hi = 0.0, 1.0
    width = z_max - z_min
    for _ in range(problem.max_bisections):
        if (hi - lo) * width <= problem.tolerance:
            break
        mid = 0.5 * (lo + hi)
        if _scan(problem, study, at(mid)).feasible:
            hi = mid
        else:
            lo = mid
    sized = at(hi)

    for branch in sorted(branches, key=lambda b: (-sized[b], b)):
        lo_z, hi_z = z_min, sized[branch]
        trial = dict(sized)
        trial[branch] = lo_z
        if _scan(problem, study, trial).feasible:
            sized[branch] = lo_z
            continue
        for _ in range(problem.max_bisections):
            if hi_z - lo_z <= problem.tolerance:
                break
            mid = 0.5 * (lo_z + hi_z)
            trial[branch] = mid
            if _scan(problem, study, trial).feasible:
                hi_z = mid
            else:
                lo_z = mid
        sized[branch] = hi_z
    return sized


# =============================================================================
# Search
# =============================================================================

def _usable_candidates(problem: PlacementProblem, config: SwitchConfig) -> list[int]:
    usable = [c for c in problem.candidates if not config.is_open(c)]
    skipped = sorted(set(problem.candidates) - set(usable))
    if skipped:
        logger.debug(f"Skipping candidates open in {config.label}: {skipped}")
    return usable


def _infeasible(problem: PlacementProblem, study: FaultStudy, candidates: list[int], mode: str) -> SfclPlacementResult:
    worst = _scan(problem, study, {c: problem.z_max for c in candidates})
    return SfclPlacementResult(
        devices=(),
        objective=math.inf,
        feasible=False,
        residual_violations=worst.residuals,
        omega=problem.omega,
        mode=mode,
    )


def _exhaustive(problem: PlacementProblem, study: FaultStudy, candidates: list[int]) -> dict[int, float] | None:
    best: dict[int, float] | None = None
    best_value = math.inf
    for k in range(1, len(candidates) + 1):
        for subset in itertools.combinations(candidates, k):
            sized = min_impedance_for_set(problem, subset, study)
            if sized is None:
                continue
            value = problem.objective(sized)
            if value < best_value:
                best, best_value = sized, value
        # no larger set can beat the incumbent
        if best_value <= problem.omega * (k + 1) + (k + 1) * problem.z_min:
            break
    return best


def _greedy(problem: PlacementProblem, study: FaultStudy, candidates: list[int]) -> dict[int, float] | None:
    chosen: list[int] = []
    remaining = list(candidates)
    while not _scan(problem, study, {b: problem.z_max for b in chosen}).feasible:
        if not remaining:
            return None
        scores = []
        for c in remaining:
            trial = {b: problem.z_max for b in [*chosen, c]}
            scores.append((_scan(problem, study, trial).worst_normalized_violation(), c))
        _, pick = min(scores)
        chosen.append(pick)
        remaining.remove(pick)

    sized = min_impedance_for_set(problem, chosen, study)
    if sized is None:
        return None

    for branch in sorted(chosen):
        if branch not in sized or len(sized) == 1:
            continue
        reduced = min_impedance_for_set(problem, [b for b in sized if b != branch], study)
        if reduced is not None and problem.objective(reduced) < problem.objective(sized):
            sized = reduced
    return sized


def place(problem: PlacementProblem, network: Network, config: SwitchConfig) -> SfclPlacementResult:
    """
    Cheapest feasible device set for ``config`` under Sum(Z) + omega * |S|.

    Exhaustive over subsets by increasing size then lexicographic order when
    the usable candidates fit ``exhaustive_cap``; greedy otherwise. An
    infeasible problem returns ``feasible=False`` with the residual overshoot
    of every breaker when all candidates sit at Z_max.

    Raises:
        NonRadialConfigError: if ``config`` is not radial.
    """
    if not is_radial(network, config):
        raise NonRadialConfigError(config.open_branches)

    study = build_study(problem, network, config)
    candidates = _usable_candidates(problem, config)
    mode = "exhaustive" if len(candidates) <= problem.exhaustive_cap else "greedy"

    if study.scan(()).feasible:
        return SfclPlacementResult(objective=0.0, feasible=True, omega=problem.omega, mode=mode)

    sized = _exhaustive(problem, study, candidates) if mode == "exhaustive" else _greedy(problem, study, candidates)
    if sized is None:
        result = _infeasible(problem, study, candidates, mode)
        log_operation(logger, "SFCL placement", False, {
            "config": config.label, "mode": mode, "residuals": result.residual_violations,
        })
        return result

    devices = tuple(problem.devices(sized))
    result = SfclPlacementResult(
        devices=devices,
        objective=problem.objective(sized),
        feasible=True,
        omega=problem.omega,
        mode=mode,
    )
    log_operation(logger, "SFCL placement", True, {
        "config": config.label,
        "mode": mode,
        "devices": {d.branch: round(d.impedance, 4) for d in devices},
    })
    return result


# =============================================================================
# Verification and Aggregation
# =============================================================================

def verify_plan(
    problem: PlacementProblem,
    network: Network,
    config: SwitchConfig,
    devices: Iterable[SfclDevice],
) -> ScanResult:
    """Scan ``config`` with the devices whose branch is closed in it."""
    study = build_study(problem, network, config)
    return study.scan([d for d in devices if not config.is_open(d.branch)])


def aggregate(
    results: Sequence[SfclPlacementResult],
    contexts: Sequence[tuple[Network, SwitchConfig, PlacementProblem]] = (),
) -> SfclPlacementResult:
    """
    Union of the per-level device sets, each branch at its largest resistance,
    re-verified on every (network, config, problem) context given.

    Raises:
        InfeasiblePlacementError: if an input level is infeasible.
    """
    if not results:
        raise PlacementError("nothing to aggregate")
    for i, result in enumerate(results):
        if not result.feasible:
            raise InfeasiblePlacementError(
                f"cannot aggregate: level input {i + 1} is infeasible",
                residuals=result.residual_violations,
            )

    merged: dict[int, SfclDevice] = {}
    for result in results:
        for device in result.devices:
            current = merged.get(device.branch)
            if current is None or device.impedance > current.impedance:
                merged[device.branch] = device
    devices = tuple(merged[b] for b in sorted(merged))
    omega = results[0].omega

    residuals: dict[int, float] = {}
    for network, config, problem in contexts:
        scan = verify_plan(problem, network, config, devices)
        for cb, overshoot in scan.residuals.items():
            residuals[cb] = max(residuals.get(cb, 0.0), overshoot)

    feasible = not residuals
    if not feasible:
        logger.warning(f"Aggregated plan violates breaker ratings: {residuals}")
    return SfclPlacementResult(
        devices=devices,
        objective=float(sum(d.impedance for d in devices) + omega * len(devices)),
        feasible=feasible,
        residual_violations=residuals,
        omega=omega,
        mode="aggregate",
    )
