"""
Quench Core - Short Circuit
Three-phase fault currents through circuit breakers for a radial configuration,
its DG fleet and an installed SFCL set, under sub-transient impedance scaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from core.network import Network, SwitchConfig, radial_tree
from exceptions import (
    FaultAnalysisError,
    FaultBusDisconnectedError,
    SfclOnOpenBranchError,
)
from logging_config import get_logger

logger = get_logger(__name__)

SUBTRANSIENT_SCALE = 0.1


# =============================================================================
# Domain Types
# =============================================================================

@dataclass(frozen=True)
class FaultScenario:
    """A three-phase fault at a bus through an optional fault impedance (ohm)."""
    fault_bus: int
    fault_impedance: float = 0.0

    def __post_init__(self) -> None:
        if self.fault_impedance < 0:
            raise FaultAnalysisError(
                "fault impedance must be non-negative",
                details={"bus": self.fault_bus},
            )


@dataclass(frozen=True, order=True)
class SfclDevice:
    """
    Resistive SFCL on a branch.

    Below the trigger current the device sits at ``min_impedance``; once the
    prospective branch current exceeds ``trigger_current`` it quenches and
    inserts ``impedance``.
    """
    branch: int
    impedance: float                 # ohm
    trigger_current: float = 700.0   # A
    response_time: float = 2.0       # ms, informational
    min_impedance: float = 0.01      # ohm
    max_impedance: float = 20.0      # ohm

    def __post_init__(self) -> None:
        if not self.min_impedance <= self.impedance <= self.max_impedance:
            raise FaultAnalysisError(
                "SFCL impedance outside its bounds",
                details={
                    "branch": self.branch,
                    "impedance": self.impedance,
                    "bounds": (self.min_impedance, self.max_impedance),
                },
            )
        if self.trigger_current <= 0:
            raise FaultAnalysisError("trigger current must be positive", details={"branch": self.branch})

    def with_impedance(self, impedance: float) -> SfclDevice:
        return replace(self, impedance=impedance)


@dataclass
class FaultReport:
    """Breaker currents for one scenario."""
    scenario: FaultScenario
    cb_currents: dict[int, float]               # A
    worst_cb: int | None
    worst_current: float                        # A
    violated: frozenset[int]
    fault_current_pu: float = 0.0
    fault_current_a: float = 0.0
    quenched: frozenset[int] = frozenset()
    contributions: dict[str, float] = field(default_factory=dict)  # source label -> A

    def to_dict(self) -> dict[str, object]:
        return {
            "fault_bus": self.scenario.fault_bus,
            "fault_impedance_ohm": self.scenario.fault_impedance,
            "cb_currents_a": {str(k): round(v, 3) for k, v in sorted(self.cb_currents.items())},
            "worst_cb": self.worst_cb,
            "worst_current_a": round(self.worst_current, 3),
            "violated": sorted(self.violated),
            "fault_current_a": round(self.fault_current_a, 3),
            "quenched": sorted(self.quenched),
        }


@dataclass
class ScanResult:
    """Per-breaker worst current over a fault set."""
    cb_worst: dict[int, float]        # A
    cb_worst_bus: dict[int, int]
    ratings: dict[int, float]         # A

    @property
    def worst_cb(self) -> int | None:
        if not self.cb_worst:
            return None
        return max(sorted(self.cb_worst), key=lambda cb: self.cb_worst[cb])

    @property
    def worst_current(self) -> float:
        return max(self.cb_worst.values(), default=0.0)

    @property
    def violated(self) -> frozenset[int]:
        return frozenset(cb for cb, amps in self.cb_worst.items() if amps > self.ratings[cb])

    @property
    def residuals(self) -> dict[int, float]:
        """Overshoot in A at every violated breaker."""
        return {cb: self.cb_worst[cb] - self.ratings[cb] for cb in sorted(self.violated)}

    @property
    def feasible(self) -> bool:
        return not self.violated

    def worst_normalized_violation(self) -> float:
        """Largest (I - rating) / rating; non-positive when feasible."""
        if not self.cb_worst:
            return -np.inf
        return max((self.cb_worst[cb] - self.ratings[cb]) / self.ratings[cb] for cb in self.cb_worst)

    def summary(self) -> dict[str, object]:
        return {
            "worst_cb": self.worst_cb,
            "worst_current_a": round(self.worst_current, 3),
            "violated": sorted(self.violated),
            "cb_worst_a": {str(k): round(v, 3) for k, v in sorted(self.cb_worst.items())},
            "cb_worst_bus": {str(k): v for k, v in sorted(self.cb_worst_bus.items())},
        }


# =============================================================================
# Views and Fault Sets
# =============================================================================

def subtransient_view(network: Network, factor: float = SUBTRANSIENT_SCALE) -> Network:
    """
    Scale every branch impedance and the substation Thevenin impedance by
    ``factor``. Loads and DG reactances are untouched. Apply once.
    """
    branches = tuple(
        replace(br, resistance=br.resistance * factor, reactance=br.reactance * factor)
        for br in network.branches
    )
    return replace(network, branches=branches, source_impedance=network.source_impedance * factor)


def default_fault_set(
    network: Network,
    fault_impedance: float = 0.0,
    buses: Iterable[int] | None = None,
) -> tuple[FaultScenario, ...]:
    """One fault per bus, bolted unless ``fault_impedance`` is given."""
    ids = [b.id for b in network.buses] if buses is None else list(buses)
    for bus_id in ids:
        network.bus(bus_id)
    return tuple(FaultScenario(bus_id, fault_impedance) for bus_id in ids)


# =============================================================================
# Fault Study
# =============================================================================

class FaultStudy:
    """
    Precomputed source paths for one configuration and fault set.

    Every source (the substation behind its Thevenin impedance and each DG
    behind its sub-transient reactance) is an ideal 1.0 pu source feeding the
    fault along its unique radial path. The per-scenario incidence of branches
    on those paths is built once, so evaluating a device set only costs a few
    array contractions.
    """

    def __init__(
        self,
        network: Network,
        config: SwitchConfig,
        fault_set: Sequence[FaultScenario],
        cb_ratings: dict[int, float] | None = None,
    ) -> None:
        self.network = network
        self.config = config
        self.fault_set = tuple(fault_set)
        self.tree = radial_tree(network, config)

        self.ratings = dict(cb_ratings) if cb_ratings is not None else {
            br.id: float(br.cb_rating) for br in network.branches if br.has_cb
        }
        self.cb_ids = tuple(sorted(self.ratings))
        for cb in self.cb_ids:
            network.branch(cb)

        z_base = network.z_base_ohm
        self.z_base = z_base
        self.i_base = network.i_base_a

        sources: list[tuple[str, int, complex]] = [
            ("substation", network.substation.id, network.source_impedance / z_base)
        ]
        for dg in network.dgs:
            sources.append((f"dg@{dg.bus}", dg.bus, complex(0.0, dg.subtransient_reactance) / z_base))
        self.source_labels = tuple(label for label, _, _ in sources)

        n_scen = len(self.fault_set)
        n_src = len(sources)
        n_br = len(network.branches)
        self.signs = np.zeros((n_scen, n_br, n_src))
        self.z0 = np.zeros((n_scen, n_src), dtype=complex)

        branch_z = {br.id: br.impedance / z_base for br in network.branches}
        for s, scenario in enumerate(self.fault_set):
            network.bus(scenario.fault_bus)
            if scenario.fault_bus not in self.tree.depth:
                raise FaultBusDisconnectedError(scenario.fault_bus)
            z_fault = scenario.fault_impedance / z_base
            for k, (_, bus, z_src) in enumerate(sources):
                z_path = 0j
                for branch_id, sign in self.tree.signed_path(bus, scenario.fault_bus):
                    self.signs[s, network.branch_index[branch_id], k] = sign
                    z_path += branch_z[branch_id]
                self.z0[s, k] = z_src + z_path + z_fault

        cb_pos = [network.branch_index[cb] for cb in self.cb_ids]
        self.cb_signs = self.signs[:, cb_pos, :]

    # -------------------------------------------------------------------------

    def _device_arrays(
        self, sfcls: Iterable[SfclDevice],
    ) -> tuple[list[SfclDevice], np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        devices = sorted(sfcls, key=lambda d: d.branch)
        for device in devices:
            self.network.branch(device.branch)
            if self.config.is_open(device.branch):
                raise SfclOnOpenBranchError(device.branch)
        pos = [self.network.branch_index[d.branch] for d in devices]
        z_min = np.array([d.min_impedance for d in devices]) / self.z_base
        z_on = np.array([d.impedance for d in devices]) / self.z_base
        trigger = np.array([d.trigger_current for d in devices])
        return devices, np.array(pos, dtype=int), z_min, z_on, trigger

    def _solve(self, sfcls: Iterable[SfclDevice]) -> tuple[np.ndarray, np.ndarray, list[SfclDevice]]:
        """Source currents (scen x src, pu) and the quench mask (scen x dev)."""
        devices, pos, z_min, z_on, trigger = self._device_arrays(sfcls)
        with np.errstate(divide="ignore", invalid="ignore"):
            if not devices:
                return 1.0 / self.z0, np.zeros((len(self.fault_set), 0), dtype=bool), devices

            dev_signs = self.signs[:, pos, :]
            on_path = np.abs(dev_signs)

            prospective = 1.0 / (self.z0 + np.einsum("sdk,d->sk", on_path, z_min))
            dev_current = np.abs(np.einsum("sdk,sk->sd", dev_signs, prospective)) * self.i_base
            quenched = dev_current > trigger[None, :]

            inserted = np.where(quenched, z_on[None, :], z_min[None, :])
            currents = 1.0 / (self.z0 + np.einsum("sdk,sd->sk", on_path, inserted))
        return currents, quenched, devices

    def cb_currents(self, sfcls: Iterable[SfclDevice] = ()) -> np.ndarray:
        """Breaker current magnitudes in A, shape (scenarios, breakers)."""
        currents, _, _ = self._solve(sfcls)
        return np.abs(np.einsum("sck,sk->sc", self.cb_signs, currents)) * self.i_base

    def report(self, index: int, sfcls: Iterable[SfclDevice] = ()) -> FaultReport:
        """Full report for one scenario of the fault set."""
        currents, quenched, devices = self._solve(sfcls)
        cb_amps = np.abs(self.cb_signs[index] @ currents[index]) * self.i_base
        per_cb = {cb: float(a) for cb, a in zip(self.cb_ids, cb_amps)}
        worst_cb = max(sorted(per_cb), key=lambda cb: per_cb[cb]) if per_cb else None
        total = complex(np.sum(currents[index]))
        return FaultReport(
            scenario=self.fault_set[index],
            cb_currents=per_cb,
            worst_cb=worst_cb,
            worst_current=per_cb[worst_cb] if worst_cb is not None else 0.0,
            violated=frozenset(cb for cb, a in per_cb.items() if a > self.ratings[cb]),
            fault_current_pu=abs(total),
            fault_current_a=abs(total) * self.i_base,
            quenched=frozenset(d.branch for d, q in zip(devices, quenched[index]) if q),
            contributions={
                label: float(abs(c)) * self.i_base
                for label, c in zip(self.source_labels, currents[index])
            },
        )

    def scan(self, sfcls: Iterable[SfclDevice] = ()) -> ScanResult:
        """Worst breaker currents over the whole fault set."""
        amps = self.cb_currents(sfcls)
        cb_worst: dict[int, float] = {}
        cb_worst_bus: dict[int, int] = {}
        if amps.size:
            worst_idx = np.argmax(amps, axis=0)
            for c, cb in enumerate(self.cb_ids):
                cb_worst[cb] = float(amps[worst_idx[c], c])
                cb_worst_bus[cb] = self.fault_set[int(worst_idx[c])].fault_bus
        else:
            for cb in self.cb_ids:
                cb_worst[cb] = 0.0
        return ScanResult(cb_worst, cb_worst_bus, {cb: self.ratings[cb] for cb in self.cb_ids})


# =============================================================================
# Module API
# =============================================================================

def fault_current(
    network: Network,
    config: SwitchConfig,
    scenario: FaultScenario,
    sfcls: Iterable[SfclDevice] = (),
) -> FaultReport:
    """
    Breaker currents for a single fault.

    Raises:
        NonRadialConfigError: if ``config`` is not radial.
        FaultBusDisconnectedError: if the fault bus is not energized.
        SfclOnOpenBranchError: if a device sits on an open branch.
    """
    return FaultStudy(network, config, (scenario,)).report(0, sfcls)


def max_fault_scan(
    network: Network,
    config: SwitchConfig,
    sfcls: Iterable[SfclDevice],
    fault_set: Sequence[FaultScenario],
) -> dict[int, float]:
    """Worst current (A) per breaker over ``fault_set``."""
    result = FaultStudy(network, config, fault_set).scan(sfcls)
    logger.debug(
        f"Fault scan over {len(fault_set)} scenarios: worst CB {result.worst_cb} "
        f"at {result.worst_current:.1f} A"
    )
    return result.cb_worst
