"""
Quench Core - Grid Model
Typed reconfigurable distribution network, grid file ingestion and topology predicates
(radiality, connectivity, fundamental loops).
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Iterator

import networkx as nx
from networkx.utils import UnionFind

from exceptions import (
    GridParseError,
    GridValidationError,
    NonRadialConfigError,
    TopologyError,
    UnknownBranchError,
    UnknownBusError,
)
from logging_config import get_logger

logger = get_logger(__name__)

YEAR_DAYS = 365.0
_DURATION_TOL = 1e-6


class SwitchKind(Enum):
    """Switch fitted to a branch."""
    SECTIONALIZING = "sectionalizing"
    TIE = "tie"
    NONE = "none"


# =============================================================================
# Domain Types
# =============================================================================

@dataclass(frozen=True)
class Bus:
    """A network node with its peak load."""
    id: int
    load_p: float = 0.0   # kW at peak
    load_q: float = 0.0   # kVAr at peak
    interruption_cost_ref: str = "default"
    is_substation: bool = False


@dataclass(frozen=True)
class Branch:
    """A line section between two buses. Impedances in ohm."""
    id: int
    from_bus: int
    to_bus: int
    resistance: float
    reactance: float
    switch_kind: SwitchKind = SwitchKind.SECTIONALIZING
    failure_rate: float = 0.0      # failures / year
    ampacity: float = math.inf     # A
    flow_limit: float = math.inf   # kW
    cb_rating: float | None = None  # A, present iff the branch carries a breaker

    @property
    def has_cb(self) -> bool:
        return self.cb_rating is not None

    @property
    def is_switchable(self) -> bool:
        return self.switch_kind is not SwitchKind.NONE

    @property
    def is_tie(self) -> bool:
        return self.switch_kind is SwitchKind.TIE

    @property
    def impedance(self) -> complex:
        return complex(self.resistance, self.reactance)


@dataclass(frozen=True)
class DistributedGenerator:
    """Synchronous DG modeled as a PQ injection and a sub-transient source."""
    bus: int
    capacity: float                # MW
    subtransient_reactance: float  # ohm


@dataclass(frozen=True)
class LoadLevel:
    """One step of the load duration curve."""
    index: int
    scale: float     # fraction of peak
    duration: float  # days


@dataclass(frozen=True)
class CcdfCurve:
    """Customer damage function as (duration min, cost $/kW) knots."""
    knots: tuple[tuple[float, float], ...]

    @property
    def durations(self) -> tuple[float, ...]:
        return tuple(d for d, _ in self.knots)

    @property
    def costs(self) -> tuple[float, ...]:
        return tuple(c for _, c in self.knots)

    def issues(self) -> list[str]:
        problems = []
        if len(self.knots) < 2:
            problems.append("needs at least 2 knots")
            return problems
        durations = self.durations
        costs = self.costs
        if any(d <= 0 for d in durations):
            problems.append("durations must be positive")
        if any(b <= a for a, b in zip(durations, durations[1:])):
            problems.append("durations must be strictly increasing")
        if any(c < 0 for c in costs):
            problems.append("costs must be non-negative")
        if any(b < a for a, b in zip(costs, costs[1:])):
            problems.append("costs must be non-decreasing")
        return problems


@dataclass(frozen=True)
class SwitchConfig:
    """A topology, identified by the set of open branches."""
    open_branches: frozenset[int] = frozenset()

    @classmethod
    def of(cls, branches: Iterable[int]) -> SwitchConfig:
        return cls(frozenset(int(b) for b in branches))

    def is_open(self, branch_id: int) -> bool:
        return branch_id in self.open_branches

    def sorted(self) -> list[int]:
        return sorted(self.open_branches)

    @property
    def label(self) -> str:
        """Switch names the way operators write them, e.g. ``s33,s34``."""
        return ",".join(f"s{b}" for b in self.sorted())

    def __iter__(self) -> Iterator[int]:
        return iter(self.sorted())

    def __len__(self) -> int:
        return len(self.open_branches)


@dataclass(frozen=True)
class Network:
    """Immutable bus/branch graph with switches, DGs and load levels."""

    buses: tuple[Bus, ...]
    branches: tuple[Branch, ...]
    dgs: tuple[DistributedGenerator, ...] = ()
    levels: tuple[LoadLevel, ...] = ()
    base_voltage: float = 12.66   # kV
    base_power: float = 10.0      # MVA
    ccdf_curves: dict[str, CcdfCurve] = field(default_factory=dict, hash=False)
    source_impedance: complex = 0j  # substation Thevenin impedance, ohm

    # -------------------------------------------------------------------------
    # Lookups
    # -------------------------------------------------------------------------

    @cached_property
    def bus_index(self) -> dict[int, int]:
        return {bus.id: i for i, bus in enumerate(self.buses)}

    @cached_property
    def branch_index(self) -> dict[int, int]:
        return {br.id: i for i, br in enumerate(self.branches)}

    @cached_property
    def substation(self) -> Bus:
        return next(bus for bus in self.buses if bus.is_substation)

    @cached_property
    def adjacency(self) -> dict[int, tuple[tuple[int, int], ...]]:
        """bus -> ((branch id, neighbor bus), ...) sorted by branch id."""
        adj: dict[int, list[tuple[int, int]]] = {bus.id: [] for bus in self.buses}
        for br in self.branches:
            adj[br.from_bus].append((br.id, br.to_bus))
            adj[br.to_bus].append((br.id, br.from_bus))
        return {k: tuple(sorted(v)) for k, v in adj.items()}

    def bus(self, bus_id: int) -> Bus:
        try:
            return self.buses[self.bus_index[bus_id]]
        except KeyError:
            raise UnknownBusError(bus_id) from None

    def branch(self, branch_id: int) -> Branch:
        try:
            return self.branches[self.branch_index[branch_id]]
        except KeyError:
            raise UnknownBranchError(branch_id) from None

    def level(self, index: int) -> LoadLevel:
        for level in self.levels:
            if level.index == index:
                return level
        raise GridValidationError(f"unknown load level {index}")

    def curve(self, name: str) -> CcdfCurve:
        try:
            return self.ccdf_curves[name]
        except KeyError:
            raise GridValidationError(f"unknown CCDF curve '{name}'") from None

    # -------------------------------------------------------------------------
    # Per-unit bases
    # -------------------------------------------------------------------------

    @property
    def z_base_ohm(self) -> float:
        return self.base_voltage ** 2 / self.base_power

    @property
    def i_base_a(self) -> float:
        return self.base_power * 1e3 / (math.sqrt(3.0) * self.base_voltage)

    @property
    def s_base_kw(self) -> float:
        return self.base_power * 1e3

    # -------------------------------------------------------------------------
    # Branch classes
    # -------------------------------------------------------------------------

    def switchable_branches(self) -> tuple[int, ...]:
        return tuple(br.id for br in self.branches if br.is_switchable)

    def tie_branches(self) -> tuple[int, ...]:
        return tuple(br.id for br in self.branches if br.is_tie)

    def cb_branches(self) -> tuple[int, ...]:
        return tuple(sorted(br.id for br in self.branches if br.has_cb))

    def dg_branches(self) -> tuple[int, ...]:
        """Normally-closed branches feeding a DG bus."""
        dg_buses = {dg.bus for dg in self.dgs}
        return tuple(sorted(
            br.id for br in self.branches
            if br.to_bus in dg_buses and not br.is_tie
        ))

    def base_config(self) -> SwitchConfig:
        """Normally-open configuration: every tie branch open."""
        return SwitchConfig.of(self.tie_branches())

    def without_dgs(self) -> Network:
        return replace(self, dgs=())

    @property
    def total_duration(self) -> float:
        return sum(level.duration for level in self.levels)


# =============================================================================
# Topology
# =============================================================================

def fundamental_loop_count(network: Network) -> int:
    """Number of independent loops when every switch is closed."""
    return len(network.branches) - len(network.buses) + 1


def _first_key(graph: nx.MultiGraph, a: int, b: int) -> int:
    return next(iter(graph.get_edge_data(a, b)))


def _dfs_tree_branches(network: Network) -> set[int]:
    """
    Depth-first spanning tree from the substation over sectionalizing
    branches in id order. Ties join the tree only when buses remain
    unreached, lowest id first.
    """
    sectionalizing = nx.MultiGraph()
    sectionalizing.add_nodes_from(bus.id for bus in network.buses)
    for br in sorted(network.branches, key=lambda b: b.id):
        if not br.is_tie and br.from_bus != br.to_bus:
            sectionalizing.add_edge(br.from_bus, br.to_bus, key=br.id)

    tree_ids: set[int] = set()
    visited: set[int] = set()

    def grow(root: int) -> None:
        visited.add(root)
        reachable = sectionalizing.subgraph(set(sectionalizing) - visited | {root})
        for a, b in nx.dfs_edges(reachable, source=root):
            tree_ids.add(_first_key(reachable, a, b))
            visited.add(b)

    grow(network.substation.id)
    ties = sorted(network.tie_branches())
    while len(visited) < len(network.buses):
        bridge = next(
            (network.branch(t) for t in ties
             if (network.branch(t).from_bus in visited) != (network.branch(t).to_bus in visited)),
            None,
        )
        if bridge is None:
            break
        tree_ids.add(bridge.id)
        grow(bridge.to_bus if bridge.from_bus in visited else bridge.from_bus)
    return tree_ids


def fundamental_loops(network: Network) -> tuple[tuple[int, ...], ...]:
    """
    One branch list per fundamental loop of the all-closed graph.

    The spanning tree comes from ``_dfs_tree_branches``; every cotree branch
    closes exactly one loop. Loops are ordered by their cotree branch id and
    each list is sorted by branch id.
    """
    tree_ids = _dfs_tree_branches(network)
    tree = nx.MultiGraph()
    tree.add_nodes_from(bus.id for bus in network.buses)
    for br in network.branches:
        if br.id in tree_ids:
            tree.add_edge(br.from_bus, br.to_bus, key=br.id)

    loops = []
    for br in sorted(network.branches, key=lambda b: b.id):
        if br.id in tree_ids:
            continue
        if br.from_bus == br.to_bus:
            continue
        nodes = nx.shortest_path(tree, br.from_bus, br.to_bus)
        members = {br.id}
        for a, b in zip(nodes, nodes[1:]):
            members.add(_first_key(tree, a, b))
        loops.append(tuple(sorted(members)))
    return tuple(loops)


def _check_open_set(network: Network, config: SwitchConfig) -> None:
    for branch_id in config.open_branches:
        branch = network.branch(branch_id)
        if not branch.is_switchable:
            raise TopologyError(
                f"branch {branch_id} has no switch and cannot be opened",
                details={"branch": branch_id},
            )


def is_radial(network: Network, config: SwitchConfig) -> bool:
    """True iff the closed branches form a spanning tree of all buses."""
    _check_open_set(network, config)

    closed = [br for br in network.branches if br.id not in config.open_branches]
    if len(closed) != len(network.buses) - 1:
        return False

    components = UnionFind(bus.id for bus in network.buses)
    for br in closed:
        if components[br.from_bus] == components[br.to_bus]:
            return False
        components.union(br.from_bus, br.to_bus)
    return True


@dataclass(frozen=True)
class RadialTree:
    """Rooted view of a radial configuration."""
    root: int
    order: tuple[int, ...]               # breadth-first from the substation
    parent: dict[int, int]               # bus -> parent bus
    parent_branch: dict[int, int]        # bus -> branch towards the parent
    depth: dict[int, int]

    def path_to_root(self, bus_id: int) -> list[int]:
        """Branch ids from ``bus_id`` up to the substation."""
        path = []
        node = bus_id
        while node != self.root:
            path.append(self.parent_branch[node])
            node = self.parent[node]
        return path

    def signed_path(self, source: int, target: int) -> list[tuple[int, int]]:
        """
        Branches carrying current from ``source`` to ``target``.

        Each entry is (branch id, sign) where sign is +1 when the current
        flows away from the substation (parent to child) and -1 otherwise.
        """
        up: list[tuple[int, int]] = []
        down: list[tuple[int, int]] = []
        a, b = source, target
        while self.depth[a] > self.depth[b]:
            up.append((self.parent_branch[a], -1))
            a = self.parent[a]
        while self.depth[b] > self.depth[a]:
            down.append((self.parent_branch[b], +1))
            b = self.parent[b]
        while a != b:
            up.append((self.parent_branch[a], -1))
            down.append((self.parent_branch[b], +1))
            a = self.parent[a]
            b = self.parent[b]
        return up + down[::-1]


def radial_tree(network: Network, config: SwitchConfig) -> RadialTree:
    """Root the closed-branch tree at the substation; raises when not radial."""
    if not is_radial(network, config):
        raise NonRadialConfigError(config.open_branches)

    root = network.substation.id
    parent: dict[int, int] = {}
    parent_branch: dict[int, int] = {}
    depth = {root: 0}
    order = [root]
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for branch_id, neighbor in network.adjacency[node]:
            if branch_id in config.open_branches or neighbor in depth:
                continue
            parent[neighbor] = node
            parent_branch[neighbor] = branch_id
            depth[neighbor] = depth[node] + 1
            order.append(neighbor)
            queue.append(neighbor)
    return RadialTree(root, tuple(order), parent, parent_branch, depth)


# =============================================================================
# Grid Schema
# =============================================================================

def _require(data: dict[str, Any], key: str, location: str) -> Any:
    if key not in data:
        raise GridParseError(f"missing key '{key}'", location=location)
    return data[key]


def _number(value: Any, location: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise GridParseError("expected a number", location=location)
    return float(value)


def _integer(value: Any, location: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise GridParseError("expected an integer", location=location)
    return value


def _list(value: Any, location: str) -> list[Any]:
    if not isinstance(value, list):
        raise GridParseError("expected a list", location=location)
    return value


def _mapping(value: Any, location: str) -> dict[str, Any]:
    if not isinstance(value, dict):
        raise GridParseError("expected an object", location=location)
    return value


def grid_from_dict(data: dict[str, Any]) -> Network:
    """Parse and validate a grid document."""
    if not isinstance(data, dict):
        raise GridParseError("grid root must be an object", location="$")

    buses = []
    for i, raw in enumerate(_list(_require(data, "buses", "$"), "buses")):
        loc = f"buses[{i}]"
        raw = _mapping(raw, loc)
        buses.append(Bus(
            id=_integer(_require(raw, "id", loc), f"{loc}.id"),
            load_p=_number(raw.get("load_kw", 0.0), f"{loc}.load_kw"),
            load_q=_number(raw.get("load_kvar", 0.0), f"{loc}.load_kvar"),
            interruption_cost_ref=str(raw.get("ccdf", "default")),
            is_substation=bool(raw.get("substation", False)),
        ))

    branches = []
    for i, raw in enumerate(_list(_require(data, "branches", "$"), "branches")):
        loc = f"branches[{i}]"
        raw = _mapping(raw, loc)
        kind_raw = raw.get("switch", "sectionalizing")
        try:
            kind = SwitchKind(kind_raw)
        except ValueError:
            raise GridParseError(f"unknown switch kind '{kind_raw}'", location=f"{loc}.switch") from None
        rating = raw.get("cb_rating_a")
        branches.append(Branch(
            id=_integer(_require(raw, "id", loc), f"{loc}.id"),
            from_bus=_integer(_require(raw, "from", loc), f"{loc}.from"),
            to_bus=_integer(_require(raw, "to", loc), f"{loc}.to"),
            resistance=_number(_require(raw, "r_ohm", loc), f"{loc}.r_ohm"),
            reactance=_number(_require(raw, "x_ohm", loc), f"{loc}.x_ohm"),
            switch_kind=kind,
            failure_rate=_number(raw.get("failure_rate", 0.0), f"{loc}.failure_rate"),
            ampacity=_number(raw.get("ampacity_a", math.inf), f"{loc}.ampacity_a"),
            flow_limit=_number(raw.get("flow_limit_kw", math.inf), f"{loc}.flow_limit_kw"),
            cb_rating=None if rating is None else _number(rating, f"{loc}.cb_rating_a"),
        ))

    dgs = []
    for i, raw in enumerate(_list(data.get("dgs", []), "dgs")):
        loc = f"dgs[{i}]"
        raw = _mapping(raw, loc)
        dgs.append(DistributedGenerator(
            bus=_integer(_require(raw, "bus", loc), f"{loc}.bus"),
            capacity=_number(_require(raw, "capacity_mw", loc), f"{loc}.capacity_mw"),
            subtransient_reactance=_number(_require(raw, "xd_pp_ohm", loc), f"{loc}.xd_pp_ohm"),
        ))

    levels = []
    for i, raw in enumerate(_list(_require(data, "load_levels", "$"), "load_levels")):
        loc = f"load_levels[{i}]"
        raw = _mapping(raw, loc)
        levels.append(LoadLevel(
            index=_integer(_require(raw, "index", loc), f"{loc}.index"),
            scale=_number(_require(raw, "scale", loc), f"{loc}.scale"),
            duration=_number(_require(raw, "days", loc), f"{loc}.days"),
        ))

    curves: dict[str, CcdfCurve] = {}
    raw_curves = _mapping(data.get("ccdf_curves", {}), "ccdf_curves")
    for name, knots in raw_curves.items():
        loc = f"ccdf_curves.{name}"
        parsed = []
        for j, knot in enumerate(_list(knots, loc)):
            if not isinstance(knot, list) or len(knot) != 2:
                raise GridParseError("knot must be [duration, cost]", location=f"{loc}[{j}]")
            parsed.append((_number(knot[0], f"{loc}[{j}]"), _number(knot[1], f"{loc}[{j}]")))
        curves[str(name)] = CcdfCurve(tuple(parsed))

    source = _mapping(data.get("source", {"r_ohm": 0.0, "x_ohm": 0.0}), "source")
    source_z = complex(
        _number(source.get("r_ohm", 0.0), "source.r_ohm"),
        _number(source.get("x_ohm", 0.0), "source.x_ohm"),
    )

    network = Network(
        buses=tuple(buses),
        branches=tuple(branches),
        dgs=tuple(dgs),
        levels=tuple(levels),
        base_voltage=_number(_require(data, "base_kv", "$"), "base_kv"),
        base_power=_number(data.get("base_mva", 10.0), "base_mva"),
        ccdf_curves=curves,
        source_impedance=source_z,
    )
    validate_network(network)
    return network


def validate_network(network: Network) -> None:
    """Enforce the network invariants; raises GridValidationError with a location."""
    if network.base_voltage <= 0:
        raise GridValidationError("base voltage must be positive", location="base_kv")
    if network.base_power <= 0:
        raise GridValidationError("base power must be positive", location="base_mva")

    seen_buses: set[int] = set()
    for i, bus in enumerate(network.buses):
        if bus.id in seen_buses:
            raise GridValidationError(f"duplicate bus id {bus.id}", location=f"buses[{i}]")
        seen_buses.add(bus.id)
        if not bus.is_substation and (bus.load_p < 0 or bus.load_q < 0):
            raise GridValidationError("loads must be non-negative", location=f"buses[{i}]")
        if network.ccdf_curves and bus.interruption_cost_ref not in network.ccdf_curves:
            raise GridValidationError(
                f"unknown CCDF curve '{bus.interruption_cost_ref}'", location=f"buses[{i}].ccdf",
            )

    substations = [bus.id for bus in network.buses if bus.is_substation]
    if not substations:
        raise GridValidationError("missing substation bus", location="buses")
    if len(substations) > 1:
        raise GridValidationError(f"more than one substation: {substations}", location="buses")

    seen_branches: set[int] = set()
    for i, br in enumerate(network.branches):
        loc = f"branches[{i}]"
        if br.id in seen_branches:
            raise GridValidationError(f"duplicate branch id {br.id}", location=loc)
        seen_branches.add(br.id)
        for end in (br.from_bus, br.to_bus):
            if end not in seen_buses:
                raise UnknownBusError(end, location=loc)
        if br.from_bus == br.to_bus:
            raise GridValidationError("branch ends must differ", location=loc)
        if br.resistance < 0 or br.reactance < 0:
            raise GridValidationError("impedance must be non-negative", location=loc)
        if br.failure_rate < 0:
            raise GridValidationError("failure rate must be non-negative", location=loc)
        if br.cb_rating is not None and br.cb_rating <= 0:
            raise GridValidationError("breaker rating must be positive", location=loc)

    for i, dg in enumerate(network.dgs):
        loc = f"dgs[{i}]"
        if dg.bus not in seen_buses:
            raise UnknownBusError(dg.bus, location=loc)
        if dg.capacity <= 0 or dg.subtransient_reactance <= 0:
            raise GridValidationError("DG capacity and reactance must be positive", location=loc)

    if not network.levels:
        raise GridValidationError("at least one load level is required", location="load_levels")
    for i, level in enumerate(network.levels):
        if not 0 < level.scale <= 1 or level.duration <= 0:
            raise GridValidationError(
                "load level needs 0 < scale <= 1 and duration > 0", location=f"load_levels[{i}]",
            )
    if len({level.index for level in network.levels}) != len(network.levels):
        raise GridValidationError("duplicate load level index", location="load_levels")
    if abs(network.total_duration - YEAR_DAYS) > _DURATION_TOL:
        raise GridValidationError(
            f"load level durations sum to {network.total_duration:g} days, expected 365",
            location="load_levels",
        )

    for name, curve in network.ccdf_curves.items():
        problems = curve.issues()
        if problems:
            raise GridValidationError(problems[0], location=f"ccdf_curves.{name}")

    graph = nx.MultiGraph()
    graph.add_nodes_from(seen_buses)
    graph.add_edges_from((br.from_bus, br.to_bus) for br in network.branches)
    if not nx.is_connected(graph):
        islands = nx.number_connected_components(graph)
        raise GridValidationError(f"graph is disconnected ({islands} islands)", location="branches")


def load_grid(path: Path | str) -> Network:
    """Read a grid JSON file into a validated Network."""
    grid_path = Path(path)
    try:
        text = grid_path.read_text(encoding="utf-8")
    except OSError as e:
        raise GridParseError(f"cannot read grid file: {e.strerror}", location=str(grid_path), cause=e) from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise GridParseError(
            f"invalid JSON: {e.msg}", location=f"{grid_path}:{e.lineno}:{e.colno}", cause=e,
        ) from e

    network = grid_from_dict(data)
    logger.debug(
        f"Loaded grid {grid_path.name}: {len(network.buses)} buses, "
        f"{len(network.branches)} branches, {len(network.dgs)} DGs"
    )
    return network


def grid_to_dict(network: Network) -> dict[str, Any]:
    """Serialize in schema key order."""
    return {
        "base_kv": network.base_voltage,
        "base_mva": network.base_power,
        "buses": [
            {
                "id": bus.id,
                "load_kw": bus.load_p,
                "load_kvar": bus.load_q,
                "ccdf": bus.interruption_cost_ref,
                "substation": bus.is_substation,
            }
            for bus in network.buses
        ],
        "branches": [
            {
                "id": br.id,
                "from": br.from_bus,
                "to": br.to_bus,
                "r_ohm": br.resistance,
                "x_ohm": br.reactance,
                "switch": br.switch_kind.value,
                "failure_rate": br.failure_rate,
                "ampacity_a": br.ampacity,
                "flow_limit_kw": br.flow_limit,
                "cb_rating_a": br.cb_rating,
            }
            for br in network.branches
        ],
        "dgs": [
            {"bus": dg.bus, "capacity_mw": dg.capacity, "xd_pp_ohm": dg.subtransient_reactance}
            for dg in network.dgs
        ],
        "load_levels": [
            {"index": lv.index, "scale": lv.scale, "days": lv.duration}
            for lv in network.levels
        ],
        "ccdf_curves": {
            name: [[d, c] for d, c in curve.knots]
            for name, curve in network.ccdf_curves.items()
        },
        "source": {
            "r_ohm": network.source_impedance.real,
            "x_ohm": network.source_impedance.imag,
        },
    }


def dump_grid(network: Network, path: Path | str) -> Path:
    """Write the network as a grid JSON file."""
    out = Path(path)
    out.write_text(json.dumps(grid_to_dict(network), indent=2) + "\n", encoding="utf-8")
    return out


def bundled_grid_path() -> Path:
    return Path(__file__).parent / "fixtures" / "ieee33.json"


def load_bundled_grid() -> Network:
    """The 33-bus fixture that ships with the package."""
    return load_grid(bundled_grid_path())
