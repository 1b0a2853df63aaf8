"""Grid model: ingestion, validation, loops and radiality."""

from __future__ import annotations

import pytest

from core.network import (
    SwitchConfig,
    SwitchKind,
    dump_grid,
    fundamental_loop_count,
    fundamental_loops,
    grid_from_dict,
    is_radial,
    load_grid,
    radial_tree,
)
from exceptions import (
    GridParseError,
    GridValidationError,
    NonRadialConfigError,
    TopologyError,
    UnknownBranchError,
    UnknownBusError,
)


class TestIngestion:
    def test_bundled_feeder_shape(self, feeder):
        assert len(feeder.buses) == 33
        assert len(feeder.branches) == 37
        kinds = [br.switch_kind for br in feeder.branches]
        assert kinds.count(SwitchKind.SECTIONALIZING) == 32
        assert kinds.count(SwitchKind.TIE) == 5
        assert feeder.substation.id == 1

    def test_bundled_feeder_loads(self, feeder):
        assert sum(b.load_p for b in feeder.buses) == pytest.approx(3715.0)
        assert sum(b.load_q for b in feeder.buses) == pytest.approx(2300.0)

    def test_bundled_feeder_levels_cover_a_year(self, feeder):
        assert [lv.scale for lv in feeder.levels] == [1.0, 0.8, 0.6]
        assert feeder.total_duration == pytest.approx(365.0)

    def test_branch_classes(self, feeder):
        assert feeder.tie_branches() == (33, 34, 35, 36, 37)
        assert feeder.cb_branches() == (1, 2, 3, 4, 5, 18, 22, 25)
        assert feeder.dg_branches() == (13, 23, 24, 29)
        assert feeder.base_config().label == "s33,s34,s35,s36,s37"
        assert feeder.without_dgs().dgs == ()

    def test_source_impedance(self, feeder):
        assert feeder.source_impedance == complex(1.0, 19.5)

    def test_unknown_bus(self, chain_doc):
        doc = chain_doc(3)
        doc["branches"][1]["to"] = 99
        with pytest.raises(UnknownBusError, match="unknown bus"):
            grid_from_dict(doc)

    def test_missing_key_reports_location(self, chain_doc):
        doc = chain_doc(3)
        del doc["branches"][0]["r_ohm"]
        with pytest.raises(GridParseError) as info:
            grid_from_dict(doc)
        assert info.value.location == "branches[0]"

    def test_duration_sum(self, chain_doc):
        doc = chain_doc(3)
        doc["load_levels"][0]["days"] = 300.0
        with pytest.raises(GridValidationError, match="365"):
            grid_from_dict(doc)

    def test_duplicate_bus(self, chain_doc):
        doc = chain_doc(3)
        doc["buses"][2]["id"] = 2
        with pytest.raises(GridValidationError, match="duplicate bus"):
            grid_from_dict(doc)

    def test_missing_substation(self, chain_doc):
        doc = chain_doc(3)
        doc["buses"][0]["substation"] = False
        with pytest.raises(GridValidationError, match="substation"):
            grid_from_dict(doc)

    def test_disconnected_graph(self, chain_doc):
        doc = chain_doc(3)
        doc["buses"].append({"id": 4, "load_kw": 10})
        with pytest.raises(GridValidationError, match="disconnected"):
            grid_from_dict(doc)

    def test_bad_ccdf_curve(self, chain_doc):
        doc = chain_doc(3)
        doc["ccdf_curves"]["default"] = [[10.0, 2.0], [5.0, 3.0]]
        with pytest.raises(GridValidationError) as info:
            grid_from_dict(doc)
        assert info.value.location == "ccdf_curves.default"

    def test_unknown_switch_kind(self, chain_doc):
        doc = chain_doc(3)
        doc["branches"][0]["switch"] = "fuse"
        with pytest.raises(GridParseError, match="fuse"):
            grid_from_dict(doc)

    @pytest.mark.parametrize(
        ("section", "index", "location"),
        [
            ("buses", 1, "buses[1]"),
            ("branches", 0, "branches[0]"),
            ("load_levels", 0, "load_levels[0]"),
        ],
    )
    def test_entry_must_be_an_object(self, chain_doc, section, index, location):
        doc = chain_doc(3)
        doc[section][index] = [1, 2]
        with pytest.raises(GridParseError) as info:
            grid_from_dict(doc)
        assert info.value.location == location

    def test_dg_entry_must_be_an_object(self, chain_doc):
        doc = chain_doc(3)
        doc["dgs"] = ["bus 3"]
        with pytest.raises(GridParseError) as info:
            grid_from_dict(doc)
        assert info.value.location == "dgs[0]"

    def test_source_must_be_an_object(self, chain_doc):
        doc = chain_doc(3)
        doc["source"] = 1.5
        with pytest.raises(GridParseError) as info:
            grid_from_dict(doc)
        assert info.value.location == "source"

    def test_missing_file(self, tmp_path):
        with pytest.raises(GridParseError):
            load_grid(tmp_path / "absent.json")

    def test_invalid_json_location(self, tmp_path):
        path = tmp_path / "grid.json"
        path.write_text("{\n  \"buses\": [,]\n}\n", encoding="utf-8")
        with pytest.raises(GridParseError) as info:
            load_grid(path)
        assert info.value.location.startswith(f"{path}:2:")

    def test_dump_then_load(self, feeder, tmp_path):
        path = dump_grid(feeder, tmp_path / "copy.json")
        assert load_grid(path) == feeder

    def test_lookup_errors(self, feeder):
        with pytest.raises(UnknownBranchError):
            feeder.branch(99)
        with pytest.raises(UnknownBusError):
            feeder.bus(0)


class TestLoops:
    def test_feeder_loop_count(self, feeder):
        assert fundamental_loop_count(feeder) == 5

    def test_tree_has_no_loops(self, chain):
        network = chain(2)
        assert fundamental_loop_count(network) == 0
        assert fundamental_loops(network) == ()

    def test_four_buses_five_branches(self, chain):
        network = chain(4, ties=[(1, 3), (2, 4)])
        assert fundamental_loop_count(network) == 2
        assert len(fundamental_loops(network)) == 2

    def test_triangle(self, chain):
        network = chain(3, ties=[(1, 3)])
        assert fundamental_loops(network) == ((1, 2, 3),)

    def test_tie_joins_the_tree_only_when_needed(self, chain_doc):
        doc = chain_doc(3, ties=[(1, 3)])
        doc["branches"][1]["switch"] = "tie"
        network = grid_from_dict(doc)
        # bus 3 hangs off ties only; the lower id bridges it
        assert fundamental_loops(network) == ((1, 2, 3),)

    def test_loops_follow_depth_first_order(self, chain):
        network = chain(4, ties=[(1, 3), (2, 4)])
        assert fundamental_loops(network) == ((1, 2, 4), (2, 3, 5))

    def test_feeder_loops_hold_one_tie_each(self, feeder):
        loops = fundamental_loops(feeder)
        ties = set(feeder.tie_branches())
        assert len(loops) == fundamental_loop_count(feeder)
        for k, loop in enumerate(loops):
            assert set(loop) & ties == {33 + k}

    def test_feeder_loop_through_tie_33(self, feeder):
        # tie 33 joins bus 8 to bus 21 through the lateral at bus 2
        assert fundamental_loops(feeder)[0] == (2, 3, 4, 5, 6, 7, 18, 19, 20, 33)


class TestRadiality:
    def test_base_config(self, feeder):
        assert is_radial(feeder, SwitchConfig.of([33, 34, 35, 36, 37]))

    def test_all_closed(self, feeder):
        assert not is_radial(feeder, SwitchConfig())

    def test_reconfigured(self, feeder):
        assert is_radial(feeder, SwitchConfig.of([6, 13, 9, 17, 37]))

    def test_island_is_not_radial(self, feeder):
        # right branch count, but bus 1 is cut off while tie 37 closes a loop
        assert not is_radial(feeder, SwitchConfig.of([1, 33, 34, 35, 36]))

    def test_unswitchable_branch(self, chain_doc):
        doc = chain_doc(3, ties=[(1, 3)])
        doc["branches"][0]["switch"] = "none"
        network = grid_from_dict(doc)
        with pytest.raises(TopologyError, match="no switch"):
            is_radial(network, SwitchConfig.of([1]))

    def test_radial_tree_rejects_loops(self, feeder):
        with pytest.raises(NonRadialConfigError):
            radial_tree(feeder, SwitchConfig())


class TestRadialTree:
    def test_depths_and_paths(self, chain):
        tree = radial_tree(chain(4), SwitchConfig())
        assert tree.order == (1, 2, 3, 4)
        assert tree.depth[4] == 3
        assert tree.path_to_root(4) == [3, 2, 1]

    def test_signed_path(self, chain):
        tree = radial_tree(chain(4), SwitchConfig())
        assert tree.signed_path(1, 4) == [(1, 1), (2, 1), (3, 1)]
        assert tree.signed_path(4, 2) == [(3, -1), (2, -1)]
        assert tree.signed_path(3, 3) == []

    def test_signed_path_across_laterals(self, feeder):
        tree = radial_tree(feeder, feeder.base_config())
        path = tree.signed_path(24, 4)
        # up the lateral from bus 24 to bus 3, then down the main feeder
        assert path == [(23, -1), (22, -1), (3, 1)]
