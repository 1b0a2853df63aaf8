"""Fault currents through breakers, SFCL insertion and the sub-transient view."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from core.network import SwitchConfig
from core.short_circuit import (
    FaultScenario,
    FaultStudy,
    SfclDevice,
    default_fault_set,
    fault_current,
    max_fault_scan,
    subtransient_view,
)
from exceptions import FaultAnalysisError, SfclOnOpenBranchError, UnknownBusError

BASE = SwitchConfig.of([33, 34, 35, 36, 37])


def with_source(network, z_ohm: complex):
    return replace(network, source_impedance=z_ohm)


def phase_amps(network, z_ohm: complex) -> float:
    """Bolted-fault current (A) of a 1.0 pu source behind ``z_ohm``."""
    return network.base_voltage * 1e3 / (math.sqrt(3.0) * abs(z_ohm))


class TestSubtransientView:
    def test_branch_scaling(self, chain):
        view = subtransient_view(chain(2, r_ohm=1.0, x_ohm=0.5))
        assert view.branches[0].resistance == pytest.approx(0.1)
        assert view.branches[0].reactance == pytest.approx(0.05)

    def test_applied_twice(self, chain):
        view = subtransient_view(subtransient_view(chain(2, r_ohm=1.0)))
        assert view.branches[0].resistance == pytest.approx(0.01)

    def test_feeder_uniform_ratio(self, feeder):
        view = subtransient_view(feeder)
        for old, new in zip(feeder.branches, view.branches):
            assert new.impedance == pytest.approx(0.1 * old.impedance)
        assert view.source_impedance == pytest.approx(0.1 * feeder.source_impedance)
        assert view.dgs == feeder.dgs
        assert [b.load_p for b in view.buses] == [b.load_p for b in feeder.buses]


class TestSingleSource:
    def test_ten_pu_at_source_bus(self, chain):
        network = chain(2, cb_rating_a=1e9)
        network = with_source(network, complex(0.0, 0.1 * network.z_base_ohm))
        report = fault_current(network, SwitchConfig(), FaultScenario(1))
        assert report.fault_current_pu == pytest.approx(10.0)

    def test_series_sfcl_halves_current(self, chain):
        network = chain(2, r_ohm=0.0, x_ohm=0.0, cb_rating_a=1e9)
        z_th = 0.1 * network.z_base_ohm
        network = with_source(network, complex(z_th, 0.0))
        device = SfclDevice(branch=1, impedance=z_th, trigger_current=1.0,
                            min_impedance=0.0, max_impedance=2 * z_th)
        report = fault_current(network, SwitchConfig(), FaultScenario(2), [device])
        assert report.quenched == frozenset({1})
        assert report.fault_current_pu == pytest.approx(5.0)

    def test_breaker_current_matches_ohms_law(self, chain):
        network = with_source(chain(3, r_ohm=0.4, x_ohm=0.3, cb_rating_a=1e9), complex(0.1, 1.0))
        report = fault_current(network, SwitchConfig(), FaultScenario(3))
        expected = phase_amps(network, complex(0.1 + 0.8, 1.0 + 0.6))
        assert report.cb_currents[1] == pytest.approx(expected)
        assert report.cb_currents[2] == pytest.approx(expected)
        assert report.contributions["substation"] == pytest.approx(expected)

    def test_upstream_fault_leaves_downstream_breaker_idle(self, chain):
        network = with_source(chain(3, cb_rating_a=1e9), complex(0.0, 1.0))
        report = fault_current(network, SwitchConfig(), FaultScenario(2))
        assert report.cb_currents[2] == pytest.approx(0.0)
        assert report.worst_cb == 1

    def test_device_below_trigger_stays_superconducting(self, chain):
        network = with_source(chain(2, r_ohm=1.0, cb_rating_a=1e9), complex(0.0, 1.0))
        plain = fault_current(network, SwitchConfig(), FaultScenario(2))
        device = SfclDevice(branch=1, impedance=10.0, trigger_current=plain.worst_current * 2)
        limited = fault_current(network, SwitchConfig(), FaultScenario(2), [device])
        assert limited.quenched == frozenset()
        expected = phase_amps(network, complex(1.0 + device.min_impedance, 1.0))
        assert limited.worst_current == pytest.approx(expected)

    def test_fault_impedance(self, chain):
        network = with_source(chain(2, r_ohm=0.0, cb_rating_a=1e9), complex(0.0, 1.0))
        report = fault_current(network, SwitchConfig(), FaultScenario(2, fault_impedance=1.0))
        assert report.worst_current == pytest.approx(phase_amps(network, complex(1.0, 1.0)))

    def test_rating_violation_flagged(self, chain):
        network = with_source(chain(2, r_ohm=0.0, cb_rating_a=100.0), complex(0.0, 1.0))
        report = fault_current(network, SwitchConfig(), FaultScenario(2))
        assert report.violated == frozenset({1})


class TestErrors:
    def test_sfcl_on_open_branch(self, feeder):
        with pytest.raises(SfclOnOpenBranchError):
            fault_current(feeder, BASE, FaultScenario(5), [SfclDevice(branch=33, impedance=1.0)])

    def test_unknown_fault_bus(self, feeder):
        with pytest.raises(UnknownBusError):
            fault_current(feeder, BASE, FaultScenario(99))

    def test_device_bounds(self):
        with pytest.raises(FaultAnalysisError):
            SfclDevice(branch=1, impedance=25.0)

    def test_negative_fault_impedance(self):
        with pytest.raises(FaultAnalysisError):
            FaultScenario(3, fault_impedance=-1.0)


class TestFeeder:
    @pytest.fixture(scope="class")
    def scan(self, feeder):
        view = subtransient_view(feeder)
        return FaultStudy(view, BASE, default_fault_set(feeder)).scan()

    def test_no_sfcl_violates_ratings(self, scan):
        assert not scan.feasible
        assert 3500.0 < scan.worst_current < 5000.0
        assert scan.worst_cb == 18
        assert scan.residuals[1] > 0.0

    def test_worst_fault_is_at_the_head_of_the_lateral(self, scan):
        # every DG reaches bus 19 through branch 18, next to the substation
        assert scan.cb_worst_bus[18] == 19

    def test_lateral_breaker_adds_dg_infeed(self, scan):
        assert scan.cb_worst[18] > scan.cb_worst[1]
        assert scan.cb_worst[1] == pytest.approx(scan.cb_worst[2], rel=0.05)

    def test_dg_contributions(self, feeder):
        view = subtransient_view(feeder)
        report = fault_current(view, BASE, FaultScenario(4))
        assert set(report.contributions) == {"substation", "dg@14", "dg@24", "dg@25", "dg@30"}
        dg_amps = view.i_base_a / (32.05512 / view.z_base_ohm)
        for label in ("dg@24", "dg@25"):
            # machine reactance dominates the path
            assert report.contributions[label] == pytest.approx(dg_amps, rel=0.05)

    def test_sfcls_lower_fault_current(self, feeder):
        view = subtransient_view(feeder)
        fault = FaultScenario(7)
        plain = fault_current(view, BASE, fault)
        limited = fault_current(view, BASE, fault, [SfclDevice(b, 1.5) for b in (1, 3, 4)])
        assert limited.worst_current < plain.worst_current

    def test_single_scenario_scan_matches_report(self, feeder):
        view = subtransient_view(feeder)
        fault = FaultScenario(6)
        report = fault_current(view, BASE, fault)
        assert max_fault_scan(view, BASE, (), [fault]) == pytest.approx(report.cb_currents)

    def test_sfcls_never_raise_worst_currents(self, feeder):
        view = subtransient_view(feeder)
        faults = default_fault_set(feeder)
        plain = max_fault_scan(view, BASE, (), faults)
        limited = max_fault_scan(view, BASE, [SfclDevice(1, 2.0), SfclDevice(22, 2.0)], faults)
        for cb in plain:
            assert limited[cb] <= plain[cb] + 1e-9


class TestFeederInvariants:
    def test_subtransient_currents_dominate_steady_state(self, feeder):
        faults = default_fault_set(feeder)
        steady = FaultStudy(feeder, BASE, faults).cb_currents()
        first_cycles = FaultStudy(subtransient_view(feeder), BASE, faults).cb_currents()
        assert np.all(first_cycles >= steady - 1e-9)

    def test_removing_dgs_never_raises_breaker_currents(self, feeder, feeder_no_dg):
        faults = default_fault_set(feeder)
        with_dg = FaultStudy(subtransient_view(feeder), BASE, faults).cb_currents()
        without = FaultStudy(subtransient_view(feeder_no_dg), BASE, faults).cb_currents()
        assert np.all(without <= with_dg + 1e-9)

    def test_zero_impedance_sfcl_is_transparent(self, feeder):
        study = FaultStudy(subtransient_view(feeder), BASE, default_fault_set(feeder))
        idle = SfclDevice(1, 0.0, trigger_current=1.0, min_impedance=0.0)
        np.testing.assert_allclose(study.cb_currents([idle]), study.cb_currents(), rtol=1e-12)


@pytest.mark.slow
def test_monotone_in_sfcl_impedance_on_random_paths(chain):
    rng = np.random.default_rng(11)
    for _ in range(100):
        n = int(rng.integers(3, 9))
        network = chain(n, r_ohm=float(rng.uniform(0.05, 1.0)), x_ohm=float(rng.uniform(0.05, 1.0)),
                        cb_rating_a=1e9)
        network = with_source(network, complex(float(rng.uniform(0.0, 0.5)), float(rng.uniform(0.5, 2.0))))
        branch = int(rng.integers(1, n))
        fault = FaultScenario(int(rng.integers(branch + 1, n + 1)))
        study = FaultStudy(network, SwitchConfig(), [fault])
        previous = math.inf
        for z in np.linspace(0.01, 20.0, 25):
            amps = study.cb_currents([SfclDevice(branch, float(z), trigger_current=1.0)])
            current = float(amps[0, branch - 1])
            assert current <= previous + 1e-9
            previous = current
