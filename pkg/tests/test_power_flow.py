"""Backward/forward sweep power flow and limit checks."""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest

from core.network import LoadLevel, SwitchConfig, grid_from_dict, radial_tree
from core.power_flow import check_limits, solve
from core.reconfiguration import enumerate_radial_configs
from exceptions import ConvergenceError, NonRadialConfigError

BASE = SwitchConfig.of([33, 34, 35, 36, 37])


def test_base_case_loss(feeder_no_dg):
    solution = solve(feeder_no_dg, BASE, feeder_no_dg.level(1))
    assert solution.converged
    assert solution.total_loss == pytest.approx(202.67, rel=0.01)


def test_known_optimum_loss(feeder_no_dg):
    solution = solve(feeder_no_dg, SwitchConfig.of([7, 9, 14, 32, 37]), feeder_no_dg.level(1))
    assert solution.total_loss == pytest.approx(139.55, rel=0.01)


def test_dgs_reduce_losses(feeder, feeder_no_dg):
    with_dg = solve(feeder, BASE, feeder.level(1))
    without = solve(feeder_no_dg, BASE, feeder.level(1))
    assert with_dg.total_loss < without.total_loss
    assert with_dg.dg_injection == pytest.approx(4000.0)


def test_zero_load(chain):
    network = chain(4)
    solution = solve(network, SwitchConfig(), network.level(1))
    assert solution.total_loss == 0.0
    np.testing.assert_allclose(solution.v_mag, 1.0)
    assert not check_limits(network, solution)


def test_two_bus_closed_form(chain):
    network = chain(2, r_ohm=1.0, x_ohm=0.0, load_kw=1000.0)
    solution = solve(network, SwitchConfig(), network.level(1))

    z = 1.0 / network.z_base_ohm
    p = 1000.0 / network.s_base_kw
    v = (1.0 + math.sqrt(1.0 - 4.0 * z * p)) / 2.0
    loss_kw = z * (p / v) ** 2 * network.s_base_kw

    assert solution.voltage(2) == pytest.approx(v, rel=1e-8)
    assert solution.total_loss == pytest.approx(loss_kw, rel=1e-6)


def test_halving_loads_cuts_losses(feeder_no_dg):
    full = solve(feeder_no_dg, BASE, LoadLevel(1, 1.0, 365.0))
    half = solve(feeder_no_dg, BASE, LoadLevel(1, 0.5, 365.0))
    assert half.total_loss < full.total_loss / 3.0


@pytest.mark.parametrize("opened", [[33, 34, 35, 36, 37], [7, 9, 14, 32, 37]])
def test_voltage_falls_along_every_path_without_dgs(feeder_no_dg, opened):
    config = SwitchConfig.of(opened)
    tree = radial_tree(feeder_no_dg, config)
    solution = solve(feeder_no_dg, config, feeder_no_dg.level(1))
    for bus in tree.order[1:]:
        assert solution.voltage(bus) <= solution.voltage(tree.parent[bus]) + 1e-12


def test_non_radial_rejected(feeder):
    with pytest.raises(NonRadialConfigError):
        solve(feeder, SwitchConfig.of([33, 34, 35, 36]), feeder.level(1))


def test_reactive_flows_reported(feeder_no_dg):
    solution = solve(feeder_no_dg, BASE, feeder_no_dg.level(1))
    assert solution.q_flow[0] > 0.0
    assert solution.reactive_loss > 0.0


def test_non_convergence_is_flagged(feeder):
    solution = solve(feeder, BASE, feeder.level(1), max_sweeps=1)
    assert not solution.converged
    with pytest.raises(ConvergenceError):
        check_limits(feeder, solution)


class TestLimits:
    def test_tail_voltage_sags_at_peak(self, feeder_no_dg):
        solution = solve(feeder_no_dg, BASE, feeder_no_dg.level(1))
        report = check_limits(feeder_no_dg, solution, v_min=0.95)
        assert report
        assert 18 in report.buses
        assert not report.branches

    def test_single_flow_violation(self, chain_doc):
        doc = chain_doc(3, load_kw=100.0)
        network = grid_from_dict(doc)
        solution = solve(network, SwitchConfig(), network.level(1))
        flow = abs(solution.flow(2))

        doc["branches"][1]["flow_limit_kw"] = flow - 1.0
        limited = grid_from_dict(doc)
        report = check_limits(limited, solution)
        assert [v.kind for v in report.violations] == ["flow"]
        assert report.branches == [2]

    def test_ampacity(self, chain):
        network = chain(2, load_kw=1000.0)
        solution = solve(network, SwitchConfig(), network.level(1))
        tight = replace(network, branches=(replace(network.branches[0], ampacity=10.0),))
        report = check_limits(tight, solution)
        assert [v.kind for v in report.violations] == ["ampacity"]
        assert report.violations[0].normalized > 0


def _balance(network, solution):
    s_base = network.s_base_kw
    active = solution.substation_injection.real + solution.dg_injection
    active -= solution.load_demand.real + solution.total_loss
    reactive = solution.substation_injection.imag - solution.load_demand.imag - solution.reactive_loss
    return abs(active) / s_base, abs(reactive) / s_base


def test_power_balance_on_base_config(feeder):
    for level in feeder.levels:
        solution = solve(feeder, BASE, level)
        active, reactive = _balance(feeder, solution)
        assert active <= 1e-6
        assert reactive <= 1e-6


@pytest.mark.slow
def test_power_balance_on_random_radial_configs(feeder):
    configs = list(enumerate_radial_configs(feeder))
    rng = np.random.default_rng(7)
    picks = rng.choice(len(configs), size=1000, replace=False)
    for i in picks:
        config = configs[int(i)]
        level = feeder.levels[int(i) % len(feeder.levels)]
        solution = solve(feeder, config, level)
        assert solution.converged, config.label
        active, reactive = _balance(feeder, solution)
        assert active <= 1e-6, config.label
        assert reactive <= 1e-6, config.label
