"""
Shared fixtures: the bundled 33-bus feeder and small hand-built grids.
"""

from __future__ import annotations

import copy
import logging
from pathlib import Path
from typing import Any, Callable, Iterator

import pytest

import logging_config
from config import BUNDLED_GRID, RunConfig, SsaSettings
from core.network import Network, grid_from_dict, load_bundled_grid
from core.pipeline import run_pipeline
from core.report import RunReport

DEFAULT_CURVE = [[1.0, 0.1], [20.0, 1.0], [60.0, 4.0], [240.0, 12.0], [480.0, 25.0]]


def chain_document(
    n_buses: int = 3,
    *,
    r_ohm: float = 1.0,
    x_ohm: float = 0.0,
    load_kw: float = 0.0,
    load_kvar: float = 0.0,
    ties: list[tuple[int, int]] | None = None,
    source: tuple[float, float] = (0.0, 0.0),
    failure_rate: float = 0.0,
    cb_rating_a: float | None = None,
) -> dict[str, Any]:
    """Grid document for a chain 1-2-...-n fed at bus 1, optional tie branches."""
    buses = [{"id": 1, "load_kw": 0, "load_kvar": 0, "substation": True}]
    buses += [
        {"id": i, "load_kw": load_kw, "load_kvar": load_kvar}
        for i in range(2, n_buses + 1)
    ]
    branches = [
        {
            "id": i,
            "from": i,
            "to": i + 1,
            "r_ohm": r_ohm,
            "x_ohm": x_ohm,
            "failure_rate": failure_rate,
            "cb_rating_a": cb_rating_a,
        }
        for i in range(1, n_buses)
    ]
    for k, (a, b) in enumerate(ties or []):
        branches.append({
            "id": n_buses + k,
            "from": a,
            "to": b,
            "r_ohm": r_ohm,
            "x_ohm": x_ohm,
            "switch": "tie",
            "failure_rate": failure_rate,
        })
    return {
        "base_kv": 12.66,
        "base_mva": 10.0,
        "buses": buses,
        "branches": branches,
        "dgs": [],
        "load_levels": [{"index": 1, "scale": 1.0, "days": 365.0}],
        "ccdf_curves": {"default": copy.deepcopy(DEFAULT_CURVE)},
        "source": {"r_ohm": source[0], "x_ohm": source[1]},
    }


@pytest.fixture(scope="session")
def feeder() -> Network:
    """The bundled 33-bus feeder with its four DGs."""
    return load_bundled_grid()


@pytest.fixture(scope="session")
def feeder_no_dg(feeder: Network) -> Network:
    return feeder.without_dgs()


@pytest.fixture
def chain() -> Callable[..., Network]:
    """Factory building a validated chain network from ``chain_document`` arguments."""
    def build(n_buses: int = 3, **kwargs: Any) -> Network:
        return grid_from_dict(chain_document(n_buses, **kwargs))
    return build


@pytest.fixture
def chain_doc() -> Callable[..., dict[str, Any]]:
    """Factory returning the raw document, for tests that corrupt it."""
    return chain_document


def tiny_run_config(tmp_dir: Path | None = None, **overrides: Any) -> RunConfig:
    """A run over the bundled feeder with a colony small enough for unit tests."""
    values: dict[str, Any] = {
        "grid_path": BUNDLED_GRID,
        "seed": 7,
        "ssa": SsaSettings(population_size=5, iterations=3),
        "output_dir": tmp_dir or Path("quench_out"),
        "workers": 1,
    }
    values.update(overrides)
    return RunConfig(**values)


@pytest.fixture
def run_config(tmp_path: Path) -> RunConfig:
    return tiny_run_config(tmp_path / "out")


@pytest.fixture(scope="session")
def planned_report() -> RunReport:
    """One complete pipeline run, shared by the report and CLI tests."""
    return run_pipeline(tiny_run_config())


@pytest.fixture
def fresh_logging(monkeypatch, tmp_path: Path) -> Iterator[Path]:
    """Unconfigured logging with the log directory under ``tmp_path``; restores the root logger."""
    root = logging.getLogger()
    saved_handlers, saved_level = root.handlers[:], root.level
    log_dir = tmp_path / "logs"
    monkeypatch.setattr(logging_config, "_state", None)
    monkeypatch.setattr(logging_config, "_log_dir", None)
    monkeypatch.setattr(logging_config, "_handlers", [])
    monkeypatch.setenv("QUENCH_LOG_DIR", str(log_dir))
    monkeypatch.delenv("QUENCH_LOG_LEVEL", raising=False)
    yield log_dir
    for handler in root.handlers[:]:
        if handler not in saved_handlers:
            root.removeHandler(handler)
            handler.close()
    for handler in saved_handlers:
        if handler not in root.handlers:
            root.addHandler(handler)
    root.setLevel(saved_level)
