"""
Quench - Configuration Management
Run settings for reconfiguration, cost evaluation, fault studies and SFCL placement.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from dotenv import load_dotenv

from exceptions import ConfigValidationError, MissingConfigError

# Load environment variables from .env file
load_dotenv()


BUNDLED_GRID = Path(__file__).parent.resolve() / "core" / "fixtures" / "ieee33.json"


def _env_int(name: str) -> int | None:
    raw = os.getenv(name, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigValidationError(f"{name} must be an integer, got '{raw}'", config_key=name) from None


@dataclass
class ThemeConfig:
    """Console theme configuration."""
    # Primary accent color - Tangerine Orange
    accent_color: str = "#FF8800"
    accent_color_name: str = "orange1"

    text_color: str = "#E6EDF3"
    dim_text_color: str = "#7D8590"

    border_color: str = "#FF8800"

    # Status colors
    success_color: str = "#3FB950"
    warning_color: str = "#D29922"
    error_color: str = "#F85149"
    info_color: str = "#58A6FF"


@dataclass
class SsaSettings:
    """Spider swarm parameters."""
    population_size: int = 25
    iterations: int = 100
    attraction_probability: float = 0.7
    levy_probability: float = 0.2
    levy_beta_min: float = 0.0  # open lower end
    levy_beta_max: float = 1.0
    warm_start: bool = True

    def validate(self) -> list[str]:
        issues = []
        if self.population_size < 4:
            issues.append("ssa.population_size must be >= 4")
        if self.iterations < 1:
            issues.append("ssa.iterations must be >= 1")
        if not 0.0 <= self.attraction_probability <= 1.0:
            issues.append("ssa.attraction_probability must lie in [0, 1]")
        if not 0.0 <= self.levy_probability <= 1.0:
            issues.append("ssa.levy_probability must lie in [0, 1]")
        if not 0.0 <= self.levy_beta_min < self.levy_beta_max <= 1.0:
            issues.append("ssa levy beta range must satisfy 0 <= min < max <= 1")
        return issues


@dataclass
class CostSettings:
    """Loss price, reliability and limit-penalty settings."""
    loss_price: float = 168.0          # $/kW-year
    repair_duration_min: float = 120.0
    v_min: float = 0.95
    v_max: float = 1.05
    penalty_weight: float = 1.0e6
    include_reliability: bool = True

    def validate(self) -> list[str]:
        issues = []
        if self.loss_price < 0:
            issues.append("cost.loss_price must be >= 0")
        if self.repair_duration_min < 0:
            issues.append("cost.repair_duration_min must be >= 0")
        if not 0 < self.v_min < self.v_max:
            issues.append("cost voltage bounds must satisfy 0 < v_min < v_max")
        if self.penalty_weight < 0:
            issues.append("cost.penalty_weight must be >= 0")
        return issues


@dataclass
class FaultSettings:
    """Short-circuit study settings."""
    subtransient_scale: float = 0.1
    fault_impedance_ohm: float = 0.0
    fault_buses: list[int] | None = None  # None means every bus

    def validate(self) -> list[str]:
        issues = []
        if self.subtransient_scale <= 0:
            issues.append("fault.subtransient_scale must be > 0")
        if self.fault_impedance_ohm < 0:
            issues.append("fault.fault_impedance_ohm must be >= 0")
        return issues


@dataclass
class PlacementSettings:
    """SFCL placement settings (device defaults follow common catalogue values)."""
    omega: float = 10.0
    z_min_ohm: float = 0.01
    z_max_ohm: float = 20.0
    trigger_current_a: float = 700.0
    response_time_ms: float = 2.0
    exhaustive_cap: int = 12
    tolerance_ohm: float = 1e-3
    max_bisections: int = 60
    candidates: list[int] | None = None  # None means CB branches plus DG branches
    cb_rating_a: float | None = None     # overrides every CB rating when set

    def validate(self) -> list[str]:
        issues = []
        if self.omega < 0:
            issues.append("placement.omega must be >= 0")
        if not 0 <= self.z_min_ohm <= self.z_max_ohm:
            issues.append("placement impedance bounds must satisfy 0 <= z_min <= z_max")
        if self.trigger_current_a <= 0:
            issues.append("placement.trigger_current_a must be > 0")
        if self.exhaustive_cap < 0:
            issues.append("placement.exhaustive_cap must be >= 0")
        if self.tolerance_ohm <= 0:
            issues.append("placement.tolerance_ohm must be > 0")
        if self.candidates is not None and not self.candidates:
            issues.append("placement.candidates must not be empty")
        if self.cb_rating_a is not None and self.cb_rating_a <= 0:
            issues.append("placement.cb_rating_a must be > 0")
        return issues


@dataclass
class RunConfig:
    """Aggregate configuration for one planning run."""

    grid_path: Path = field(
        default_factory=lambda: Path(os.getenv("QUENCH_GRID_PATH", str(BUNDLED_GRID)))
    )
    ssa: SsaSettings = field(default_factory=SsaSettings)
    cost: CostSettings = field(default_factory=CostSettings)
    fault: FaultSettings = field(default_factory=FaultSettings)
    placement: PlacementSettings = field(default_factory=PlacementSettings)
    seed: int | None = field(default_factory=lambda: _env_int("QUENCH_SEED"))
    output_dir: Path = field(
        default_factory=lambda: Path(os.getenv("QUENCH_OUTPUT_DIR", "quench_out"))
    )
    workers: int = field(default_factory=lambda: _env_int("QUENCH_WORKERS") or 1)

    theme: ThemeConfig = field(default_factory=ThemeConfig)

    def __post_init__(self) -> None:
        self.grid_path = Path(self.grid_path)
        self.output_dir = Path(self.output_dir)

    def validate(self) -> list[str]:
        """Validate configuration and return list of issues."""
        issues = []

        if self.seed is None:
            issues.append("seed is not set. Pass --seed or set QUENCH_SEED.")
        elif not 0 <= self.seed < 2**64:
            issues.append("seed must be an unsigned 64-bit integer")
        if not self.grid_path.is_file():
            issues.append(f"grid file does not exist: {self.grid_path}")
        if self.workers < 1:
            issues.append("workers must be >= 1")

        issues.extend(self.ssa.validate())
        issues.extend(self.cost.validate())
        issues.extend(self.fault.validate())
        issues.extend(self.placement.validate())
        return issues

    def require_valid(self) -> "RunConfig":
        """Raise on the first validation issue."""
        if self.seed is None:
            raise MissingConfigError("seed")
        issues = self.validate()
        if issues:
            raise ConfigValidationError(issues[0], details={"issues": len(issues)})
        return self

    def to_dict(self) -> dict[str, Any]:
        """Convert configuration to dictionary (the config echo of reports)."""
        return {
            "grid_path": str(self.grid_path),
            "seed": self.seed,
            "output_dir": str(self.output_dir),
            "workers": self.workers,
            "ssa": asdict(self.ssa),
            "cost": asdict(self.cost),
            "fault": asdict(self.fault),
            "placement": asdict(self.placement),
        }


# =============================================================================
# Config File Loading
# =============================================================================

_SECTIONS: dict[str, type] = {
    "ssa": SsaSettings,
    "cost": CostSettings,
    "fault": FaultSettings,
    "placement": PlacementSettings,
}
_SCALARS = {"grid_path", "seed", "output_dir", "workers"}


def _build_section(name: str, cls: type, raw: Any) -> Any:
    if not isinstance(raw, dict):
        raise ConfigValidationError(f"section '{name}' must be an object", config_key=name)
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigValidationError(
            f"unknown keys in section '{name}': {', '.join(unknown)}",
            config_key=name,
        )
    return cls(**raw)


def config_from_dict(data: dict[str, Any]) -> RunConfig:
    """Build a RunConfig from a parsed JSON document."""
    unknown = sorted(set(data) - set(_SECTIONS) - _SCALARS)
    if unknown:
        raise ConfigValidationError(f"unknown config keys: {', '.join(unknown)}")

    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _build_section(name, cls, data[name])
    for name in _SCALARS:
        if name in data and data[name] is not None:
            kwargs[name] = data[name]
    return RunConfig(**kwargs)


def load_run_config(
    path: Path | str | None = None,
    overrides: dict[str, Any] | None = None,
) -> RunConfig:
    """
    Load a run configuration.

    Args:
        path: Optional JSON config file. Defaults come from the environment.
        overrides: Scalar overrides (grid_path, seed, output_dir, workers);
            None values are ignored.

    Returns:
        The merged, not yet validated, RunConfig.
    """
    if path is not None:
        config_path = Path(path)
        try:
            data = json.loads(config_path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise MissingConfigError(str(config_path), cause=e) from e
        except json.JSONDecodeError as e:
            raise ConfigValidationError(
                f"config is not valid JSON: {e.msg}",
                config_key=str(config_path),
                details={"line": e.lineno},
                cause=e,
            ) from e
        if not isinstance(data, dict):
            raise ConfigValidationError("config root must be an object", config_key=str(config_path))
        run_config = config_from_dict(data)
    else:
        run_config = RunConfig()

    updates = {k: v for k, v in (overrides or {}).items() if v is not None}
    unknown = sorted(set(updates) - _SCALARS)
    if unknown:
        raise ConfigValidationError(f"unsupported overrides: {', '.join(unknown)}")
    if updates:
        run_config = replace(run_config, **updates)
    return run_config

