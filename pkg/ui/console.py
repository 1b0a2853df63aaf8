"""
Quench - Console Output
Rich tables and panels for reconfiguration, fault and placement results.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from typing import Any, Iterator

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import Progress, SpinnerColumn, TextColumn
from rich.style import Style
from rich.table import Table
from rich.text import Text

from config import RunConfig, ThemeConfig
from core.placement import SfclPlacementResult
from core.report import RunReport
from core.short_circuit import ScanResult


def _money(value: float | None) -> str:
    if value is None or not math.isfinite(value):
        return "inf"
    return f"{value:,.2f}"


class PlannerConsole:
    """Renders run results with the configured theme."""

    def __init__(self, theme: ThemeConfig | None = None, console: Console | None = None) -> None:
        self.theme = theme or ThemeConfig()
        self.console = console or Console(stderr=False)
        self._setup_styles()

    def _setup_styles(self) -> None:
        theme = self.theme
        self.styles = {
            "accent": Style(color=theme.accent_color),
            "accent_bold": Style(color=theme.accent_color, bold=True),
            "text": Style(color=theme.text_color),
            "dim": Style(color=theme.dim_text_color),
            "success": Style(color=theme.success_color),
            "warning": Style(color=theme.warning_color),
            "error": Style(color=theme.error_color),
            "info": Style(color=theme.info_color),
        }

    def _table(self, title: str) -> Table:
        return Table(
            title=title,
            title_style=self.styles["accent_bold"],
            box=box.ROUNDED,
            border_style=self.theme.border_color,
            header_style=self.styles["accent"],
        )

    # =========================================================================
    # Run Output
    # =========================================================================

    def render_header(self, run_config: RunConfig) -> None:
        text = Text()
        text.append("quench", style=self.styles["accent_bold"])
        text.append(f"  grid {run_config.grid_path.name}", style=self.styles["text"])
        text.append(f"  seed {run_config.seed}", style=self.styles["dim"])
        text.append(
            f"  colony {run_config.ssa.population_size}x{run_config.ssa.iterations}",
            style=self.styles["dim"],
        )
        self.console.print(Panel(text, border_style=self.theme.border_color, padding=(0, 1)))

    def render_levels(self, report: RunReport) -> None:
        """Optimized configuration and cost per load level against the base case."""
        table = self._table("Reconfiguration")
        table.add_column("Level", justify="right")
        table.add_column("Load", justify="right")
        table.add_column("Days", justify="right")
        table.add_column("Open switches")
        table.add_column("Base cost ($)", justify="right")
        table.add_column("Optimized cost ($)", justify="right")
        table.add_column("Loss (kW)", justify="right")
        table.add_column("Vmin (pu)", justify="right")
        for entry in report.levels:
            t = entry.level.index
            table.add_row(
                str(t),
                f"{entry.level.scale:.0%}",
                f"{entry.level.duration:g}",
                entry.config.label,
                _money(entry.base_cost.level_total(t) + entry.base_cost.penalty),
                _money(entry.cost.total),
                f"{entry.power_flow.get('total_loss_kw', 0.0):.2f}",
                f"{entry.power_flow.get('min_voltage_pu', 0.0):.4f}",
            )
        self.console.print(table)

    def render_faults(self, report: RunReport) -> None:
        """Worst breaker current per level with and without the installed SFCLs."""
        table = self._table("Fault currents")
        table.add_column("Level", justify="right")
        table.add_column("Without SFCL (kA)", justify="right")
        table.add_column("Worst CB", justify="right")
        table.add_column("With SFCL (kA)", justify="right")
        table.add_column("Violations")
        for entry in report.levels:
            before = entry.fault_before
            after = entry.fault_after or {}
            violated = after.get("violated", before.get("violated", []))
            table.add_row(
                str(entry.level.index),
                f"{before['worst_current_a'] / 1000:.3f}",
                str(before.get("worst_cb")),
                f"{after['worst_current_a'] / 1000:.3f}" if after else "-",
                Text(", ".join(map(str, violated)) or "none",
                     style=self.styles["error" if violated else "success"]),
            )
        self.console.print(table)

    def render_placement(self, placement: SfclPlacementResult, title: str = "SFCL placement") -> None:
        table = self._table(title)
        table.add_column("Location (branch)", justify="right")
        table.add_column("Resistance (ohm)", justify="right")
        for location, resistance in placement.rows():
            table.add_row(str(location), f"{resistance:.3f}")
        if not placement.devices:
            table.add_row("-", "-")
        table.caption = (
            f"objective {_money(placement.objective)}  mode {placement.mode}"
            + ("" if placement.feasible else "  INFEASIBLE")
        )
        self.console.print(table)
        if not placement.feasible and placement.residual_violations:
            residuals = ", ".join(f"CB {cb}: +{amps:.1f} A" for cb, amps in placement.residual_violations.items())
            self.render_warning(f"Breaker overshoot: {residuals}", title="Infeasible")

    def render_report(self, report: RunReport) -> None:
        """Everything a finished pipeline run shows."""
        self.render_levels(report)
        for entry in report.levels:
            if entry.placement is not None:
                self.render_placement(entry.placement, title=f"SFCL placement, level {entry.level.index}")
        if report.aggregate is not None:
            self.render_placement(report.aggregate, title="Aggregated SFCL plan")
        if report.levels and report.levels[0].fault_before:
            self.render_faults(report)

    def render_scan(self, scan: ScanResult, title: str = "Fault scan") -> None:
        table = self._table(title)
        table.add_column("CB branch", justify="right")
        table.add_column("Worst current (A)", justify="right")
        table.add_column("Fault bus", justify="right")
        table.add_column("Rating (A)", justify="right")
        for cb in sorted(scan.cb_worst):
            amps = scan.cb_worst[cb]
            style = self.styles["error" if cb in scan.violated else "text"]
            table.add_row(
                str(cb),
                Text(f"{amps:,.1f}", style=style),
                str(scan.cb_worst_bus.get(cb, "-")),
                f"{scan.ratings[cb]:,.0f}",
            )
        self.console.print(table)

    @contextmanager
    def progress(self, message: str) -> Iterator[None]:
        with Progress(
            SpinnerColumn(style=self.styles["accent"]),
            TextColumn("[progress.description]{task.description}"),
            console=self.console,
            transient=True,
        ) as bar:
            bar.add_task(message, total=None)
            yield

    # =========================================================================
    # Messages
    # =========================================================================

    def _panel(self, message: str, title: str, color: str, style: str) -> None:
        self.console.print(Panel(
            Text(message, style=self.styles[style]),
            border_style=color,
            title=title,
            title_align="left",
            padding=(0, 1),
        ))

    def render_error(self, message: str, title: str = "Error") -> None:
        self._panel(message, title, self.theme.error_color, "error")

    def render_warning(self, message: str, title: str = "Warning") -> None:
        self._panel(message, title, self.theme.warning_color, "warning")

    def render_success(self, message: str, title: str = "Success") -> None:
        self._panel(message, title, self.theme.success_color, "success")

    def render_info(self, message: str, title: str = "Info") -> None:
        self._panel(message, title, self.theme.info_color, "info")

    def print(self, *args: Any, **kwargs: Any) -> None:
        self.console.print(*args, **kwargs)


def create_console(theme: ThemeConfig | None = None) -> PlannerConsole:
    """Factory function to create a console instance."""
    return PlannerConsole(theme)
