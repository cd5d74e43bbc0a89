"""
BIPHASE Terminal Display
========================

Rich console presentation of runs: banner, run parameters, time-stepping
progress, stationary states, invariant summaries and convergence tables.
"""

import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterator, List, Optional

import numpy as np
from rich import box
from rich.align import Align
from rich.console import Console
from rich.panel import Panel
from rich.progress import (BarColumn, Progress, SpinnerColumn, TaskProgressColumn, TextColumn,
                           TimeElapsedColumn)
from rich.rule import Rule
from rich.table import Table
from rich.text import Text

from core.diagnostics import ConvergenceTable
from core.scenarios import RunResult, Scenario
from core.stationary import StationaryResult
from core.validator import InvariantReport
from ui.banner import print_banner
from ui.summary import show_summary

logger = logging.getLogger(__name__)


@dataclass
class UIConfig:
    """UI configuration for BIPHASE."""
    primary_color: str = "cyan"
    success_color: str = "green"
    warning_color: str = "yellow"
    error_color: str = "red"
    info_color: str = "blue"
    muted_color: str = "dim white"
    accent_color: str = "magenta"
    spinner_style: str = "cyan"
    show_progress: bool = True


def _fmt(value: float) -> str:
    return "-" if value is None or (isinstance(value, float) and np.isnan(value)) else f"{value:.6g}"


def _vector(values) -> str:
    return "(" + ", ".join(f"{v:.6g}" for v in np.asarray(values, dtype=float)) + ")"


class SimulationDisplay:
    """
    Terminal presentation for BIPHASE runs.
    """

    def __init__(self, config: Optional[UIConfig] = None, console: Optional[Console] = None):
        self.config = config or UIConfig()
        self.console = console or Console()

    def show_banner(self) -> None:
        """Display the BIPHASE banner."""
        print_banner(self.console)
        self.console.print()

    def show_mode_header(self, mode: str, description: str) -> None:
        """Show mode header with description."""
        header_text = Text()
        header_text.append(mode, style=f"bold {self.config.accent_color}")
        header_text.append(f" - {description}", style=self.config.muted_color)
        self.console.print(Panel(Align.center(header_text), border_style=self.config.accent_color,
                                 box=box.ROUNDED))
        self.console.print()

    def show_scenario(self, scenario: Scenario) -> None:
        """Panel with the run parameters."""
        entries = {
            "mode": scenario.mode,
            "cells N": str(scenario.N),
            "initial interface X0": _fmt(scenario.X0),
            "time step dt": _fmt(scenario.dt_init),
            "final time T": _fmt(scenario.t_end),
            "initial profile": scenario.profile + (" (stationary)" if scenario.well_balanced else ""),
        }
        if scenario.beta_search:
            entries["beta*"] = "searched"
        elif scenario.beta_star is not None:
            entries["beta*"] = _vector(scenario.beta_star)
        if scenario.mode == "converge":
            entries["grids"] = ", ".join(str(N) for N in scenario.grids)
            entries["reference N"] = str(scenario.reference_N)
        if scenario.derived:
            entries["parameters"] = "derived"
        self.console.print(show_summary(entries, title=f"Scenario {scenario.name}"))
        self.console.print()

    @contextmanager
    def progress(self, description: str, total: float) -> Iterator:
        """
        Progress bar over simulated time (or ladder levels).

        Yields a callback taking the current position; a no-op when progress is off.
        """
        if not self.config.show_progress:
            yield lambda position: None
            return
        with Progress(
            SpinnerColumn(style=self.config.spinner_style),
            TextColumn("[progress.description]{task.description}"),
            BarColumn(),
            TaskProgressColumn(),
            TimeElapsedColumn(),
            console=self.console,
        ) as progress:
            task = progress.add_task(description, total=total)
            yield lambda position: progress.update(task, completed=min(position, total))

    def show_run_result(self, result: RunResult) -> None:
        """Summary of a finished PDE or ODE run."""
        entries = {}
        if result.final_state is not None:
            last = result.records[-1]
            entries.update({
                "final time": _fmt(result.final_state.t),
                "interface X": _fmt(result.final_state.X),
                "phases": "two" if result.final_state.single_phase is None
                else ("solid only" if result.final_state.single_phase == "s" else "gas only"),
                "free energy H": _fmt(last.H),
                "H - H_bar": _fmt(last.H_rel),
                "|X - X_bar|": _fmt(last.dX_rel),
                "accepted steps": str(result.steps),
                "steps with dt halving": str(result.halved_steps),
            })
        if result.trajectory is not None:
            trajectory = result.trajectory
            entries.update({
                "final time": _fmt(trajectory.t[-1]),
                "interface X": _fmt(trajectory.X[-1]),
                "reduced energy": _fmt(trajectory.energy[-1]),
                "RK4 steps": str(result.steps),
            })
            if trajectory.extinction is not None:
                extinction = trajectory.extinction
                entries["phase extinction"] = f"{extinction.describe()} at t={extinction.t:.6g}"
        if result.beta_star is not None:
            entries["beta*"] = _vector(result.beta_star)
        for key, value in result.notes.items():
            entries[key.replace("_", " ")] = _fmt(value)
        self.console.print(show_summary(entries, title=f"Result {result.scenario.name}"))
        self.console.print()

    def show_invariants(self, report: InvariantReport) -> None:
        table = Table(title="Invariants", show_header=True, header_style=self.config.accent_color)
        table.add_column("Check", style=self.config.primary_color)
        table.add_column("Checked", justify="right")
        table.add_column("Failed", justify="right")
        table.add_column("Worst", justify="right", style=self.config.muted_color)
        table.add_column("Limit", justify="right", style=self.config.muted_color)
        table.add_column("Status")
        for summary in report.summaries.values():
            status = Text("PASS", style=self.config.success_color) if summary.ok \
                else Text("FAIL", style=self.config.error_color)
            table.add_row(summary.name, str(summary.checked), str(summary.failed),
                          f"{summary.worst:.3e}", f"{summary.limit:.1e}", status)
        self.console.print(table)
        self.console.print()

    def show_stationary(self, result: StationaryResult) -> None:
        table = Table(title=f"Stationary states ({result.kind})", show_header=True,
                      header_style=self.config.accent_color)
        table.add_column("Kind", style=self.config.primary_color)
        table.add_column("X_bar", justify="right")
        table.add_column("c_bar solid")
        table.add_column("c_bar gas")
        for state in result.states:
            table.add_row(state.kind.value, "family" if state.X_bar is None else f"{state.X_bar:.15g}",
                          _vector(state.c_bar_s), _vector(state.c_bar_g))
        self.console.print(table)
        self.console.print()

    def show_convergence(self, table_data: ConvergenceTable) -> None:
        table = Table(title=f"L1 errors against N={table_data.reference_N}", show_header=True,
                      header_style=self.config.accent_color)
        table.add_column("N", justify="right", style=self.config.primary_color)
        table.add_column("dx", justify="right")
        table.add_column("error c", justify="right")
        table.add_column("error X", justify="right")
        for row in table_data.rows:
            table.add_row(str(row.N), f"{row.dx:.4g}", f"{row.error_c:.6e}", f"{row.error_X:.6e}")
        self.console.print(table)
        self.console.print(Rule(style=self.config.muted_color))
        self.show_info_message(f"fitted order: concentrations {table_data.order_c:.3f}, "
                               f"interface {table_data.order_X:.3f}")
        self.console.print()

    def show_files(self, files: List) -> None:
        for path in files:
            self.console.print(f"  {path}", style=self.config.muted_color)
        self.console.print()

    def show_success_message(self, message: str, details: Optional[str] = None) -> None:
        """Show success message with optional details."""
        success_text = Text()
        success_text.append(message, style=f"bold {self.config.success_color}")
        if details:
            success_text.append(f"\n{details}", style=self.config.muted_color)
        self.console.print(Panel(success_text, border_style=self.config.success_color, box=box.ROUNDED))
        self.console.print()

    def show_error_message(self, error: str, suggestion: str = "", retry_info: str = "") -> None:
        """Show error message with suggestions."""
        error_text = Text()
        error_text.append(error, style=f"bold {self.config.error_color}")
        if suggestion:
            error_text.append(f"\nSuggestion: {suggestion}", style=self.config.warning_color)
        if retry_info:
            error_text.append(f"\nTechnical details: {retry_info}", style=self.config.muted_color)
        self.console.print(Panel(error_text, border_style=self.config.error_color, box=box.ROUNDED))
        self.console.print()

    def show_info_message(self, message: str) -> None:
        """Show informational message."""
        self.console.print(Text(message, style=self.config.info_color))
