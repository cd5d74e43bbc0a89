"""
BIPHASE Invariant Validation
============================

Checks the structural properties of every accepted time step and keeps a
running report of them.

Features:
- Volume filling and strict positivity per cell
- Per-species mass conservation over the run
- Interface displacement bound of half a cell
- Free energy decay and the discrete dissipation inequality
- Strict mode raising InvariantBreach, lenient mode logging warnings
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from core.diagnostics import DissipationReport
from core.errors import InvariantBreach
from core.solver import SimState

logger = logging.getLogger(__name__)

VOLUME_TOL = 1e-10
MASS_TOL = 1e-10
# relative drift turns absolute below this initial mass
MASS_FLOOR = 1e-12
ENERGY_TOL = 1e-12
DISSIPATION_TOL = 1e-10
INTERFACE_SIGN_TOL = 1e-12


@dataclass
class InvariantCheck:
    """Result of one invariant on one step."""
    name: str
    passed: bool
    value: float
    limit: float
    t: float = 0.0


@dataclass
class InvariantSummary:
    """Aggregated outcome of one invariant over a run."""
    name: str
    checked: int = 0
    failed: int = 0
    worst: float = 0.0
    limit: float = 0.0

    @property
    def ok(self) -> bool:
        return self.failed == 0


@dataclass
class InvariantReport:
    """Complete invariant report of a run."""
    steps: int = 0
    summaries: Dict[str, InvariantSummary] = field(default_factory=dict)
    breaches: List[InvariantCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.breaches

    def add(self, check: InvariantCheck) -> None:
        summary = self.summaries.setdefault(check.name, InvariantSummary(check.name, limit=check.limit))
        summary.checked += 1
        summary.worst = max(summary.worst, check.value)
        if not check.passed:
            summary.failed += 1
            self.breaches.append(check)


class InvariantValidator:
    """
    Validates accepted steps against the invariants of the scheme.

    All checks are expressed as "value <= limit" so that the worst value of a
    run can be reported next to its limit.
    """

    def __init__(self, initial: SimState, strict: bool = False):
        self.strict = strict
        self.m0 = initial.mesh.masses(initial.c)
        self.report = InvariantReport()
        logger.debug(f"invariant validator initialized (strict={strict})")

    def check_state(self, state: SimState) -> List[InvariantCheck]:
        """Cellwise and global checks that only need the new state."""
        c = state.c
        volume = float(np.max(np.abs(c.sum(axis=1) - 1.0)))
        masses = state.mesh.masses(c)
        drift = float(np.max(np.abs(masses - self.m0) / np.maximum(np.abs(self.m0), MASS_FLOOR)))
        min_c = float(np.min(c))
        return [
            InvariantCheck("volume_filling", volume <= VOLUME_TOL, volume, VOLUME_TOL, state.t),
            InvariantCheck("positivity", min_c > 0.0, -min_c, 0.0, state.t),
            InvariantCheck("mass_conservation", drift <= MASS_TOL, drift, MASS_TOL, state.t),
        ]

    def check_step(self, old: SimState, new: SimState,
                   dissipation: Optional[DissipationReport] = None) -> List[InvariantCheck]:
        """Run every check on the step old -> new and record the outcome."""
        checks = self.check_state(new)

        X_reached = new.trace.mesh_star.X if new.trace is not None else new.X
        half_cell = 0.5 * old.mesh.dx
        moved = abs(X_reached - old.X)
        checks.append(InvariantCheck("interface_displacement", moved <= half_cell * (1.0 + 1e-12),
                                     moved, half_cell, new.t))

        if dissipation is not None:
            H_after = dissipation.H_star if dissipation.pinned else dissipation.H_new
            rise = H_after - dissipation.H_old
            limit = ENERGY_TOL * max(1.0, abs(dissipation.H_old))
            checks.append(InvariantCheck("energy_decay", rise <= limit, rise, limit, new.t))
            checks.append(InvariantCheck("dissipation_inequality", dissipation.holds,
                                         dissipation.balance, DISSIPATION_TOL, new.t))
            checks.append(InvariantCheck("interface_dissipation_sign",
                                         dissipation.interface_linear >= -INTERFACE_SIGN_TOL,
                                         -dissipation.interface_linear, INTERFACE_SIGN_TOL, new.t))
            checks.append(InvariantCheck("weak_interface_bound", dissipation.weak_bound_ok,
                                         dissipation.weak_bound - dissipation.strong_phi, 0.0, new.t))
            if dissipation.pinned:
                logger.info(f"phase relabelling at pinning changed the energy by {dissipation.pin_jump:.3e}")

        self.report.steps += 1
        for check in checks:
            self.report.add(check)
            if check.passed:
                continue
            message = (f"invariant {check.name} violated at t={check.t:.6g}: "
                       f"{check.value:.3e} > {check.limit:.3e}")
            if self.strict:
                raise InvariantBreach(message, t=check.t, check=check.name)
            logger.warning(message)
        return checks
