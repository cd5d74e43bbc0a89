"""
BIPHASE Diagnostics
===================

Discrete free energy, dissipation bookkeeping and error measures.

Features:
- Discrete free energy on the moving mesh
- Per-step dissipation report (bulk, interface, strong and weak forms)
- Quantities relative to the stationary state
- L1 errors against a refined reference run and fitted orders
- CSV writers for time series, snapshots and error tables
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.errors import GridError
from core.fluxes import log_mean
from core.mesh import MovingMesh, mean_projection
from core.model import (ModelParams, free_energy_density, interface_dissipation_terms, mobility,
                        weak_dissipation_rate)
from core.solver import SimState
from core.stationary import StationaryState

logger = logging.getLogger(__name__)

ENERGY_SLACK = 1e-10


@dataclass
class DiagnosticsRecord:
    """One row of the time series."""
    t: float
    X: float
    K_int: int
    H: float
    H_rel: float
    dX_rel: float
    masses: np.ndarray
    dissipation_bulk: float = 0.0
    dissipation_interface: float = 0.0
    dissipation_phi_star: float = 0.0
    newton_iters: int = 0
    dt: float = 0.0


@dataclass
class DissipationReport:
    """
    Energy balance of one accepted step.

    H_star is the energy of the Newton root on the intermediate mesh; pin_jump is
    the energy change caused by relabelling the vanished phase when the mesh is
    pinned.
    """
    H_old: float
    H_star: float
    H_new: float
    bulk: float
    interface_linear: float
    strong_phi: float
    weak_bound: float
    weak_bound_ok: bool
    pinned: bool = False

    @property
    def pin_jump(self) -> float:
        return self.H_new - self.H_star if self.pinned else 0.0

    @property
    def balance(self) -> float:
        """H_star + dissipation - H_old; nonpositive up to rounding."""
        return self.H_star + self.bulk + self.interface_linear - self.H_old

    @property
    def holds(self) -> bool:
        return self.balance <= ENERGY_SLACK

    @property
    def fenchel_young_gap(self) -> float:
        return abs(self.interface_linear - self.strong_phi) / max(1.0, abs(self.strong_phi))


def discrete_free_energy(c: np.ndarray, mesh: MovingMesh, params: ModelParams) -> float:
    """Sum of width-weighted cell energies, solid density left of the interface."""
    c = np.asarray(c, dtype=float)
    h_s = free_energy_density(c, "s", params)
    h_g = free_energy_density(c, "g", params)
    return float(mesh.widths @ np.where(mesh.solid_mask, h_s, h_g))


def _bulk_dissipation(c: np.ndarray, mesh: MovingMesh, params: ModelParams) -> float:
    edges = np.arange(1, mesh.N)
    if mesh.single_phase is None:
        edges = edges[edges != mesh.K_int]
    left, right = c[edges - 1], c[edges]
    dlog = np.log(right) - np.log(left)
    u = log_mean(left, right)
    if mesh.single_phase is None:
        solid = edges < mesh.K_int
    else:
        solid = np.full(edges.shape, mesh.single_phase == "s")
    total = 0.0
    for phase, mask in (("s", solid), ("g", ~solid)):
        if not np.any(mask):
            continue
        mob = mobility(u[mask], phase, params)
        total += float(np.einsum("ei,eij,ej->", dlog[mask], mob, dlog[mask]))
    return total / mesh.dx


def dissipation_report(state_old: SimState, state_new: SimState, dt: float,
                       params: ModelParams) -> DissipationReport:
    """
    Terms of the discrete dissipation inequality for the step old -> new.

    The bulk and interface terms are evaluated at the Newton root on the old
    mesh; the interface edge is left out of the bulk sum.
    """
    trace = state_new.trace
    c_star = trace.c_star if trace is not None else state_new.c
    mesh_star = trace.mesh_star if trace is not None else state_new.mesh
    mesh_old = state_old.mesh

    H_old = discrete_free_energy(state_old.c, mesh_old, params)
    H_star = discrete_free_energy(c_star, mesh_star, params)
    H_new = discrete_free_energy(state_new.c, state_new.mesh, params)
    bulk = dt * _bulk_dissipation(c_star, mesh_old, params)

    linear = strong = weak = 0.0
    if mesh_old.single_phase is None:
        c_s, c_g = c_star[mesh_old.solid_cell], c_star[mesh_old.gas_cell]
        lin_terms, strong_terms = interface_dissipation_terms(c_s, c_g, params)
        linear = dt * float(lin_terms.sum())
        strong = dt * float(strong_terms.sum())
        weak = dt * weak_dissipation_rate(c_s, c_g, params)

    pinned = mesh_old.single_phase is None and state_new.mesh.single_phase is not None
    return DissipationReport(H_old=H_old, H_star=H_star, H_new=H_new, bulk=bulk,
                             interface_linear=linear, strong_phi=strong, weak_bound=weak,
                             weak_bound_ok=weak_interface_bound(strong, weak), pinned=pinned)


def weak_interface_bound(strong: float, weak: float, tol: float = 1e-12) -> bool:
    """The strong interface dissipation dominates sum phi*(F)."""
    return bool(strong + tol * max(1.0, abs(strong)) >= weak)


def stationary_energy(state: StationaryState, params: ModelParams) -> float:
    """Free energy of a stationary state; the family uses equal compositions."""
    if state.is_family:
        return float(free_energy_density(state.c_bar_s, "s", params))
    X = state.X_bar
    energy = 0.0
    if X > 0.0:
        energy += X * float(free_energy_density(state.c_bar_s, "s", params))
    if X < 1.0:
        energy += (1.0 - X) * float(free_energy_density(state.c_bar_g, "g", params))
    return energy


def relative_quantities(H: float, X: float, reference: Optional[StationaryState],
                        params: ModelParams) -> Tuple[float, float]:
    """(H - H_bar, |X - X_bar|); NaN where the reference does not define them."""
    if reference is None:
        return float("nan"), float("nan")
    H_rel = H - stationary_energy(reference, params)
    dX_rel = float("nan") if reference.X_bar is None else abs(X - reference.X_bar)
    return H_rel, dX_rel


def make_record(state: SimState, params: ModelParams, reference: Optional[StationaryState],
                report: Optional[DissipationReport] = None) -> DiagnosticsRecord:
    H = discrete_free_energy(state.c, state.mesh, params)
    H_rel, dX_rel = relative_quantities(H, state.X, reference, params)
    trace = state.trace
    return DiagnosticsRecord(
        t=state.t, X=state.X, K_int=state.mesh.K_int, H=H, H_rel=H_rel, dX_rel=dX_rel,
        masses=state.mesh.masses(state.c),
        dissipation_bulk=report.bulk if report else 0.0,
        dissipation_interface=report.interface_linear if report else 0.0,
        dissipation_phi_star=report.strong_phi if report else 0.0,
        newton_iters=trace.newton_iters if trace else 0,
        dt=trace.dt if trace else 0.0)


@dataclass
class ErrorRow:
    N: int
    dx: float
    error_c: float
    error_X: float


@dataclass
class ConvergenceTable:
    rows: List[ErrorRow] = field(default_factory=list)
    reference_N: int = 0

    @property
    def order_c(self) -> float:
        return fit_order([r.dx for r in self.rows], [r.error_c for r in self.rows])

    @property
    def order_X(self) -> float:
        return fit_order([r.dx for r in self.rows], [r.error_X for r in self.rows])


def l1_errors(coarse_run: Sequence[SimState], reference_run: Sequence[SimState]) -> Tuple[float, float]:
    """
    Discrete L1 errors in time and space of a coarse run against a reference.

    The reference concentrations are mean-projected onto the coarse cells at
    each accepted coarse step and compared with the actual coarse widths.
    """
    if len(coarse_run) < 2 or not reference_run:
        raise GridError("both runs need recorded states")
    N_c = coarse_run[0].mesh.N
    N_r = reference_run[0].mesh.N
    if N_r < N_c or N_r % N_c:
        raise GridError(f"reference grid N={N_r} is not a refinement of N={N_c}")

    ref_times = np.array([s.t for s in reference_run])
    error_c = 0.0
    error_X = 0.0
    for prev, cur in zip(coarse_run[:-1], coarse_run[1:]):
        dt = cur.t - prev.t
        j = int(np.argmin(np.abs(ref_times - cur.t)))
        if abs(ref_times[j] - cur.t) > 0.5 * dt + 1e-12:
            raise GridError(f"no reference sample near t={cur.t:.6g}")
        ref = reference_run[j]
        projected = mean_projection(ref.c, ref.mesh.edges, cur.mesh.edges)
        error_c += dt * float(cur.mesh.widths @ np.abs(cur.c - projected).sum(axis=1))
        error_X += dt * abs(cur.X - ref.X)
    return error_c, error_X


def fit_order(dx: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(dx)."""
    dx = np.asarray(dx, dtype=float)
    errors = np.asarray(errors, dtype=float)
    keep = errors > 0.0
    if keep.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(dx[keep]), np.log(errors[keep]), 1)
    return float(slope)


def fit_exponential_decay(t: Sequence[float], values: Sequence[float]) -> Tuple[float, float]:
    """Slope and R^2 of a linear fit of log(values) against t, positive values only."""
    t = np.asarray(t, dtype=float)
    values = np.asarray(values, dtype=float)
    keep = values > 0.0
    if keep.sum() < 3:
        return float("nan"), float("nan")
    x, y = t[keep], np.log(values[keep])
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - float(np.sum(residual**2)) / float(total) if total > 0.0 else 1.0
    return float(slope), r2


def time_series_frame(records: Sequence[DiagnosticsRecord]) -> pd.DataFrame:
    n = len(records[0].masses) if records else 0
    columns = (["t", "X", "K_int", "H", "H_rel", "dX_rel"] + [f"m_{i + 1}" for i in range(n)]
               + ["diss_bulk", "diss_interface", "newton_iters", "dt"])
    rows = [[r.t, r.X, r.K_int, r.H, r.H_rel, r.dX_rel, *map(float, r.masses),
             r.dissipation_bulk, r.dissipation_interface, r.newton_iters, r.dt] for r in records]
    return pd.DataFrame(rows, columns=columns)


def write_time_series(records: Sequence[DiagnosticsRecord], path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    time_series_frame(records).to_csv(path, index=False)
    logger.debug(f"wrote {len(records)} records to {path}")
    return path


def snapshot_frame(state: SimState) -> pd.DataFrame:
    edges = state.mesh.edges
    data = {"x_left": edges[:-1], "x_right": edges[1:]}
    for i in range(state.c.shape[1]):
        data[f"c_{i + 1}"] = state.c[:, i]
    return pd.DataFrame(data)


def write_snapshot(state: SimState, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    snapshot_frame(state).to_csv(path, index=False)
    return path


def write_error_table(table: ConvergenceTable, path) -> Path:
    """Error table with one row per grid and the fitted orders as a trailing row."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    rows = [[str(r.N), r.dx, r.error_c, r.error_X] for r in table.rows]
    rows.append(["order", float("nan"), table.order_c, table.order_X])
    pd.DataFrame(rows, columns=["N", "dx", "error_c", "error_X"]).to_csv(path, index=False)
    return path
