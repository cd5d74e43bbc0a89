"""
BIPHASE Scenarios
=================

Scenario description and the run drivers behind the CLI.

Features:
- Scenario dataclass with validation and model parameter construction
- Builtin initial profiles
- PDE runs with diagnostics, invariant checks, snapshots and failure dumps
- Space-homogeneous ODE runs and stationary-state analysis
- Grid convergence ladder run in parallel worker processes
- Search for exchange constants giving a nonmonotone interface
"""

import dataclasses
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from core.diagnostics import (ConvergenceTable, DiagnosticsRecord, ErrorRow, dissipation_report,
                              l1_errors, make_record, write_error_table, write_snapshot,
                              write_time_series)
from core.errors import DomainError, InvariantBreach, ScenarioError, SolverFailure, StationaryError
from core.mesh import MovingMesh, discretize_initial
from core.model import ModelParams
from core.simplified_ode import (MassState, Trajectory, dissipation_identity_residuals, integrate,
                                 is_strict_local_minimum, mass_state_from_stationary)
from core.solver import SimState, Simulation, StepperConfig
from core.stationary import (StationaryResult, StationaryState, solve_stationary, stationary_profile,
                             two_phase_condition)
from core.validator import InvariantReport, InvariantValidator

logger = logging.getLogger(__name__)

MODES = ("pde", "ode", "converge", "stationary")
PROFILES = ("cosine", "uniform", "table")
PROFILE_ALIASES = {"paper_cosine": "cosine"}

# exchange constants scanned by the nonmonotone search; species 1 and 2 share a value
SEARCH_GRID = (1 / 8, 1 / 6, 1 / 4, 1 / 2, 2.0, 4.0, 6.0, 8.0)

ProgressCallback = Callable[[float], None]


@dataclass
class Scenario:
    """A complete, validated run description."""
    name: str
    kappa_s: np.ndarray
    kappa_g: np.ndarray
    mode: str = "pde"
    N: int = 100
    dt_init: float = 8e-4
    t_end: float = 5.0
    X0: float = 0.51
    mu_star_s: Optional[np.ndarray] = None
    mu_star_g: Optional[np.ndarray] = None
    beta_star: Optional[np.ndarray] = None
    beta_search: bool = False
    profile: str = "cosine"
    profile_values: Optional[np.ndarray] = None
    snapshot_times: Tuple[float, ...] = ()
    output_dir: Optional[str] = None
    well_balanced: bool = False
    grids: Tuple[int, ...] = ()
    reference_N: Optional[int] = None
    derived: bool = False
    description: str = ""

    def validate(self) -> None:
        """Raise ScenarioError on any inconsistent field."""
        if self.mode not in MODES:
            raise ScenarioError(f"unknown mode {self.mode!r}, expected one of {', '.join(MODES)}")
        if self.N < 4:
            raise ScenarioError(f"N must be at least 4, got {self.N}")
        if not self.t_end > 0.0:
            raise ScenarioError(f"t_end must be positive, got {self.t_end}")
        if not self.dt_init > 0.0:
            raise ScenarioError(f"dt must be positive, got {self.dt_init}")
        if not 0.0 < self.X0 < 1.0:
            raise ScenarioError(f"X0 must lie in (0, 1), got {self.X0}")
        if PROFILE_ALIASES.get(self.profile, self.profile) not in PROFILES:
            raise ScenarioError(f"unknown initial profile {self.profile!r}")
        if any(t < 0.0 or t > self.t_end for t in self.snapshot_times):
            raise ScenarioError(f"snapshot times must lie in [0, {self.t_end}]")
        if self.mode == "converge":
            if not self.grids or self.reference_N is None:
                raise ScenarioError("converge mode needs grids and reference_N")
            for N in self.grids:
                if N < 4 or self.reference_N <= N or self.reference_N % N:
                    raise ScenarioError(f"reference_N={self.reference_N} is not a refinement of N={N}")
        if not self.beta_search:
            self.params()
        else:
            self._build(self.beta_star if self.beta_star is not None else np.ones(len(self.kappa_s)))
        builtin_initial_profile(self.profile, self.profile_values, len(self.kappa_s))

    def _build(self, beta_star) -> ModelParams:
        try:
            return ModelParams.build(self.kappa_s, self.kappa_g, self.mu_star_s, self.mu_star_g, beta_star)
        except DomainError as e:
            raise ScenarioError(f"invalid model parameters: {e}") from e

    def params(self) -> ModelParams:
        if self.beta_search:
            raise ScenarioError("exchange constants are still to be searched")
        return self._build(self.beta_star)

    def initial_profile(self) -> Callable:
        return builtin_initial_profile(self.profile, self.profile_values, len(self.kappa_s))


def builtin_initial_profile(name: str, values: Optional[np.ndarray] = None, n: int = 3) -> Callable:
    """
    Initial concentration profile as a vectorized function of x.

    cosine: c1 = c2 = (1 + cos(pi x)) / 4, c3 = (1 - cos(pi x)) / 2.
    uniform: the constant composition in values.
    table: rows (x, c_1..c_n) interpolated linearly.
    """
    name = PROFILE_ALIASES.get(name, name)
    if name == "cosine":
        if n != 3:
            raise ScenarioError(f"cosine is a three-species profile, model has {n}")

        def cosine(x):
            x = np.asarray(x, dtype=float)
            cos = np.cos(np.pi * x)
            return np.stack([(1.0 + cos) / 4.0, (1.0 + cos) / 4.0, (1.0 - cos) / 2.0], axis=-1)
        return cosine

    if name == "uniform":
        comp = np.asarray(values, dtype=float) if values is not None else None
        if comp is None or comp.shape != (n,):
            raise ScenarioError(f"uniform profile needs {n} concentrations")
        _check_admissible(comp[None, :])
        if np.any(comp <= 0.0):
            raise ScenarioError("uniform profile needs strictly positive concentrations")

        def uniform(x):
            x = np.asarray(x, dtype=float)
            return np.broadcast_to(comp, x.shape + (n,)).copy()
        return uniform

    if name == "table":
        table = np.asarray(values, dtype=float) if values is not None else None
        if table is None or table.ndim != 2 or table.shape[1] != n + 1 or len(table) < 2:
            raise ScenarioError(f"table profile needs at least two rows of (x, c_1..c_{n})")
        xs = table[:, 0]
        if xs[0] != 0.0 or xs[-1] != 1.0 or np.any(np.diff(xs) <= 0.0):
            raise ScenarioError("table positions must increase from 0 to 1")
        _check_admissible(table[:, 1:])

        def tabulated(x):
            x = np.asarray(x, dtype=float)
            return np.stack([np.interp(x, xs, table[:, i + 1]) for i in range(n)], axis=-1)
        return tabulated

    raise ScenarioError(f"unknown initial profile {name!r}")


def _check_admissible(comp: np.ndarray) -> None:
    if np.any(comp < 0.0) or np.any(np.abs(comp.sum(axis=-1) - 1.0) > 1e-12):
        raise ScenarioError("initial compositions must be nonnegative and sum to one")


@dataclass
class RunResult:
    """Everything a run produced."""
    scenario: Scenario
    records: List[DiagnosticsRecord] = field(default_factory=list)
    final_state: Optional[SimState] = None
    invariants: Optional[InvariantReport] = None
    stationary: Optional[StationaryResult] = None
    trajectory: Optional[Trajectory] = None
    convergence: Optional[ConvergenceTable] = None
    files: List[Path] = field(default_factory=list)
    beta_star: Optional[np.ndarray] = None
    steps: int = 0
    halved_steps: int = 0
    notes: Dict[str, float] = field(default_factory=dict)


def stepper_config(scenario: Scenario, solver_settings=None) -> StepperConfig:
    if solver_settings is None:
        return StepperConfig(dt_init=scenario.dt_init)
    return StepperConfig.from_settings(scenario.dt_init, solver_settings)


def initial_state(scenario: Scenario, params: ModelParams) -> SimState:
    """Cell means of the initial profile, or the stationary profile when well_balanced is set."""
    mesh = MovingMesh.from_interface(scenario.X0, scenario.N)
    c0 = discretize_initial(scenario.initial_profile(), mesh)
    if scenario.well_balanced:
        result = solve_stationary(mesh.masses(c0), params.beta_star)
        if result.two_phase is None:
            raise ScenarioError(f"well_balanced needs a two-phase stationary state, found {result.kind}")
        c0, mesh = stationary_profile(result.two_phase, scenario.N)
    return SimState(c=c0, mesh=mesh, t=0.0)


def _reference_state(m0: np.ndarray, params: ModelParams) -> Optional[StationaryState]:
    try:
        result = solve_stationary(m0, params.beta_star)
    except (DomainError, StationaryError) as e:
        logger.warning(f"no stationary reference: {e}")
        return None
    if result.kind == "pure_only":
        return None
    return result.states[0]


def _snapshot_path(out_dir: Path, name: str, t: float) -> Path:
    return out_dir / f"{name}_snapshot_t{t:.6g}.csv"


def resolve_beta(scenario: Scenario) -> Scenario:
    """Replace a searched beta_star by the result of the nonmonotone search."""
    if not scenario.beta_search:
        return scenario
    beta, score = search_nonmonotone_beta(scenario)
    logger.info(f"nonmonotone search selected beta_star={beta.tolist()} (reversal {score:.3e})")
    return dataclasses.replace(scenario, beta_star=beta, beta_search=False,
                               mu_star_s=None, mu_star_g=None)


def run_pde(scenario: Scenario, out_dir, solver_settings=None, strict: bool = False,
            snapshot_times: Optional[Sequence[float]] = None,
            progress: Optional[ProgressCallback] = None, write_files: bool = True) -> RunResult:
    """
    Time-dependent run of the finite-volume scheme.

    Writes <name>_timeseries.csv and one snapshot per requested time. On a hard
    failure the last accepted state goes to <name>_failure_state.csv.
    """
    scenario = resolve_beta(scenario)
    params = scenario.params()
    out_dir = Path(out_dir)
    config = stepper_config(scenario, solver_settings)
    times = sorted(set(scenario.snapshot_times if snapshot_times is None else snapshot_times))
    late = [t for t in times if t > scenario.t_end]
    if late:
        raise ScenarioError(f"snapshot times {late} lie beyond t_end={scenario.t_end:g}")

    state0 = initial_state(scenario, params)
    reference = _reference_state(state0.mesh.masses(state0.c), params)
    validator = InvariantValidator(state0, strict=strict)
    for check in validator.check_state(state0):
        validator.report.add(check)
    result = RunResult(scenario=scenario, invariants=validator.report, beta_star=params.beta_star)
    result.records.append(make_record(state0, params, reference))

    pending = [t for t in times if t > 0.0]
    if write_files and 0.0 in times:
        result.files.append(write_snapshot(state0, _snapshot_path(out_dir, scenario.name, 0.0)))

    def observe(old: SimState, new: SimState) -> None:
        report = dissipation_report(old, new, new.trace.dt, params)
        validator.check_step(old, new, report)
        result.records.append(make_record(new, params, reference, report))
        while pending and new.t >= pending[0] - 1e-12 * max(1.0, pending[0]):
            stop = pending.pop(0)
            if write_files:
                result.files.append(write_snapshot(new, _snapshot_path(out_dir, scenario.name, stop)))
        if progress is not None:
            progress(new.t)

    logger.info(f"starting run {scenario.name}: N={scenario.N}, dt={scenario.dt_init:g}, "
                f"T={scenario.t_end:g}, beta*={params.beta_star.tolist()}")
    sim = Simulation(state0, params, config)
    try:
        result.final_state = sim.run(scenario.t_end, stops=pending, observer=observe)
    except (SolverFailure, InvariantBreach) as e:
        last = getattr(e, "state", None) or sim.state
        if write_files:
            dump = write_snapshot(last, out_dir / f"{scenario.name}_failure_state.csv")
            write_time_series(result.records, out_dir / f"{scenario.name}_timeseries.csv")
            if isinstance(e, SolverFailure):
                e.dump_path = str(dump)
            logger.error(f"run {scenario.name} failed at t={last.t:.6g}; state dumped to {dump}")
        raise
    finally:
        result.steps = sim.steps
        result.halved_steps = sim.halved_steps

    if write_files:
        result.files.insert(0, write_time_series(result.records, out_dir / f"{scenario.name}_timeseries.csv"))
    logger.info(f"run {scenario.name} finished: X={result.final_state.X:.6f}, "
                f"H={result.records[-1].H:.12g}, invariants {'ok' if validator.report.ok else 'BREACHED'}")
    return result


def homogenized_mass_state(scenario: Scenario) -> MassState:
    """Solid and total masses of the initial profile split at X0."""
    mesh = MovingMesh.from_interface(scenario.X0, scenario.N)
    c0 = discretize_initial(scenario.initial_profile(), mesh)
    m_s = mesh.widths[mesh.solid_mask] @ c0[mesh.solid_mask]
    return MassState.of(m_s, mesh.masses(c0))


def run_ode(scenario: Scenario, out_dir, strict: bool = False, write_files: bool = True) -> RunResult:
    """Space-homogeneous dynamics started from the phase means of the initial profile."""
    scenario = resolve_beta(scenario)
    params = scenario.params()
    state0 = homogenized_mass_state(scenario)
    logger.info(f"starting ODE run {scenario.name}: X0={state0.X:.6f}, dt={scenario.dt_init:g}")
    trajectory = integrate(state0, scenario.t_end, scenario.dt_init, params)
    result = RunResult(scenario=scenario, trajectory=trajectory, beta_star=params.beta_star,
                       steps=len(trajectory.t) - 1)

    rise = float(np.max(np.diff(trajectory.energy), initial=0.0))
    residuals = dissipation_identity_residuals(trajectory, params)
    result.notes["max_energy_increase"] = rise
    result.notes["max_dissipation_residual"] = float(np.max(residuals, initial=0.0))
    if rise > 1e-12:
        message = f"reduced free energy increased by {rise:.3e} along the ODE trajectory"
        if strict:
            raise InvariantBreach(message, check="energy_decay")
        logger.warning(message)

    stationary = solve_stationary(state0.m0, params.beta_star)
    result.stationary = stationary
    if stationary.two_phase is not None:
        bar = stationary.two_phase
        stable = is_strict_local_minimum(mass_state_from_stationary(bar.c_bar_s, bar.X_bar, state0.m0), params)
        result.notes["stationary_is_local_minimum"] = float(stable)

    if write_files:
        n = params.n
        frame = pd.DataFrame({"t": trajectory.t, "X": trajectory.X, "H": trajectory.energy})
        for i in range(n):
            frame[f"m_{i + 1}"] = trajectory.m_s[:, i]
        path = Path(out_dir) / f"{scenario.name}_ode.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(path, index=False)
        result.files.append(path)
    return result


def run_stationary(scenario: Scenario, out_dir, write_files: bool = True) -> RunResult:
    """Classify the stationary states reachable from the initial masses."""
    scenario = resolve_beta(scenario)
    params = scenario.params()
    mesh = MovingMesh.from_interface(scenario.X0, scenario.N)
    c0 = discretize_initial(scenario.initial_profile(), mesh)
    m0 = mesh.masses(c0)
    stationary = solve_stationary(m0, params.beta_star)
    result = RunResult(scenario=scenario, stationary=stationary, beta_star=params.beta_star)
    result.notes["two_phase_condition"] = float(two_phase_condition(m0, params.beta_star))

    if write_files:
        rows = []
        for state in stationary.states:
            rows.append([state.kind.value, np.nan if state.X_bar is None else state.X_bar,
                         *state.c_bar_s.tolist(), *state.c_bar_g.tolist()])
        columns = (["kind", "X_bar"] + [f"c_s_{i + 1}" for i in range(params.n)]
                   + [f"c_g_{i + 1}" for i in range(params.n)])
        path = Path(out_dir) / f"{scenario.name}_stationary.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows, columns=columns).to_csv(path, index=False)
        result.files.append(path)
    return result


def _run_level(scenario: Scenario, N: int, config: StepperConfig) -> List[SimState]:
    """One rung of the convergence ladder; runs in a worker process."""
    level = dataclasses.replace(scenario, N=N, mode="pde")
    params = level.params()
    sim = Simulation(initial_state(level, params), params, config, keep_history=True)
    sim.run(level.t_end)
    return sim.history


def run_convergence(scenario: Scenario, out_dir, solver_settings=None, workers: int = 1,
                    progress: Optional[ProgressCallback] = None, write_files: bool = True) -> RunResult:
    """
    Grid ladder against a refined reference run.

    Each grid is an independent sequential simulation; with several workers
    they run in separate processes. Errors are computed once all have finished.
    """
    scenario = resolve_beta(scenario)
    config = stepper_config(scenario, solver_settings)
    levels = list(scenario.grids) + [scenario.reference_N]
    histories: Dict[int, List[SimState]] = {}
    logger.info(f"convergence study {scenario.name}: grids {list(scenario.grids)} "
                f"against N={scenario.reference_N} with {workers} worker(s)")

    if workers <= 1:
        for N in levels:
            histories[N] = _run_level(scenario, N, config)
            logger.info(f"grid N={N} finished")
            if progress is not None:
                progress(len(histories))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_level, scenario, N, config): N for N in levels}
            for future in as_completed(futures):
                N = futures[future]
                histories[N] = future.result()
                logger.info(f"grid N={N} finished")
                if progress is not None:
                    progress(len(histories))

    reference = histories[scenario.reference_N]
    table = ConvergenceTable(reference_N=scenario.reference_N)
    for N in scenario.grids:
        error_c, error_X = l1_errors(histories[N], reference)
        table.rows.append(ErrorRow(N=N, dx=1.0 / N, error_c=error_c, error_X=error_X))
        logger.info(f"N={N}: L1 error c={error_c:.6e}, X={error_X:.6e}")
    logger.info(f"fitted order: c {table.order_c:.3f}, X {table.order_X:.3f}")

    result = RunResult(scenario=scenario, convergence=table,
                       beta_star=scenario.params().beta_star)
    if write_files:
        result.files.append(write_error_table(table, Path(out_dir) / f"{scenario.name}_errors.csv"))
    return result


def run_scenario(scenario: Scenario, out_dir, solver_settings=None, strict: bool = False,
                 snapshot_times: Optional[Sequence[float]] = None,
                 progress: Optional[ProgressCallback] = None, workers: int = 1) -> RunResult:
    """Dispatch a scenario to the driver of its mode."""
    if scenario.mode == "pde":
        return run_pde(scenario, out_dir, solver_settings, strict, snapshot_times, progress)
    if scenario.mode == "ode":
        return run_ode(scenario, out_dir, strict)
    if scenario.mode == "stationary":
        return run_stationary(scenario, out_dir)
    return run_convergence(scenario, out_dir, solver_settings, workers, progress)


def reversal(X: np.ndarray) -> float:
    """Smaller of the total forward and backward travel of a series of positions."""
    steps = np.diff(np.asarray(X, dtype=float))
    return float(min(np.sum(np.maximum(steps, 0.0)), np.sum(np.maximum(-steps, 0.0))))


def search_nonmonotone_beta(scenario: Scenario, grid: Sequence[float] = SEARCH_GRID,
                            confirm_N: int = 25, confirm: int = 5) -> Tuple[np.ndarray, float]:
    """
    Exchange constants for which the interface moves back and forth.

    Candidates (a, a, b) from the grid that satisfy the two-phase condition
    are ranked by the reversal of X along the space-homogeneous dynamics; the
    best ones are confirmed on a coarse PDE run. The scan is deterministic.
    """
    base = dataclasses.replace(scenario, beta_search=False, mu_star_s=None, mu_star_g=None)
    m_state = homogenized_mass_state(base)
    ranked = []
    for a in grid:
        for b in grid:
            beta = np.array([a, a, b], dtype=float)
            if not two_phase_condition(m_state.m0, beta):
                continue
            params = ModelParams.build(base.kappa_s, base.kappa_g, beta_star=beta)
            trajectory = integrate(m_state, 2.0, 5e-3, params)
            score = reversal(trajectory.X)
            if score > 0.0:
                ranked.append((score, tuple(beta)))
    if not ranked:
        raise ScenarioError("no exchange constants on the search grid give a nonmonotone interface")
    ranked.sort(key=lambda item: (-item[0], item[1]))
    logger.debug(f"nonmonotone search: {len(ranked)} candidates, best ODE reversal {ranked[0][0]:.3e}")

    for score, beta in ranked[:confirm]:
        coarse = dataclasses.replace(base, beta_star=np.array(beta), N=confirm_N, dt_init=2e-3,
                                     t_end=1.0, snapshot_times=(), well_balanced=False)
        try:
            run = run_pde(coarse, ".", write_files=False)
        except (SolverFailure, InvariantBreach) as e:
            logger.debug(f"candidate {beta} rejected: {e}")
            continue
        pde_score = reversal([r.X for r in run.records])
        if pde_score > 1e-5:
            return np.array(beta), pde_score
    logger.warning("no candidate confirmed on the coarse grid; using the best ODE candidate")
    return np.array(ranked[0][1]), ranked[0][0]
