"""
BIPHASE Implicit Solver
=======================

Time stepping of the modified two-phase scheme.

Each step solves the nonlinear conservation laws for the N x n cell values by
Newton's method. The interface displacement is an explicit function of the
unknowns, so the interface cut-cell widths move with the iterate. After
convergence the interface is updated and the mesh is post-processed.

Features:
- Residual with two-sided truncated interface fluxes
- Analytic block-tridiagonal Jacobian solved with scipy.sparse
- Finite-difference Jacobian for verification
- CFL-capped step with halving on Newton failure and doubling after a streak
"""

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, List, Optional

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.linalg import spsolve

from core.errors import CFLError, GeometryError, NewtonError, SolverFailure
from core.fluxes import (gas_flux, gas_flux_jacobian, interface_flux, interface_flux_jacobian,
                         raw_interface_flux, solid_flux, solid_flux_jacobian)
from core.mesh import MovingMesh, post_process
from core.model import ModelParams, butler_volmer_flux, interface_flux_bound

logger = logging.getLogger(__name__)


@dataclass
class StepperConfig:
    """Time stepping and Newton controls."""
    dt_init: float
    cfl_safety: float = 0.99
    newton_tol: float = 1e-12
    newton_max_iter: int = 50
    max_halvings: int = 20
    growth_streak: int = 10

    def __post_init__(self):
        if self.dt_init <= 0.0:
            raise ValueError(f"dt_init must be positive, got {self.dt_init}")
        if not 0.0 < self.cfl_safety < 1.0:
            raise ValueError(f"cfl_safety must lie in (0, 1), got {self.cfl_safety}")

    @classmethod
    def from_settings(cls, dt_init: float, settings) -> "StepperConfig":
        """Build from the environment-backed solver settings."""
        return cls(dt_init=dt_init, cfl_safety=settings.cfl_safety,
                   newton_tol=settings.newton_tol, newton_max_iter=settings.newton_max_iter,
                   max_halvings=settings.max_halvings, growth_streak=settings.growth_streak)


@dataclass(frozen=True, eq=False)
class StepTrace:
    """What happened inside the step that produced a state."""
    c_star: np.ndarray
    mesh_star: MovingMesh
    dt: float
    newton_iters: int
    halvings: int = 0


@dataclass(frozen=True, eq=False)
class SimState:
    """Cell concentrations (N x n) on a mesh at time t."""
    c: np.ndarray
    mesh: MovingMesh
    t: float
    trace: Optional[StepTrace] = None

    @property
    def single_phase(self) -> Optional[str]:
        return self.mesh.single_phase

    @property
    def X(self) -> float:
        return self.mesh.X


@dataclass
class NewtonResult:
    c_star: np.ndarray
    X_new: float
    iterations: int
    increment: float


def cfl_constant(params: ModelParams) -> float:
    """max_i 2 cosh(|log beta_i| / 2), the bound on the interface speed."""
    return float(np.max(interface_flux_bound(params)))


def stable_dt(config: StepperConfig, params: ModelParams, N: int) -> float:
    """Configured step clamped below dx / (2 C)."""
    bound = config.cfl_safety * (1.0 / N) / (2.0 * cfl_constant(params))
    return min(config.dt_init, bound)


def _check_two_phase(mesh: MovingMesh) -> None:
    if mesh.single_phase is None and not 2 <= mesh.K_int <= mesh.N - 1:
        raise GeometryError(f"two-phase step needs 2 <= K_int <= N-1, got K_int={mesh.K_int}")


def _edge_phases(mesh: MovingMesh):
    """Interior edges 1..N-1 split into solid and gas edges; the interface edge is in neither."""
    edges = np.arange(1, mesh.N)
    if mesh.single_phase == "s":
        return edges, edges[:0]
    if mesh.single_phase == "g":
        return edges[:0], edges
    return edges[edges < mesh.K_int], edges[edges > mesh.K_int]


def bulk_fluxes(c: np.ndarray, mesh: MovingMesh, params: ModelParams) -> np.ndarray:
    """Fluxes on all N+1 edges; boundary and interface entries are zero."""
    N, n = c.shape
    J = np.zeros((N + 1, n))
    solid, gas = _edge_phases(mesh)
    if solid.size:
        J[solid] = solid_flux(c[solid - 1], c[solid], params, mesh.dx)
    if gas.size:
        J[gas] = gas_flux(c[gas - 1], c[gas], params, mesh.dx)
    return J


def _moved_widths(mesh: MovingMesh, sigma: float, dt: float) -> np.ndarray:
    widths = mesh.widths.copy()
    if mesh.single_phase is None:
        widths[mesh.solid_cell] += dt * sigma
        widths[mesh.gas_cell] -= dt * sigma
        if widths[mesh.solid_cell] <= 0.0 or widths[mesh.gas_cell] <= 0.0:
            raise CFLError(f"interface cut cell collapsed (dt={dt:.3e}, sum F={sigma:.3e})")
    return widths


def residual(c_trial: np.ndarray, given: SimState, dt: float, params: ModelParams) -> np.ndarray:
    """
    Residual of the modified scheme, shape (N, n).

    Row K reads (W_K c_K - W_K^old c_K^old) / dt + J_{K+1/2} - J_{K-1/2}; the two
    cut cells use the one-sided interface fluxes and widths moved by dt * sum F~.
    """
    mesh = given.mesh
    _check_two_phase(mesh)
    c = np.asarray(c_trial, dtype=float).reshape(given.c.shape)
    J = bulk_fluxes(c, mesh, params)
    J_right = J[1:].copy()
    J_left = J[:-1].copy()
    sigma = 0.0
    if mesh.single_phase is None:
        ks, kg = mesh.solid_cell, mesh.gas_cell
        iface = interface_flux(c[ks], c[kg], params)
        sigma = float(iface.F_tilde.sum())
        J_right[ks] = iface.J_side_s
        J_left[kg] = iface.J_side_g
    widths = _moved_widths(mesh, sigma, dt)
    return (widths[:, None] * c - mesh.widths[:, None] * given.c) / dt + J_right - J_left


def _block_tridiagonal(lower: np.ndarray, diag: np.ndarray, upper: np.ndarray):
    N, n, _ = diag.shape
    ii, jj = np.indices((n, n))
    k = np.arange(N)[:, None, None]
    kl = np.arange(1, N)[:, None, None]
    rows = np.concatenate([(k * n + ii).ravel(), (kl * n + ii).ravel(), ((kl - 1) * n + ii).ravel()])
    cols = np.concatenate([(k * n + jj).ravel(), ((kl - 1) * n + jj).ravel(), (kl * n + jj).ravel()])
    data = np.concatenate([diag.ravel(), lower.ravel(), upper.ravel()])
    return coo_matrix((data, (rows, cols)), shape=(N * n, N * n)).tocsc()


def jacobian(c_trial: np.ndarray, given: SimState, dt: float, params: ModelParams):
    """Analytic Jacobian of the residual as a sparse (N n) x (N n) matrix."""
    mesh = given.mesh
    _check_two_phase(mesh)
    c = np.asarray(c_trial, dtype=float).reshape(given.c.shape)
    N, n = c.shape
    dx = mesh.dx
    diag = np.zeros((N, n, n))
    lower = np.zeros((N - 1, n, n))
    upper = np.zeros((N - 1, n, n))

    sigma = 0.0
    if mesh.single_phase is None:
        sigma = float(interface_flux(c[mesh.solid_cell], c[mesh.gas_cell], params).F_tilde.sum())
    widths = _moved_widths(mesh, sigma, dt)
    diag += (widths / dt)[:, None, None] * np.eye(n)

    solid, gas = _edge_phases(mesh)
    for edges, flux_jac in ((solid, solid_flux_jacobian), (gas, gas_flux_jacobian)):
        if not edges.size:
            continue
        d_left, d_right = flux_jac(c[edges - 1], c[edges], params, dx)
        diag[edges - 1] += d_left
        upper[edges - 1] += d_right
        lower[edges - 1] -= d_left
        diag[edges] -= d_right

    if mesh.single_phase is None:
        ks, kg = mesh.solid_cell, mesh.gas_cell
        c_s, c_g = c[ks], c[kg]
        f_tilde = interface_flux(c_s, c_g, params).F_tilde
        dF_s, dF_g = interface_flux_jacobian(c_s, c_g, params)
        dsig_s = dF_s.sum(axis=0)
        dsig_g = dF_g.sum(axis=0)
        ones = np.ones(n)
        sum_s, sum_g = c_s.sum(), c_g.sum()
        diag[ks] += np.outer(c_s, dsig_s) - np.outer(f_tilde, ones) - sum_s * dF_s
        upper[ks] += np.outer(c_s, dsig_g) - sum_s * dF_g
        diag[kg] += -np.outer(c_g, dsig_g) + np.outer(f_tilde, ones) + sum_g * dF_g
        lower[ks] += -np.outer(c_g, dsig_s) + sum_g * dF_s

    return _block_tridiagonal(lower, diag, upper)


def finite_difference_jacobian(c_trial: np.ndarray, given: SimState, dt: float,
                               params: ModelParams, h: float = 1e-7) -> np.ndarray:
    """Dense central-difference Jacobian; for verification only."""
    c = np.asarray(c_trial, dtype=float).reshape(given.c.shape)
    size = c.size
    out = np.empty((size, size))
    flat = c.ravel()
    for j in range(size):
        plus = flat.copy()
        minus = flat.copy()
        plus[j] += h
        minus[j] -= h
        out[:, j] = (residual(plus.reshape(c.shape), given, dt, params)
                     - residual(minus.reshape(c.shape), given, dt, params)).ravel() / (2.0 * h)
    return out


def newton_solve(given: SimState, dt: float, params: ModelParams, config: StepperConfig) -> NewtonResult:
    """
    Solve the step with Newton's method from the previous concentrations.

    Stops when the sup norm of the update is below newton_tol. Raises NewtonError
    when the iteration does not converge, produces non-finite values or meets a
    singular system.
    """
    c = given.c.copy()
    mesh = given.mesh
    increment = np.inf
    iterations = 0
    res = residual(c, given, dt, params)
    if np.max(np.abs(res)) == 0.0:
        increment = 0.0
    else:
        for iterations in range(1, config.newton_max_iter + 1):
            jac = jacobian(c, given, dt, params)
            delta = spsolve(jac, res.ravel()).reshape(c.shape)
            if not np.all(np.isfinite(delta)):
                raise NewtonError("Newton update is not finite", iterations)
            c = c - delta
            increment = float(np.max(np.abs(delta)))
            logger.debug(f"newton iteration {iterations}: |dc|_inf = {increment:.3e}")
            if increment <= config.newton_tol:
                break
            res = residual(c, given, dt, params)
        else:
            raise NewtonError(f"Newton did not converge in {config.newton_max_iter} iterations "
                              f"(last |dc|_inf = {increment:.3e})", iterations)

    if np.min(c) <= 0.0:
        raise NewtonError(f"Newton root lost positivity (min c = {np.min(c):.3e})", iterations)

    X_new = mesh.X
    if mesh.single_phase is None:
        flux = butler_volmer_flux(c[mesh.solid_cell], c[mesh.gas_cell], params)
        X_new = mesh.X + dt * float(flux.sum())
    return NewtonResult(c_star=c, X_new=X_new, iterations=iterations, increment=increment)


def raw_scheme_residual_check(c_star: np.ndarray, given: SimState, dt: float, params: ModelParams) -> float:
    """
    Sup norm of the residual of the unmodified scheme at c_star.

    Uses the conservative interface flux -F on both sides and the interface
    moved by dt * sum F. Roots of the modified scheme are roots of this one.
    """
    mesh = given.mesh
    c = np.asarray(c_star, dtype=float)
    J = bulk_fluxes(c, mesh, params)
    sigma = 0.0
    if mesh.single_phase is None:
        ks, kg = mesh.solid_cell, mesh.gas_cell
        J[mesh.K_int] = raw_interface_flux(c[ks], c[kg], params)
        sigma = float(butler_volmer_flux(c[ks], c[kg], params).sum())
    widths = _moved_widths(mesh, sigma, dt)
    res = (widths[:, None] * c - mesh.widths[:, None] * given.c) / dt + J[1:] - J[:-1]
    return float(np.max(np.abs(res)))


def _attempt(state: SimState, dt: float, params: ModelParams, config: StepperConfig,
             halvings: int) -> SimState:
    mesh = state.mesh
    result = newton_solve(state, dt, params, config)
    if mesh.single_phase is None:
        if abs(result.X_new - mesh.X) > 0.5 * mesh.dx:
            raise CFLError(f"interface moved by {abs(result.X_new - mesh.X):.3e} in one step")
        mesh_star = MovingMesh.cut(result.X_new, mesh.K_int, mesh.N)
        c_new, mesh_new = post_process(result.c_star, result.X_new, mesh.K_int, mesh)
    else:
        mesh_star = mesh
        c_new, mesh_new = result.c_star.copy(), mesh
    trace = StepTrace(c_star=result.c_star, mesh_star=mesh_star, dt=dt,
                      newton_iters=result.iterations, halvings=halvings)
    return SimState(c=c_new, mesh=mesh_new, t=state.t + dt, trace=trace)


def _step_with_halving(state: SimState, dt: float, params: ModelParams,
                       config: StepperConfig) -> SimState:
    _check_two_phase(state.mesh)
    for halvings in range(config.max_halvings + 1):
        try:
            return _attempt(state, dt, params, config, halvings)
        except (NewtonError, CFLError, GeometryError) as e:
            logger.warning(f"step rejected at t={state.t:.6g} with dt={dt:.3e}: {e}; halving dt")
            dt *= 0.5
    raise SolverFailure(f"time step failed after {config.max_halvings} halvings at t={state.t:.6g}",
                        t=state.t, state=state)


def advance(state: SimState, config: StepperConfig, params: ModelParams) -> SimState:
    """One accepted step with dt = min(dt_init, CFL bound), halved on failure."""
    return _step_with_halving(state, stable_dt(config, params, state.mesh.N), params, config)


class TimeStepper:
    """
    Stateful step-size control for a run.

    The step is halved after a Newton failure and doubled again after
    growth_streak consecutive successes, never beyond the CFL-capped dt_init.
    """

    def __init__(self, params: ModelParams, config: StepperConfig, N: int):
        self.params = params
        self.config = config
        self.dt_cap = stable_dt(config, params, N)
        self.dt = self.dt_cap
        self.streak = 0
        if self.dt_cap < config.dt_init:
            logger.info(f"dt clamped by CFL from {config.dt_init:.3e} to {self.dt_cap:.3e}")

    def step(self, state: SimState, t_stop: Optional[float] = None) -> SimState:
        """Advance by one accepted step, landing exactly on t_stop when it is close."""
        dt = self.dt
        clipped = False
        if t_stop is not None and state.t + dt >= t_stop - 1e-12 * max(1.0, abs(t_stop)):
            dt = t_stop - state.t
            clipped = True
        new_state = _step_with_halving(state, dt, self.params, self.config)
        if clipped and new_state.trace.halvings == 0:
            new_state = SimState(new_state.c, new_state.mesh, t_stop, new_state.trace)
        if new_state.trace.halvings:
            self.dt = min(self.dt, new_state.trace.dt)
            self.streak = 0
            return new_state
        self.streak += 1
        if self.streak >= self.config.growth_streak and self.dt < self.dt_cap:
            self.dt = min(2.0 * self.dt, self.dt_cap)
            self.streak = 0
            logger.debug(f"dt grown to {self.dt:.3e}")
        return new_state


StepObserver = Callable[[SimState, SimState], None]


class Simulation:
    """
    Sequential driver over accepted steps.

    Steps land exactly on every requested stop time and on t_end. Each
    accepted pair (old, new) is handed to the observer; with keep_history the
    accepted states are also stored, without their step trace, for later
    comparison between grids.
    """

    def __init__(self, state: SimState, params: ModelParams, config: StepperConfig,
                 keep_history: bool = False):
        self.state = state
        self.params = params
        self.stepper = TimeStepper(params, config, state.mesh.N)
        self.keep_history = keep_history
        self.history: List[SimState] = [state] if keep_history else []
        self.steps = 0
        self.halved_steps = 0

    def run(self, t_end: float, stops: Iterable[float] = (),
            observer: Optional[StepObserver] = None) -> SimState:
        """Advance to t_end; returns the final state."""
        pending = sorted({float(t) for t in stops if self.state.t < t < t_end} | {float(t_end)})
        tol = 1e-12 * max(1.0, abs(t_end))
        for stop in pending:
            while self.state.t < stop - tol:
                old = self.state
                new = self.stepper.step(old, stop)
                self.steps += 1
                if new.trace.halvings:
                    self.halved_steps += 1
                if observer is not None:
                    observer(old, new)
                if self.keep_history:
                    self.history.append(SimState(new.c, new.mesh, new.t))
                self.state = new
        logger.info(f"reached t={self.state.t:.6g} after {self.steps} steps "
                    f"({self.halved_steps} with dt halving), X={self.state.X:.6f}")
        return self.state
