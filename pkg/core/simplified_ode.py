"""
BIPHASE Space-Homogeneous Model
===============================

Reduced dynamics where both phases are well mixed: the unknowns are the solid
masses m_i, the interface sits at X = sum_i m_i and the masses evolve by the
Butler-Volmer fluxes between the compositions m / X and (m0 - m) / (1 - X).

Features:
- Right-hand side and reduced free energy with its gradient
- Per-species Hessians and the closed-form determinant
- Fixed-step RK4 integration with phase-extinction detection
- Dissipation identity residual along trajectories
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from core.errors import DomainError
from core.model import (ModelParams, butler_volmer_flux, chemical_potential,
                        free_energy_density, interface_dissipation_terms)

logger = logging.getLogger(__name__)

EXTINCTION_EPS = 1e-10
DEFAULT_DT = 1e-3


@dataclass(frozen=True, eq=False)
class MassState:
    """Solid masses together with the total masses; X is their sum."""
    m_s: np.ndarray
    m0: np.ndarray

    @classmethod
    def of(cls, m_s, m0) -> "MassState":
        return cls(np.array(m_s, dtype=float), np.array(m0, dtype=float))

    @property
    def X(self) -> float:
        return float(self.m_s.sum())

    @property
    def c_s(self) -> np.ndarray:
        return self.m_s / self.X

    @property
    def c_g(self) -> np.ndarray:
        return (self.m0 - self.m_s) / (1.0 - self.X)

    def is_interior(self, eps: float = EXTINCTION_EPS) -> bool:
        X = self.X
        return bool(eps <= X <= 1.0 - eps and np.all(self.m_s > 0.0) and np.all(self.m_s < self.m0))


def _check_box(m_s: np.ndarray, X: float, m0: np.ndarray) -> None:
    if not 0.0 < X < 1.0:
        raise DomainError(f"X={X} outside (0, 1)")
    if np.any(m_s <= 0.0) or np.any(m_s >= m0):
        raise DomainError("solid masses must lie strictly between 0 and the total masses")


def mass_state_from_stationary(c_bar_s, X_bar: float, m0) -> MassState:
    """Mass variables of a two-phase stationary state."""
    return MassState.of(X_bar * np.asarray(c_bar_s, dtype=float), m0)


def ode_rhs(state: MassState, params: ModelParams) -> np.ndarray:
    """dm_s/dt = F(c_s, c_g); the sum of the components is dX/dt."""
    _check_box(state.m_s, state.X, state.m0)
    return butler_volmer_flux(state.c_s, state.c_g, params)


def reduced_free_energy(m_s, X: float, m0, params: ModelParams) -> float:
    """X h_s(m / X) + (1 - X) h_g((m0 - m) / (1 - X)) on the open box."""
    m_s = np.asarray(m_s, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    _check_box(m_s, X, m0)
    c_s = m_s / X
    c_g = (m0 - m_s) / (1.0 - X)
    return float(X * free_energy_density(c_s, "s", params)
                 + (1.0 - X) * free_energy_density(c_g, "g", params))


def reduced_free_energy_gradient(m_s, X: float, m0, params: ModelParams) -> Tuple[np.ndarray, float]:
    """
    Gradient with respect to (m, X).

    The mass part is mu_s - mu_g; the X part is the pressure difference, which
    vanishes on the constraint sum(m) = X.
    """
    m_s = np.asarray(m_s, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    _check_box(m_s, X, m0)
    c_s = m_s / X
    c_g = (m0 - m_s) / (1.0 - X)
    grad_m = chemical_potential(c_s, "s", params) - chemical_potential(c_g, "g", params)
    grad_X = float(c_g.sum() - c_s.sum())
    return grad_m, grad_X


def hessian_psi(m_i: float, X: float, m_i0: float, params: ModelParams, i: int) -> Tuple[np.ndarray, float]:
    """
    Hessian of the species-i contribution to the reduced free energy in (m_i, X).

    Returns the 2x2 matrix and its determinant. The reference potentials enter
    linearly and drop out.
    """
    if not 0.0 < X < 1.0 or not 0.0 < m_i < m_i0:
        raise DomainError(f"hessian needs an interior point, got m={m_i}, X={X}")
    if not 0 <= i < params.n:
        raise DomainError(f"species index {i} out of range")
    m_g = m_i0 - m_i
    d_mm = 1.0 / m_i + 1.0 / m_g
    d_xx = m_i / X**2 + m_g / (1.0 - X) ** 2
    d_mx = -1.0 / X - 1.0 / (1.0 - X)
    hess = np.array([[d_mm, d_mx], [d_mx, d_xx]])
    return hess, float(d_mm * d_xx - d_mx**2)


def hessian_determinant_closed_form(m_i: float, X: float, m_i0: float) -> float:
    """(c_s - c_g)^2 / (X (1 - X) c_s c_g)."""
    c_s = m_i / X
    c_g = (m_i0 - m_i) / (1.0 - X)
    return float((c_s - c_g) ** 2 / (X * (1.0 - X) * c_s * c_g))


def is_strict_local_minimum(state: MassState, params: ModelParams) -> bool:
    """
    Stability test at a critical point: every species Hessian is positive
    semidefinite and at least one has a positive determinant.
    """
    dets = []
    for i in range(params.n):
        hess, det = hessian_psi(state.m_s[i], state.X, state.m0[i], params, i)
        if np.trace(hess) <= 0.0 or det < -1e-12 * np.trace(hess) ** 2:
            return False
        dets.append(det)
    return bool(max(dets) > 0.0)


@dataclass
class PhaseExtinction:
    """
    Exit of the state from the admissible box.

    phase is the side that runs empty. species is None when the whole phase
    vanishes (X reaches 0 or 1) and the 0-based index of the exhausted species
    when only that species' mass in the phase reaches zero.
    """
    t: float
    phase: str
    species: Optional[int] = None

    def describe(self) -> str:
        name = "solid" if self.phase == "s" else "gas"
        if self.species is None:
            return f"{name} phase vanished"
        return f"species {self.species + 1} exhausted in the {name} phase"


@dataclass
class Trajectory:
    """Sampled solution of the reduced dynamics."""
    t: np.ndarray
    m_s: np.ndarray
    m0: np.ndarray
    energy: np.ndarray
    extinction: Optional[PhaseExtinction] = None

    @property
    def X(self) -> np.ndarray:
        return self.m_s.sum(axis=1)

    def state(self, k: int) -> MassState:
        return MassState(self.m_s[k].copy(), self.m0)


def classify_exit(t: float, m_s: np.ndarray, m0: np.ndarray) -> PhaseExtinction:
    """Name the boundary of the admissible box that a state has reached or crossed."""
    X = m_s.sum()
    if X < EXTINCTION_EPS:
        return PhaseExtinction(t, "s")
    if X > 1.0 - EXTINCTION_EPS:
        return PhaseExtinction(t, "g")
    # smallest remaining species mass on either side
    margins = np.concatenate([m_s, m0 - m_s])
    k = int(np.argmin(margins))
    n = len(m_s)
    return PhaseExtinction(t, "s" if k < n else "g", species=k % n)


def integrate(state0: MassState, t_end: float, dt: float, params: ModelParams) -> Trajectory:
    """
    Classic fourth-order Runge-Kutta integration with a fixed step.

    Integration stops early when the state leaves the admissible box; the
    trajectory then records which phase vanished and when.
    """
    if not state0.is_interior():
        raise DomainError("initial mass state must be interior")
    if dt <= 0.0 or t_end < 0.0:
        raise DomainError("dt must be positive and t_end nonnegative")

    m0 = state0.m0
    times: List[float] = [0.0]
    masses: List[np.ndarray] = [state0.m_s.copy()]
    energies: List[float] = [reduced_free_energy(state0.m_s, state0.X, m0, params)]
    extinction = None

    def rhs(m: np.ndarray) -> np.ndarray:
        return ode_rhs(MassState(m, m0), params)

    t = 0.0
    m = state0.m_s.copy()
    steps = int(np.ceil(t_end / dt - 1e-12))
    for _ in range(steps):
        h = min(dt, t_end - t)
        if h <= 0.0:
            break
        try:
            k1 = rhs(m)
            k2 = rhs(m + 0.5 * h * k1)
            k3 = rhs(m + 0.5 * h * k2)
            k4 = rhs(m + h * k3)
        except DomainError:
            euler = m + h * rhs(m)
            extinction = classify_exit(t + h, euler, m0)
            break
        m_next = m + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not MassState(m_next, m0).is_interior():
            extinction = classify_exit(t + h, m_next, m0)
            break
        t += h
        m = m_next
        times.append(t)
        masses.append(m.copy())
        energies.append(reduced_free_energy(m, m.sum(), m0, params))

    if extinction is not None:
        logger.info(f"{extinction.describe()} at t={extinction.t:.6g}")
    return Trajectory(t=np.array(times), m_s=np.array(masses), m0=m0,
                      energy=np.array(energies), extinction=extinction)


def dissipation_identity_residuals(trajectory: Trajectory, params: ModelParams) -> np.ndarray:
    """
    Relative residuals of dH/dt + interface dissipation = 0 at interior samples.

    dH/dt is estimated by fourth-order central differences, so a uniform time
    grid with at least five samples is required.
    """
    t = trajectory.t
    H = trajectory.energy
    if len(t) < 5:
        return np.zeros(0)
    dt = t[1] - t[0]
    steps = np.diff(t)
    irregular = np.flatnonzero(~np.isclose(steps, dt, rtol=1e-9, atol=0.0))
    if irregular.size:
        t = t[:irregular[0] + 1]
        H = H[:irregular[0] + 1]
        if len(t) < 5:
            return np.zeros(0)
    dHdt = (-H[4:] + 8.0 * H[3:-1] - 8.0 * H[1:-3] + H[:-4]) / (12.0 * dt)
    out = np.empty(len(dHdt))
    for j, k in enumerate(range(2, len(t) - 2)):
        state = trajectory.state(k)
        _, strong = interface_dissipation_terms(state.c_s, state.c_g, params)
        out[j] = abs(dHdt[j] + strong.sum()) / (1.0 + abs(dHdt[j]))
    return out
