"""
BIPHASE Stationary States
=========================

Classification and computation of the stationary states of the coupled model.

A stationary state has constant compositions in each phase, conserves the
initial masses and, when both phases are present, carries no interface flux.
Two-phase states exist exactly when both sum(m0 * beta) and sum(m0 / beta)
exceed one; the interface position is then the unique root in (0, 1) of

    phi(X) = sum_i m0_i / (beta_i X + 1 - X) - 1.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional

import numpy as np
from scipy.optimize import root_scalar

from core.errors import DomainError, StationaryError
from core.mesh import MovingMesh

logger = logging.getLogger(__name__)

BRACKET_EPS = 1e-12
ROOT_TOL = 1e-14


class StationaryKind(str, Enum):
    PURE_SOLID = "pure_solid"
    PURE_GAS = "pure_gas"
    TWO_PHASE = "two_phase"
    INDISTINGUISHABLE_FAMILY = "indistinguishable_family"


@dataclass(frozen=True, eq=False)
class StationaryState:
    """Stationary triple; X_bar is None for the indistinguishable family."""
    kind: StationaryKind
    c_bar_s: np.ndarray
    c_bar_g: np.ndarray
    X_bar: Optional[float]

    @property
    def is_family(self) -> bool:
        return self.kind == StationaryKind.INDISTINGUISHABLE_FAMILY


@dataclass
class StationaryResult:
    """
    Outcome of the stationary analysis.

    kind is "two_phase", "indistinguishable_family" or "pure_only".
    """
    kind: str
    states: List[StationaryState] = field(default_factory=list)
    condition: bool = False

    @property
    def two_phase(self) -> Optional[StationaryState]:
        for state in self.states:
            if state.kind == StationaryKind.TWO_PHASE:
                return state
        return None


def initial_mass(c0: np.ndarray, mesh: MovingMesh) -> np.ndarray:
    """Total mass per species, sum_K width_K c_K."""
    if np.any(mesh.widths <= 0.0):
        raise DomainError("mesh widths must be positive")
    return mesh.widths @ np.asarray(c0, dtype=float)


def _check_masses(m0) -> np.ndarray:
    m0 = np.asarray(m0, dtype=float)
    if np.any(m0 <= 0.0):
        raise DomainError(f"initial masses must be positive, got {m0}")
    return m0


def two_phase_condition(m0, beta) -> bool:
    m0 = _check_masses(m0)
    beta = np.asarray(beta, dtype=float)
    return bool(min(np.sum(m0 * beta), np.sum(m0 / beta)) > 1.0)


def _denominator(X, beta: np.ndarray) -> np.ndarray:
    if np.any(np.asarray(X) < 0.0) or np.any(np.asarray(X) > 1.0):
        raise DomainError(f"X={X} outside [0, 1]")
    den = beta * X + 1.0 - X
    if np.any(den <= 0.0):
        raise DomainError("nonpositive denominator in phi")
    return den


def phi_of_X(X: float, m0, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    return float(np.sum(np.asarray(m0, dtype=float) / _denominator(X, beta)) - 1.0)


def phi_prime_of_X(X: float, m0, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    den = _denominator(X, beta)
    return float(-np.sum((beta - 1.0) * np.asarray(m0, dtype=float) / den**2))


def phi_second_derivative(X: float, m0, beta) -> float:
    beta = np.asarray(beta, dtype=float)
    den = _denominator(X, beta)
    return float(2.0 * np.sum((beta - 1.0) ** 2 * np.asarray(m0, dtype=float) / den**3))


def _pure_states(m0: np.ndarray) -> List[StationaryState]:
    zero = np.zeros_like(m0)
    return [StationaryState(StationaryKind.PURE_SOLID, m0.copy(), zero.copy(), 1.0),
            StationaryState(StationaryKind.PURE_GAS, zero.copy(), m0.copy(), 0.0)]


def solve_stationary(m0, beta) -> StationaryResult:
    """
    Stationary states for masses m0 and exchange constants beta.

    beta == 1 gives the indistinguishable family; otherwise the two-phase state
    is computed when it exists, and the pure states are always listed.
    """
    m0 = _check_masses(m0)
    beta = np.asarray(beta, dtype=float)

    if np.all(beta == 1.0):
        family = StationaryState(StationaryKind.INDISTINGUISHABLE_FAMILY, m0.copy(), m0.copy(), None)
        return StationaryResult("indistinguishable_family", [family], condition=False)

    condition = two_phase_condition(m0, beta)
    if not condition:
        logger.info("two-phase condition fails: only the pure stationary states exist")
        return StationaryResult("pure_only", _pure_states(m0), condition=False)

    X_bar = _solve_interface(m0, beta)
    c_g = m0 / (beta * X_bar + 1.0 - X_bar)
    c_s = beta * c_g
    state = StationaryState(StationaryKind.TWO_PHASE, c_s, c_g, X_bar)
    logger.info(f"two-phase stationary state at X_bar={X_bar:.15g}")
    return StationaryResult("two_phase", [state] + _pure_states(m0), condition=True)


def _solve_interface(m0: np.ndarray, beta: np.ndarray) -> float:
    lo, hi = BRACKET_EPS, 1.0 - BRACKET_EPS
    try:
        sol = root_scalar(phi_of_X, args=(m0, beta), bracket=(lo, hi), method="brentq",
                          xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
    except ValueError as e:
        raise StationaryError(f"phi has no sign change on [{lo}, {hi}]: {e}") from e
    if not sol.converged:
        raise StationaryError(f"root solve for the interface did not converge: {sol.flag}")

    X = sol.root
    for _ in range(3):
        value = phi_of_X(X, m0, beta)
        if abs(value) <= ROOT_TOL:
            break
        candidate = X - value / phi_prime_of_X(X, m0, beta)
        if not lo <= candidate <= hi:
            break
        X = candidate

    residual = phi_of_X(X, m0, beta)
    if abs(residual) > 1e-12:
        raise StationaryError(f"interface root has residual {residual:.3e}")
    if abs(residual) > ROOT_TOL:
        logger.warning(f"interface root residual {residual:.3e} above {ROOT_TOL}")
    return float(X)


def is_stationary(c_s, c_g, X: float, m0, beta, tol: float = 1e-12) -> bool:
    """Check mass consistency, the pure-phase convention and zero interface flux."""
    c_s = np.asarray(c_s, dtype=float)
    c_g = np.asarray(c_g, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if not np.allclose(X * c_s + (1.0 - X) * c_g, m0, rtol=0.0, atol=tol):
        return False
    if X == 1.0:
        return bool(np.all(c_g == 0.0))
    if X == 0.0:
        return bool(np.all(c_s == 0.0))
    flux = np.sqrt(beta) * c_g - c_s / np.sqrt(beta)
    return bool(np.all(np.abs(flux) <= tol))


def stationary_profile(state: StationaryState, N: int) -> tuple:
    """
    Project a two-phase stationary state onto the moving mesh with interface at X_bar.

    Returns (c, mesh) with c_bar_s in cells left of the interface and c_bar_g on the right.
    """
    if state.kind != StationaryKind.TWO_PHASE:
        raise DomainError(f"only two-phase states have a mesh profile, got {state.kind.value}")
    mesh = MovingMesh.from_interface(state.X_bar, N)
    c = np.where(mesh.solid_mask[:, None], state.c_bar_s[None, :], state.c_bar_g[None, :])
    return c, mesh
