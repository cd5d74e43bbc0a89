"""
BIPHASE Moving Mesh
===================

Bookkeeping for the uniform grid with one interface living on a cell edge.

Cells are indexed 0..N-1 and edges 0..N; edge k sits at k/N. The interface
replaces edge K_int, so cell K_int-1 is the solid cut cell and cell K_int is
the gas cut cell. When the interface reaches a boundary the mesh is pinned
back to the uniform grid and only one phase remains.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from core.errors import CFLError, DomainError, GeometryError

logger = logging.getLogger(__name__)

GAUSS_POINTS = 5

_NODES, _WEIGHTS = np.polynomial.legendre.leggauss(GAUSS_POINTS)


def nearest_interface_index(X: float, N: int) -> int:
    """Lowest edge index K in 0..N minimising |K/N - X|."""
    if not 0.0 <= X <= 1.0:
        raise DomainError(f"interface position {X} outside [0, 1]")
    lower = min(int(np.floor(X * N)), N)
    best = lower
    best_dist = abs(lower / N - X)
    for k in (lower - 1, lower + 1):
        if 0 <= k <= N:
            dist = abs(k / N - X)
            if dist < best_dist or (dist == best_dist and k < best):
                best, best_dist = k, dist
    return best


def build_widths(X: float, K_int: int, N: int) -> np.ndarray:
    """Cell widths of the two-phase mesh: both cut cells are stretched or shrunk."""
    if not 1 <= K_int <= N - 1:
        raise GeometryError(f"interface edge {K_int} must lie in 1..{N - 1}")
    widths = np.full(N, 1.0 / N)
    widths[K_int - 1] = X - (K_int - 1) / N
    widths[K_int] = (K_int + 1) / N - X
    if widths[K_int - 1] <= 0.0 or widths[K_int] <= 0.0:
        raise GeometryError(
            f"nonpositive cut-cell width for X={X}, K_int={K_int}: "
            f"{widths[K_int - 1]}, {widths[K_int]}")
    return widths


@dataclass(frozen=True, eq=False)
class MovingMesh:
    """
    Snapshot of the mesh geometry.

    single_phase is None for a two-phase mesh, otherwise "s" (X pinned to 1) or
    "g" (X pinned to 0).
    """
    N: int
    X: float
    K_int: int
    widths: np.ndarray
    single_phase: Optional[str] = None

    @property
    def dx(self) -> float:
        return 1.0 / self.N

    @classmethod
    def from_interface(cls, X: float, N: int) -> "MovingMesh":
        """Mesh for interface position X, pinned when the interface edge reaches the boundary layer."""
        K = nearest_interface_index(X, N)
        if K <= 1:
            return cls.pinned(N, "g")
        if K >= N:
            return cls.pinned(N, "s")
        return cls(N=N, X=float(X), K_int=K, widths=build_widths(X, K, N))

    @classmethod
    def cut(cls, X: float, K_int: int, N: int) -> "MovingMesh":
        """Mesh with an explicit interface edge, used for the intermediate mesh of a step."""
        return cls(N=N, X=float(X), K_int=K_int, widths=build_widths(X, K_int, N))

    @classmethod
    def pinned(cls, N: int, phase: str) -> "MovingMesh":
        if phase not in ("s", "g"):
            raise DomainError(f"unknown phase {phase!r}")
        X, K = (1.0, N) if phase == "s" else (0.0, 0)
        return cls(N=N, X=X, K_int=K, widths=np.full(N, 1.0 / N), single_phase=phase)

    @property
    def solid_cell(self) -> int:
        return self.K_int - 1

    @property
    def gas_cell(self) -> int:
        return self.K_int

    @property
    def edges(self) -> np.ndarray:
        edges = np.arange(self.N + 1) / self.N
        if self.single_phase is None:
            edges[self.K_int] = self.X
        return edges

    @property
    def solid_mask(self) -> np.ndarray:
        """True for cells carrying the solid free energy."""
        return np.arange(self.N) < self.K_int

    def masses(self, c: np.ndarray) -> np.ndarray:
        return self.widths @ c


def discretize_initial(c0: Callable, mesh: MovingMesh) -> np.ndarray:
    """
    Cell means of an initial profile by 5-point Gauss-Legendre quadrature per cell.

    c0 maps an array of positions of shape (M,) to concentrations of shape (M, n).
    """
    edges = mesh.edges
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = mid[:, None] + half[:, None] * _NODES[None, :]
    values = np.asarray(c0(nodes.ravel()), dtype=float)
    values = values.reshape(mesh.N, GAUSS_POINTS, -1)
    return 0.5 * np.einsum("q,kqi->ki", _WEIGHTS, values)


class PiecewiseConstant:
    """Piecewise-constant interpolant of cell values on (0, 1)."""

    def __init__(self, edges: np.ndarray, values: np.ndarray):
        self.edges = np.asarray(edges, dtype=float)
        self.values = np.asarray(values, dtype=float)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any((x < 0.0) | (x > 1.0)):
            raise DomainError("interpolant is defined on [0, 1] only")
        idx = np.searchsorted(self.edges, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return self.values[idx]

    def integral(self) -> np.ndarray:
        return np.diff(self.edges) @ self.values

    def cumulative(self, x) -> np.ndarray:
        """Integral of the interpolant over (0, x), per species."""
        cum = np.vstack([np.zeros(self.values.shape[1]),
                         np.cumsum(np.diff(self.edges)[:, None] * self.values, axis=0)])
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.column_stack([np.interp(x, self.edges, cum[:, i]) for i in range(cum.shape[1])])

    def mean_over(self, target_edges) -> np.ndarray:
        """Mean values on the cells delimited by target_edges; total mass is preserved."""
        target_edges = np.asarray(target_edges, dtype=float)
        cum = self.cumulative(target_edges)
        return np.diff(cum, axis=0) / np.diff(target_edges)[:, None]


def interpolate(c: np.ndarray, mesh: MovingMesh) -> PiecewiseConstant:
    return PiecewiseConstant(mesh.edges, c)


def mean_projection(c: np.ndarray, source_edges: np.ndarray, target_edges: np.ndarray) -> np.ndarray:
    """Project cell values given on source_edges onto the cells of target_edges."""
    return PiecewiseConstant(source_edges, c).mean_over(target_edges)


def pin_single_phase(c_star: np.ndarray, intermediate: MovingMesh, phase: str) -> Tuple[np.ndarray, MovingMesh]:
    """Remap intermediate values onto the uniform grid once one phase has vanished."""
    pinned = MovingMesh.pinned(intermediate.N, phase)
    c_new = mean_projection(c_star, intermediate.edges, pinned.edges)
    logger.info(f"interface reached the boundary layer at X={intermediate.X:.6f}; "
                f"continuing with the {'solid' if phase == 's' else 'gas'} phase only")
    return c_new, pinned


def post_process(c_star: np.ndarray, X_new: float, K_old: int,
                 mesh_old: MovingMesh) -> Tuple[np.ndarray, MovingMesh]:
    """
    Move the mesh to the new interface position and update the cut-cell values.

    Crossing to the right copies the old solid cut value into the restored fixed
    cell and the new solid cut cell, and merges the remaining gas sliver with the
    next fixed cell. Crossing to the left is the mirror image. Reaching edge 1 or
    edge N pins the interface to 0 or 1.
    """
    if mesh_old.single_phase is not None:
        return c_star.copy(), mesh_old
    N = mesh_old.N
    dx = 1.0 / N
    if abs(X_new - mesh_old.X) > 0.5 * dx * (1.0 + 1e-12):
        raise CFLError(f"interface moved by {abs(X_new - mesh_old.X):.3e} > dx/2 = {0.5 * dx:.3e}")

    K_new = nearest_interface_index(X_new, N)
    if K_new <= 1 or K_new >= N:
        intermediate = MovingMesh.cut(X_new, K_old, N)
        return pin_single_phase(c_star, intermediate, "g" if K_new <= 1 else "s")

    c_new = c_star.copy()
    ks, kg = K_old - 1, K_old
    if K_new == K_old + 1:
        sliver = (K_old + 1) / N - X_new
        c_new[kg] = c_star[ks]
        c_new[kg + 1] = (sliver * c_star[kg] + dx * c_star[kg + 1]) / (sliver + dx)
        logger.debug(f"interface crossed edge {K_old} to the right, X={X_new:.6f}")
    elif K_new == K_old - 1:
        sliver = X_new - (K_old - 1) / N
        c_new[ks] = c_star[kg]
        c_new[ks - 1] = (sliver * c_star[ks] + dx * c_star[ks - 1]) / (sliver + dx)
        logger.debug(f"interface crossed edge {K_old} to the left, X={X_new:.6f}")
    elif K_new != K_old:
        raise CFLError(f"interface edge jumped from {K_old} to {K_new}")
    return c_new, MovingMesh.cut(X_new, K_new, N)
