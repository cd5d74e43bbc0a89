"""
BIPHASE Numerical Fluxes
========================

Two-point flux formulas of the finite-volume scheme and their derivatives.

Every function accepts a single edge (vectors of length n) or a stack of edges
(arrays of shape (E, n)); derivatives are returned per edge as n x n blocks.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from core.errors import SingularSystemError
from core.model import ModelParams, assemble_cross_matrix, modified_matrix

logger = logging.getLogger(__name__)

# below this |log(b/a)| the log-mean and its derivatives use Taylor series
_SERIES_CUTOFF = 1e-2


@dataclass
class EdgeState:
    """Cell values on both sides of an edge with their log-mean edge values."""
    left: np.ndarray
    right: np.ndarray
    edge_conc: np.ndarray

    @classmethod
    def from_cells(cls, left, right) -> "EdgeState":
        left = np.asarray(left, dtype=float)
        right = np.asarray(right, dtype=float)
        return cls(left, right, log_mean(left, right))


@dataclass
class InterfaceFlux:
    """Truncated Butler-Volmer flux and the two one-sided interface fluxes."""
    F_tilde: np.ndarray
    J_side_s: np.ndarray
    J_side_g: np.ndarray


def _log_ratio(a: np.ndarray, b: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    positive = (a > 0.0) & (b > 0.0)
    sa = np.where(positive, a, 1.0)
    sb = np.where(positive, b, 1.0)
    return positive, np.log(sb) - np.log(sa)


def _expm1_ratio(s: np.ndarray) -> np.ndarray:
    """g(s) = (e^s - 1) / s with g(0) = 1."""
    series = 1.0 + s / 2.0 + s**2 / 6.0 + s**3 / 24.0 + s**4 / 120.0
    ss = np.where(np.abs(s) < _SERIES_CUTOFF, 1.0, s)
    return np.where(np.abs(s) < _SERIES_CUTOFF, series, np.expm1(ss) / ss)


def _expm1_ratio_prime(s: np.ndarray) -> np.ndarray:
    series = 0.5 + s / 3.0 + s**2 / 8.0 + s**3 / 30.0 + s**4 / 144.0
    ss = np.where(np.abs(s) < _SERIES_CUTOFF, 1.0, s)
    direct = (np.exp(ss) * (ss - 1.0) + 1.0) / ss**2
    return np.where(np.abs(s) < _SERIES_CUTOFF, series, direct)


def log_mean(a, b):
    """
    Logarithmic mean (a - b) / (log a - log b).

    Zero as soon as one argument is nonpositive, a when a == b. The value is
    computed as a * g(log(b / a)) with g(s) = expm1(s) / s, which stays accurate
    when a and b are close.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    positive, s = _log_ratio(a, b)
    out = np.where(positive, np.where(positive, a, 0.0) * _expm1_ratio(s), 0.0)
    return out if out.ndim else float(out)


def log_mean_derivatives(a, b) -> Tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the log-mean; both vanish where it is clamped to zero."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    positive, s = _log_ratio(a, b)
    g = _expm1_ratio(s)
    gp = _expm1_ratio_prime(s)
    d_a = np.where(positive, g - gp, 0.0)
    d_b = np.where(positive, gp * np.exp(-s), 0.0)
    return d_a, d_b


def diamond(x) -> np.ndarray:
    """Truncation x_i -> x_i^+ / max(1, sum_j x_j^+) along the last axis."""
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    total = np.maximum(1.0, xp.sum(axis=-1, keepdims=True))
    return xp / total


def diamond_jacobian(x) -> np.ndarray:
    """Jacobian of the truncation map, shape (..., n, n)."""
    x = np.asarray(x, dtype=float)
    xp = np.maximum(x, 0.0)
    heaviside = (x > 0.0).astype(float)
    total = xp.sum(axis=-1, keepdims=True)
    n = x.shape[-1]
    eye = np.eye(n)
    below = eye * heaviside[..., None, :]
    scale = np.maximum(total, 1.0)[..., None]
    above = eye * heaviside[..., None, :] / scale - (xp[..., :, None] * heaviside[..., None, :]) / scale**2
    return np.where((total <= 1.0)[..., None], below, above)


def cross_matrix_derivative(v, kappa_bar: np.ndarray) -> np.ndarray:
    """
    Derivative of u -> A_bar(u) v with respect to u.

    Entry (i, k) is kappa_bar_ik v_i for k != i and -sum_j kappa_bar_ij v_j on the diagonal.
    """
    v = np.asarray(v, dtype=float)
    mat = v[..., :, None] * kappa_bar
    idx = np.arange(kappa_bar.shape[0])
    mat[..., idx, idx] = -(v @ kappa_bar.T)
    return mat


def solid_flux(left, right, params: ModelParams, dx: float) -> np.ndarray:
    """
    Size-exclusion flux: dx J = -(kappa* I + A_bar_s(c_edge)) (right - left).
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    edge = log_mean(left, right)
    mat = modified_matrix(edge, "s", params)
    return -np.einsum("...ij,...j->...i", mat, right - left) / dx


def _solve_gas(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    try:
        sol = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"Stefan-Maxwell edge system is singular: {e}") from e
    if not np.all(np.isfinite(sol)):
        raise SingularSystemError("Stefan-Maxwell edge system produced non-finite fluxes")
    return sol


def gas_flux(left, right, params: ModelParams, dx: float) -> np.ndarray:
    """
    Stefan-Maxwell flux defined implicitly by dx (kappa* I + A_bar_g(c_edge)) J = -(right - left).
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    edge = log_mean(left, right)
    mat = modified_matrix(edge, "g", params)
    rhs = -(right - left) / dx
    return _solve_gas(mat, rhs[..., None])[..., 0]


def interface_flux(left, right, params: ModelParams) -> InterfaceFlux:
    """
    Truncated interface flux between the solid cut cell (left) and the gas cut cell (right).

    The one-sided fluxes carry the local volume sums, so that summing the
    conservation laws over species makes the interface terms vanish.
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    sb = params.sqrt_beta
    f_tilde = sb * diamond(right) - diamond(left) / sb
    j_s = -left.sum(axis=-1, keepdims=True) * f_tilde
    j_g = -right.sum(axis=-1, keepdims=True) * f_tilde
    return InterfaceFlux(F_tilde=f_tilde, J_side_s=j_s, J_side_g=j_g)


def raw_interface_flux(left, right, params: ModelParams) -> np.ndarray:
    """Conservative interface flux -F of the unmodified scheme."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    sb = params.sqrt_beta
    return -(sb * right - left / sb)


def solid_flux_jacobian(left, right, params: ModelParams, dx: float) -> Tuple[np.ndarray, np.ndarray]:
    """Blocks dJ/d(left) and dJ/d(right) of the solid flux."""
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    edge = log_mean(left, right)
    d_a, d_b = log_mean_derivatives(left, right)
    mat = modified_matrix(edge, "s", params)
    dmat = cross_matrix_derivative(right - left, params.kappa_bar_s)
    d_left = -(-mat + dmat * d_a[..., None, :]) / dx
    d_right = -(mat + dmat * d_b[..., None, :]) / dx
    return d_left, d_right


def gas_flux_jacobian(left, right, params: ModelParams, dx: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Blocks dJ/d(left) and dJ/d(right) of the gas flux.

    Differentiating the edge system gives M dJ = -(dDc / dx + B(J) du).
    """
    left = np.asarray(left, dtype=float)
    right = np.asarray(right, dtype=float)
    edge = log_mean(left, right)
    d_a, d_b = log_mean_derivatives(left, right)
    mat = modified_matrix(edge, "g", params)
    flux = _solve_gas(mat, (-(right - left) / dx)[..., None])[..., 0]
    dmat = cross_matrix_derivative(flux, params.kappa_bar_g)
    eye = np.eye(params.n) / dx
    d_left = -_solve_gas(mat, -eye + dmat * d_a[..., None, :])
    d_right = -_solve_gas(mat, eye + dmat * d_b[..., None, :])
    return d_left, d_right


def interface_flux_jacobian(left, right, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Blocks dF_tilde/d(left) and dF_tilde/d(right)."""
    sb = params.sqrt_beta
    d_left = -diamond_jacobian(left) / sb[:, None]
    d_right = diamond_jacobian(right) * sb[:, None]
    return d_left, d_right
