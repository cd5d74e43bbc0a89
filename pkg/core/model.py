"""
BIPHASE Model Core
==================

Model parameters and thermodynamics of the two-phase cross-diffusion system.

Features:
- Parameter set with derived exchange constants and modified coefficient matrices
- Free energy densities, chemical potentials and pressure per phase
- Butler-Volmer interface flux and its sinh form
- Dissipation potential pair and the interface dissipation terms
- Size-exclusion and Stefan-Maxwell matrix assembly, modified mobilities
"""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.special import xlogy

from core.errors import DomainError, SingularSystemError

logger = logging.getLogger(__name__)

PHASES = ("s", "g")

# |z| beyond which the dual potential switches to its overflow-safe form
_DUAL_LARGE = 1e8


@dataclass(frozen=True, eq=False)
class ModelParams:
    """
    Parameters of the coupled model.

    kappa_s holds the size-exclusion coefficients of the solid phase, kappa_g the
    inverse Stefan-Maxwell coefficients of the gas phase.
    """
    n: int
    kappa_s: np.ndarray
    kappa_g: np.ndarray
    mu_star_s: np.ndarray
    mu_star_g: np.ndarray
    beta_star: np.ndarray = field(repr=False)
    kappa_min_s: float = field(repr=False)
    kappa_min_g: float = field(repr=False)
    kappa_bar_s: np.ndarray = field(repr=False)
    kappa_bar_g: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, kappa_s: Sequence, kappa_g: Sequence,
              mu_star_s: Optional[Sequence] = None, mu_star_g: Optional[Sequence] = None,
              beta_star: Optional[Sequence] = None) -> "ModelParams":
        """
        Build and validate a parameter set.

        Either both reference potential vectors or beta_star must be given. With
        beta_star only, the solid reference potentials are zero and the gas ones
        are log(beta_star).
        """
        kappa_s = np.array(kappa_s, dtype=float)
        kappa_g = np.array(kappa_g, dtype=float)
        if kappa_s.ndim != 2 or kappa_s.shape[0] != kappa_s.shape[1]:
            raise DomainError(f"kappa_s must be a square matrix, got shape {kappa_s.shape}")
        n = kappa_s.shape[0]
        if kappa_g.shape != (n, n):
            raise DomainError(f"kappa_g must have shape {(n, n)}, got {kappa_g.shape}")
        if n < 2:
            raise DomainError("at least two species are required")

        if beta_star is not None and mu_star_s is None and mu_star_g is None:
            beta = np.array(beta_star, dtype=float)
            if beta.shape != (n,) or np.any(beta <= 0.0):
                raise DomainError(f"beta_star must be {n} positive numbers, got {beta_star}")
            mu_s = np.zeros(n)
            mu_g = np.log(beta)
        else:
            if mu_star_s is None or mu_star_g is None:
                raise DomainError("both mu_star_s and mu_star_g are required")
            mu_s = np.array(mu_star_s, dtype=float)
            mu_g = np.array(mu_star_g, dtype=float)
            if mu_s.shape != (n,) or mu_g.shape != (n,):
                raise DomainError(f"reference potentials must have length {n}")
            beta = np.exp(mu_g - mu_s)
            if beta_star is not None:
                given = np.array(beta_star, dtype=float)
                if not np.allclose(given, beta, rtol=1e-14, atol=0.0):
                    raise DomainError("beta_star is inconsistent with mu_star_g - mu_star_s")
                beta = given

        off = ~np.eye(n, dtype=bool)
        kmin_s = float(kappa_s[off].min())
        kmin_g = float(kappa_g[off].min())
        kbar_s = np.where(off, kappa_s - kmin_s, 0.0)
        kbar_g = np.where(off, kappa_g - kmin_g, 0.0)

        params = cls(n=n, kappa_s=kappa_s, kappa_g=kappa_g, mu_star_s=mu_s, mu_star_g=mu_g,
                     beta_star=beta, kappa_min_s=kmin_s, kappa_min_g=kmin_g,
                     kappa_bar_s=kbar_s, kappa_bar_g=kbar_g)
        params.validate()
        return params

    def validate(self) -> None:
        """Check the structural invariants of the parameter set."""
        off = ~np.eye(self.n, dtype=bool)
        for name, kappa in (("kappa_s", self.kappa_s), ("kappa_g", self.kappa_g)):
            if not np.allclose(kappa, kappa.T, rtol=0.0, atol=0.0):
                raise DomainError(f"{name} must be symmetric")
            if np.any(np.diag(kappa) != 0.0):
                raise DomainError(f"{name} must have a zero diagonal")
            if np.any(kappa[off] <= 0.0):
                raise DomainError(f"{name} must have strictly positive off-diagonal entries")
        for name, kbar in (("kappa_bar_s", self.kappa_bar_s), ("kappa_bar_g", self.kappa_bar_g)):
            if np.any(kbar < 0.0) or not np.any(kbar[off] == 0.0):
                raise DomainError(f"{name} must be nonnegative with a vanishing off-diagonal entry")
        if np.any(self.beta_star <= 0.0):
            raise DomainError("beta_star must be positive")
        expected = np.exp(self.mu_star_g - self.mu_star_s)
        if not np.allclose(self.beta_star, expected, rtol=1e-14, atol=0.0):
            raise DomainError("beta_star is inconsistent with the reference potentials")

    def mu_star(self, phase: str) -> np.ndarray:
        return self.mu_star_s if _check_phase(phase) == "s" else self.mu_star_g

    @property
    def sqrt_beta(self) -> np.ndarray:
        return np.sqrt(self.beta_star)

    @property
    def trivial_exchange(self) -> bool:
        """True when both phases share their reference potentials."""
        return bool(np.all(self.beta_star == 1.0))


@dataclass(frozen=True, eq=False)
class Composition:
    """Molar concentrations attached to one cell."""
    c: np.ndarray

    @classmethod
    def of(cls, values: Sequence) -> "Composition":
        c = np.array(values, dtype=float)
        if c.ndim != 1:
            raise DomainError("a composition is a vector")
        return cls(c)

    @property
    def n(self) -> int:
        return self.c.shape[0]

    def is_admissible(self, tol: float = 1e-12) -> bool:
        """Membership in the volume-filling set: nonnegative entries summing to one."""
        return bool(np.all(self.c >= 0.0) and abs(self.c.sum() - 1.0) <= tol)


def _check_phase(phase: str) -> str:
    if phase not in PHASES:
        raise DomainError(f"phase must be one of {PHASES}, got {phase!r}")
    return phase


def _as_array(c) -> np.ndarray:
    if isinstance(c, Composition):
        return c.c
    return np.asarray(c, dtype=float)


def free_energy_density(c, phase: str, params: ModelParams) -> np.ndarray:
    """
    Free energy density h_phase(c) = sum_i c_i (log c_i + mu*_i) - c_i + 1.

    Works on a single composition or on a stack of them (last axis = species).
    """
    c = _as_array(c)
    if np.any(c < 0.0):
        raise DomainError("free energy density needs nonnegative concentrations")
    mu = params.mu_star(phase)
    return np.sum(xlogy(c, c) + c * mu - c + 1.0, axis=-1)


def free_energy_gradient(c, phase: str, params: ModelParams) -> np.ndarray:
    return chemical_potential(c, phase, params)


def chemical_potential(c, phase: str, params: ModelParams) -> np.ndarray:
    """mu_i = log c_i + mu*_i, defined for positive concentrations only."""
    c = _as_array(c)
    if np.any(c <= 0.0):
        raise DomainError("chemical potential needs strictly positive concentrations")
    return np.log(c) + params.mu_star(phase)


def pressure(c, phase: str, params: ModelParams) -> np.ndarray:
    c = _as_array(c)
    mu = chemical_potential(c, phase, params)
    return np.sum(c * mu, axis=-1) - free_energy_density(c, phase, params)


def jump_chemical_potential(c_s, c_g, params: ModelParams) -> np.ndarray:
    """Interface jump of the chemical potentials, gas side minus solid side."""
    return chemical_potential(c_g, "g", params) - chemical_potential(c_s, "s", params)


def butler_volmer_flux(c_s, c_g, params: ModelParams) -> np.ndarray:
    """F_i = sqrt(beta_i) c_i^g - c_i^s / sqrt(beta_i), positive from gas to solid."""
    c_s = _as_array(c_s)
    c_g = _as_array(c_g)
    sb = params.sqrt_beta
    return sb * c_g - c_s / sb


def butler_volmer_flux_sinh(c_s, c_g, params: ModelParams) -> np.ndarray:
    """Equivalent form 2 sqrt(c_s c_g) sinh(jump/2) for positive concentrations."""
    c_s = _as_array(c_s)
    c_g = _as_array(c_g)
    jump = jump_chemical_potential(c_s, c_g, params)
    return 2.0 * np.sqrt(c_s * c_g) * np.sinh(0.5 * jump)


def dissipation_potential(x):
    """phi(x) = 4 (cosh(x/2) - 1)."""
    return 4.0 * (np.cosh(0.5 * np.asarray(x, dtype=float)) - 1.0)


def dissipation_potential_derivative(x):
    return 2.0 * np.sinh(0.5 * np.asarray(x, dtype=float))


def dual_dissipation_potential(z):
    """
    Convex conjugate phi*(z) = 2 z log((z + sqrt(z^2 + 4)) / 2) - 2 sqrt(z^2 + 4) + 4.

    Evaluated through asinh; for very large |z| the square root is factored to
    avoid overflow.
    """
    z = np.asarray(z, dtype=float)
    az = np.abs(z)
    small = az <= _DUAL_LARGE
    zs = np.where(small, z, 0.0)
    regular = 2.0 * zs * np.arcsinh(0.5 * zs) - 2.0 * np.hypot(zs, 2.0) + 4.0
    zl = np.where(small, 1.0, az)
    # asinh(z/2) ~ log|z| + 4/(4 z^2), sqrt(z^2+4) ~ |z| (1 + 2/z^2)
    large = 2.0 * zl * (np.log(zl) + 1.0 / zl**2) - 2.0 * zl - 4.0 / zl + 4.0
    out = np.where(small, regular, large)
    return out if out.ndim else float(out)


def interface_dissipation_terms(c_s, c_g, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """
    Per-species interface dissipation in linear and in strong form.

    Returns (F_i * jump_i, sqrt(c_s c_g) (phi(jump_i) + phi*(F_i / sqrt(c_s c_g)))).
    Both coincide by the Fenchel-Young equality.
    """
    c_s = _as_array(c_s)
    c_g = _as_array(c_g)
    flux = butler_volmer_flux(c_s, c_g, params)
    jump = jump_chemical_potential(c_s, c_g, params)
    geo = np.sqrt(c_s * c_g)
    strong = geo * (dissipation_potential(jump) + dual_dissipation_potential(flux / geo))
    return flux * jump, strong


def weak_dissipation_rate(c_s, c_g, params: ModelParams) -> float:
    """Lower bound sum_i phi*(F_i) of the interface dissipation."""
    flux = butler_volmer_flux(c_s, c_g, params)
    return float(np.sum(dual_dissipation_potential(flux)))


def interface_flux_bound(params: ModelParams) -> np.ndarray:
    """Uniform bound 2 cosh(log(beta_i) / 2) of |F_i| for inputs in [0, 1]^n."""
    return 2.0 * np.cosh(0.5 * np.log(params.beta_star))


def assemble_cross_matrix(u, kappa: np.ndarray) -> np.ndarray:
    """
    Matrix with diagonal sum_j kappa_ij u_j and off-diagonal -kappa_ij u_i.

    Leading axes of u are treated as a batch.
    """
    u = np.asarray(u, dtype=float)
    mat = -u[..., :, None] * kappa
    diag = u @ kappa.T
    idx = np.arange(kappa.shape[0])
    mat[..., idx, idx] = diag
    return mat


def assemble_A_s(u, params: ModelParams) -> np.ndarray:
    return assemble_cross_matrix(u, params.kappa_s)


def assemble_A_g_tilde(u, params: ModelParams) -> np.ndarray:
    return assemble_cross_matrix(u, params.kappa_g)


def modified_matrix(u, phase: str, params: ModelParams) -> np.ndarray:
    """kappa* I + A_bar(u): the solid diffusion matrix, or the gas friction matrix."""
    if _check_phase(phase) == "s":
        kbar, kmin = params.kappa_bar_s, params.kappa_min_s
    else:
        kbar, kmin = params.kappa_bar_g, params.kappa_min_g
    mat = assemble_cross_matrix(u, kbar)
    idx = np.arange(params.n)
    mat[..., idx, idx] += kmin
    return mat


def mobility(u, phase: str, params: ModelParams) -> np.ndarray:
    """
    Modified mobility matrix of a phase.

    Solid: (kappa* I + A_bar_s(u)) diag(u). Gas: (kappa* I + A_bar_g(u))^-1 diag(u),
    obtained by a dense solve against diag(u).
    """
    u = _as_array(u)
    if np.any(u <= 0.0):
        raise DomainError("mobility needs strictly positive concentrations")
    mat = modified_matrix(u, phase, params)
    diag_u = u[..., :, None] * np.eye(params.n)
    if phase == "s":
        return mat @ diag_u
    try:
        return np.linalg.solve(mat, diag_u)
    except np.linalg.LinAlgError as e:
        raise SingularSystemError(f"gas friction matrix is singular: {e}") from e
