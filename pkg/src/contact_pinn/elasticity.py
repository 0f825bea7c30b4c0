"""Small-deformation isotropic elasticity in Voigt notation.

Stress/strain component order is (xx, yy, zz, xy, yz, xz).  Strain uses
tensor shear components (not engineering doubles); Hooke's law carries the
factor of two on the shear diagonal instead.  All residual operators accept
either plain float64 arrays or engine Vars, batched over a leading axis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import ConfigurationError

VOIGT_COMPONENTS = ("xx", "yy", "zz", "xy", "yz", "xz")


@dataclass(frozen=True)
class MaterialParams:
    """Isotropic linear elastic material."""

    young_modulus: float
    poisson_ratio: float

    def __post_init__(self):
        if self.young_modulus <= 0.0:
            raise ConfigurationError(f"young_modulus must be positive, got {self.young_modulus}")
        if not -1.0 < self.poisson_ratio < 0.5:
            raise ConfigurationError(
                f"poisson_ratio must lie in (-1, 0.5), got {self.poisson_ratio}"
            )

    @property
    def lame_lambda(self) -> float:
        e, nu = self.young_modulus, self.poisson_ratio
        return e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    @property
    def lame_mu(self) -> float:
        e, nu = self.young_modulus, self.poisson_ratio
        return e / (2.0 * (1.0 + nu))

    def stiffness(self) -> np.ndarray:
        """6x6 Voigt stiffness mapping tensor strain to stress."""
        lam, mu = self.lame_lambda, self.lame_mu
        c = np.zeros((6, 6))
        c[:3, :3] = lam
        c[np.arange(3), np.arange(3)] += 2.0 * mu
        c[np.arange(3, 6), np.arange(3, 6)] = 2.0 * mu
        return c


@dataclass(frozen=True)
class MixedField:
    """Displacement and stress at one point."""

    u: np.ndarray  # (3,)
    sigma: np.ndarray  # (6,) Voigt


# flattened displacement gradient (row-major, g[3*i+j] = du_i/dx_j) -> Voigt strain
_STRAIN_MAP = np.zeros((9, 6))
_STRAIN_MAP[0, 0] = 1.0  # exx = du_x/dx
_STRAIN_MAP[4, 1] = 1.0  # eyy = du_y/dy
_STRAIN_MAP[8, 2] = 1.0  # ezz = du_z/dz
_STRAIN_MAP[1, 3] = _STRAIN_MAP[3, 3] = 0.5  # exy
_STRAIN_MAP[5, 4] = _STRAIN_MAP[7, 4] = 0.5  # eyz
_STRAIN_MAP[2, 5] = _STRAIN_MAP[6, 5] = 0.5  # exz

# flattened stress Jacobian (row-major, J[3*k+j] = dsigma_k/dx_j, k Voigt) -> divergence
# row i of sigma tensor: (div sigma)_x = dsxx/dx + dsxy/dy + dsxz/dz, etc.
_DIV_MAP = np.zeros((18, 3))
_DIV_MAP[3 * 0 + 0, 0] = 1.0  # dsxx/dx
_DIV_MAP[3 * 3 + 1, 0] = 1.0  # dsxy/dy
_DIV_MAP[3 * 5 + 2, 0] = 1.0  # dsxz/dz
_DIV_MAP[3 * 3 + 0, 1] = 1.0  # dsxy/dx
_DIV_MAP[3 * 1 + 1, 1] = 1.0  # dsyy/dy
_DIV_MAP[3 * 4 + 2, 1] = 1.0  # dsyz/dz
_DIV_MAP[3 * 5 + 0, 2] = 1.0  # dsxz/dx
_DIV_MAP[3 * 4 + 1, 2] = 1.0  # dsyz/dy
_DIV_MAP[3 * 2 + 2, 2] = 1.0  # dszz/dz


def _flatten_last_two(a, rows: int):
    shape = a.shape
    if len(shape) < 2 or shape[-2] * shape[-1] != rows:
        raise ConfigurationError(f"expected trailing shape with {rows} entries, got {shape}")
    return autodiff.reshape(a, shape[:-2] + (rows,))


def strain_from_displacement_gradient(grad_u):
    """Symmetrized tensor strain, Voigt (..., 6), from grad_u (..., 3, 3)."""
    flat = _flatten_last_two(grad_u, 9)
    return autodiff.matmul_const(flat, _STRAIN_MAP)


def hooke_stress(strain, material: MaterialParams):
    """Voigt stress (..., 6) from Voigt tensor strain (..., 6)."""
    return autodiff.matmul_const(strain, material.stiffness().T)


def divergence_of_stress(stress_jacobian):
    """Divergence (..., 3) of the stress field from its Jacobian (..., 6, 3)."""
    flat = _flatten_last_two(stress_jacobian, 18)
    return autodiff.matmul_const(flat, _DIV_MAP)


def momentum_residual(div_sigma, body_force=None):
    """Static balance residual div(sigma) + f, zero body force by default."""
    if body_force is None:
        return div_sigma
    return autodiff.add(div_sigma, body_force)


def stress_coupling_residual(sigma, grad_u, material: MaterialParams):
    """Mixed-form constitutive residual sigma - C : strain(grad_u)."""
    strain = strain_from_displacement_gradient(grad_u)
    return autodiff.sub(sigma, hooke_stress(strain, material))
