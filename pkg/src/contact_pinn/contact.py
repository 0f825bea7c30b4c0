"""Frictionless contact against a rigid plane.

Contact state at a surface point is the normal gap plus the surface
traction split into a normal component and two tangential shears.  The
normal traction p_n = (sigma . n_out) . n_out is tension-positive, so a
body pressed onto the plane has p_n <= 0; the admissible set is

    g_n >= 0,   p_n <= 0,   g_n * p_n = 0.

Those three conditions collapse into a single Fischer-Burmeister residual
phi(g_n, -p_n) whose root set is exactly the admissible set, so one squared
term per point enforces the whole inequality structure.  Frictionless
sliding adds the two tangential tractions as residuals.

All residual functions accept plain float64 arrays or engine Vars.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import autodiff
from .autodiff import ConfigurationError

_ORTHO_TOL = 1e-12


@dataclass(frozen=True)
class RigidPlane:
    """Rigid frictionless plane with an orthonormal contact frame.

    `inward_normal` points from the plane into the elastic body; the two
    tangents complete an orthonormal triad used to decompose tractions.
    """

    point_on_plane: np.ndarray
    inward_normal: np.ndarray
    tangent_xi: np.ndarray
    tangent_eta: np.ndarray

    def __post_init__(self):
        for name in ("point_on_plane", "inward_normal", "tangent_xi", "tangent_eta"):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (3,):
                raise ConfigurationError(f"{name} must be a 3-vector, got shape {v.shape}")
            object.__setattr__(self, name, v)
        frame = (self.inward_normal, self.tangent_xi, self.tangent_eta)
        for v in frame:
            if abs(v @ v - 1.0) > _ORTHO_TOL:
                raise ConfigurationError("contact frame vectors must be unit length")
        for i in range(3):
            for j in range(i + 1, 3):
                if abs(frame[i] @ frame[j]) > _ORTHO_TOL:
                    raise ConfigurationError("contact frame vectors must be orthogonal")

    @property
    def outward_normal(self) -> np.ndarray:
        """Outward normal of the body surface touching the plane."""
        return -self.inward_normal

    @classmethod
    def horizontal(cls, height: float) -> "RigidPlane":
        """Plane y = height supporting a body that lies above it."""
        return cls(
            point_on_plane=np.array([0.0, float(height), 0.0]),
            inward_normal=np.array([0.0, 1.0, 0.0]),
            tangent_xi=np.array([1.0, 0.0, 0.0]),
            tangent_eta=np.array([0.0, 0.0, 1.0]),
        )


@dataclass(frozen=True)
class ContactState:
    """Gap and contact-frame tractions at surface points.

    pressure is the normal traction (sigma . n_out) . n_out, tension
    positive: it is non-positive wherever the body actually presses on the
    plane.  gap is None when only tractions were decomposed.
    """

    pressure: object
    shear_xi: object
    shear_eta: object
    gap: Optional[object] = None


def _as_batch(a):
    v = autodiff.value_of(a)
    if v.ndim == 1:
        return autodiff.reshape(a, (1, v.shape[0])), True
    return a, False


def _maybe_squeeze(a, single: bool):
    if not single:
        return a
    v = autodiff.value_of(a)
    return autodiff.reshape(a, v.shape[1:])


def gap(points, displacement, plane: RigidPlane):
    """Normal gap of deformed surface points against the plane.

    points: (n, 3) reference coordinates; displacement: (n, 3).  Returns the
    signed distance of the deformed point above the plane, measured along
    the inward normal: positive when separated, negative on penetration.
    Single points (3,) are accepted and return a scalar.
    """
    disp, single = _as_batch(displacement)
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    offset = (pts - plane.point_on_plane) @ plane.inward_normal
    g = autodiff.add(autodiff.matmul_const(disp, plane.inward_normal), offset)
    return _maybe_squeeze(g, single)


def traction_matrix(plane: RigidPlane) -> np.ndarray:
    """Constant (6, 3) map from Voigt stress to contact-frame tractions.

    sigma_voigt @ M gives (p_n, t_xi, t_eta) where t_c = sigma . n_out.
    With Voigt order (xx, yy, zz, xy, yz, xz) the traction vector is
    t_x = sxx nx + sxy ny + sxz nz and cyclic, which the row layout below
    spells out.
    """
    n_out = plane.outward_normal
    sigma_dot_n = np.zeros((6, 3))  # column j: component j of sigma . n_out
    sigma_dot_n[[0, 3, 5], 0] = n_out
    sigma_dot_n[[3, 1, 4], 1] = n_out
    sigma_dot_n[[5, 4, 2], 2] = n_out
    m = np.zeros((6, 3))
    m[:, 0] = sigma_dot_n @ n_out
    m[:, 1] = sigma_dot_n @ plane.tangent_xi
    m[:, 2] = sigma_dot_n @ plane.tangent_eta
    return m


def traction_decomposition(sigma, plane: RigidPlane) -> ContactState:
    """Decompose Voigt stresses (n, 6) into contact-frame tractions.

    pressure = (sigma . n_out) . n_out (tension positive), shears are the
    tangential components along the plane frame.
    """
    sig, single = _as_batch(sigma)
    comps = autodiff.matmul_const(sig, traction_matrix(plane))  # (n, 3)
    return ContactState(
        pressure=_maybe_squeeze(comps[:, 0], single),
        shear_xi=_maybe_squeeze(comps[:, 1], single),
        shear_eta=_maybe_squeeze(comps[:, 2], single),
    )


def fischer_burmeister(a, b):
    """phi(a, b) = a + b - sqrt(a^2 + b^2).

    phi = 0 iff a >= 0, b >= 0 and a*b = 0, so the squared residual
    penalizes exactly the violations of a complementarity pair.  The sqrt
    backward is guarded at the origin, where phi^2 then has an exact zero
    gradient.
    """
    radius = autodiff.sqrt(autodiff.add(autodiff.mul(a, a), autodiff.mul(b, b)))
    return autodiff.sub(autodiff.add(a, b), radius)


def kkt_residual(gap_value, pressure):
    """Complementarity residual phi(g_n, -p_n) = g_n - p_n - sqrt(g_n^2 + p_n^2).

    pressure follows the tension-positive convention of
    traction_decomposition, hence the sign flip before the pairing.
    """
    return fischer_burmeister(gap_value, autodiff.neg(pressure))


def sliding_residuals(shear_xi, shear_eta):
    """Frictionless condition: both tangential tractions vanish (identity residuals)."""
    return shear_xi, shear_eta
