"""Closed-form reference solutions for the two benchmarks.

Patch test: uniaxial frictionless compression of a box gives homogeneous
stress and linear displacements.  Half-cylinder contact: classical
line-contact theory gives the subsurface principal stresses beneath the
contact center as functions of depth, with the contact half-width and peak
pressure derived from the total force, geometry and elastic constants.

Everything here is plain float64 numpy, independent of the network and
engine modules, so these values can stand as oracles against trained
predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import ConfigurationError


def patch_solution(points, young_modulus: float = 1.33, poisson_ratio: float = 0.33,
                   pressure: float = 0.1):
    """Exact displacement and stress for the compression patch test.

    u_x = nu*(p/E)*x, u_y = -(p/E)*y, u_z = nu*(p/E)*z; the only nonzero
    stress is syy = -p.  Returns (u (n, 3), sigma (n, 6)); a single point
    (3,) yields unbatched vectors.
    """
    pts = np.asarray(points, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    e, nu, p = float(young_modulus), float(poisson_ratio), float(pressure)
    u = np.empty((pts.shape[0], 3))
    u[:, 0] = nu * p / e * pts[:, 0]
    u[:, 1] = -p / e * pts[:, 1]
    u[:, 2] = nu * p / e * pts[:, 2]
    sigma = np.zeros((pts.shape[0], 6))
    sigma[:, 1] = -p
    if single:
        return u[0], sigma[0]
    return u, sigma


@dataclass(frozen=True)
class HertzConstants:
    """Line-contact constants: total force, contact half-width, peak pressure."""

    force: float
    half_width: float
    peak_pressure: float


def hertz_constants(young_modulus: float = 200.0, poisson_ratio: float = 0.3,
                    radius: float = 1.0, width: float = 1.0,
                    pressure: float = 0.5) -> HertzConstants:
    """Derive the line-contact constants from load and geometry.

    The cylinder (radius R, out-of-plane width w) is pressed by a uniform
    pressure p on its diametral plane, so the total force is F = 2*R*w*p.
    Against a rigid plane only the body's compliance (1-nu^2)/E enters and
    the relative curvature is 1/(2R):

        b = sqrt( (2F/(pi*w)) * ((1-nu^2)/E) / (1/(2R)) )
        p_max = 2F / (pi*b*w)
    """
    for name, v in (("young_modulus", young_modulus), ("radius", radius),
                    ("width", width), ("pressure", pressure)):
        if v <= 0:
            raise ConfigurationError(f"{name} must be positive, got {v}")
    e, nu, r, w, p = map(float, (young_modulus, poisson_ratio, radius, width, pressure))
    force = 2.0 * r * w * p
    half_width = np.sqrt((2.0 * force / (np.pi * w)) * ((1.0 - nu**2) / e) / (1.0 / (2.0 * r)))
    peak = 2.0 * force / (np.pi * half_width * w)
    return HertzConstants(force=force, half_width=float(half_width), peak_pressure=float(peak))


# the two maximum-shear branch expressions cross near depth 0.436*b
_SHEAR_BRANCH_DEPTH = 0.436


def hertz_stress_profile(depth, constants: HertzConstants, poisson_ratio: float = 0.3):
    """Subsurface stresses beneath the contact center at given depths.

    depth: scalar or array of non-negative distances below the contact
    zone.  Returns (sxx, syy, szz, tau_max) where tau_max switches between
    the out-of-plane and in-plane principal shear at depth 0.436*b:

        sxx = -p_max * ((1 + 2 t^2)/sqrt(1 + t^2) - 2 t)
        syy = -p_max / sqrt(1 + t^2)
        szz = -2 nu p_max (sqrt(1 + t^2) - t),        t = depth / b
        tau_max = (szz - syy)/2 for t <= 0.436 else (sxx - syy)/2
    """
    d = np.asarray(depth, dtype=np.float64)
    if np.any(d < 0):
        raise ValueError("depth must be non-negative")
    b = constants.half_width
    pmax = constants.peak_pressure
    nu = float(poisson_ratio)
    t = d / b
    root = np.sqrt(1.0 + t * t)
    sxx = -pmax * ((1.0 + 2.0 * t * t) / root - 2.0 * t)
    syy = -pmax / root
    szz = -2.0 * nu * pmax * (root - t)
    tau = max_shear_stress(sxx, syy, szz, d, b)
    return sxx, syy, szz, tau


def max_shear_stress(sxx, syy, szz, depth, half_width: float):
    """Branch rule for the maximum shear under the contact center.

    Shallow depths (<= 0.436*b): the extreme pair is (szz, syy); deeper,
    (sxx, syy).  Applies elementwise so predicted stresses can reuse it.
    """
    sxx, syy, szz = (np.asarray(a, dtype=np.float64) for a in (sxx, syy, szz))
    d = np.asarray(depth, dtype=np.float64)
    return np.where(d <= _SHEAR_BRANCH_DEPTH * half_width,
                    (szz - syy) / 2.0, (sxx - syy) / 2.0)


def hertz_field_at(points, constants: HertzConstants, poisson_ratio: float = 0.3,
                   radius: float = 1.0):
    """(sxx, syy, szz) at domain points via the depth mapping d = y + R.

    The profile is the plane-strain solution beneath the contact line, so
    it serves as a reference on (or near) the symmetry plane x = 0; callers
    are expected to evaluate on x = 0 lines.  Returns (n, 3).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    depth = pts[:, 1] + float(radius)
    sxx, syy, szz, _ = hertz_stress_profile(depth, constants, poisson_ratio)
    return np.column_stack([sxx, syy, szz])
