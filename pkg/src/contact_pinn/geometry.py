"""Benchmark domains and deterministic collocation-point sampling.

Interior points come from a seeded scrambled Halton sequence (quasi-uniform
coverage, bitwise reproducible per seed); surface sets use uniform
parameter grids.  Point sets are immutable: arrays are marked read-only so
samples can be shared between loss assembly and evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import qmc

from . import analytic
from .autodiff import ConfigurationError

MEMBERSHIP_TOL = 1e-12

ROLES = ("interior", "dirichlet", "neumann_soft", "contact", "data", "evaluation")

# reference-profile window under the contact: lines span y in [-R, DATA_LINE_Y_END]
DATA_LINE_Y_END = -0.7642
EVAL_LINE_Z = -0.75


@dataclass(frozen=True)
class PointSet:
    """A role-tagged batch of collocation points with per-point attachments.

    normals: outward unit normals (boundary roles); tractions: prescribed
    traction vectors (neumann_soft); values/mask: measured field values and
    which of the 9 components are measured (data role).
    """

    role: str
    points: np.ndarray  # (n, 3)
    normals: Optional[np.ndarray] = None
    tractions: Optional[np.ndarray] = None
    values: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ConfigurationError(f"unknown point-set role {self.role!r}")
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ConfigurationError(f"points must be (n, 3), got {pts.shape}")
        object.__setattr__(self, "points", pts)
        n = pts.shape[0]
        for name, width, dtype in (("normals", 3, np.float64), ("tractions", 3, np.float64),
                                   ("values", 9, np.float64), ("mask", 9, bool)):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = np.ascontiguousarray(arr, dtype=dtype)
            if arr.shape != (n, width):
                raise ConfigurationError(f"{name} must be ({n}, {width}), got {arr.shape}")
            object.__setattr__(self, name, arr)
        for name in ("points", "normals", "tractions", "values", "mask"):
            arr = getattr(self, name)
            if arr is not None:
                arr.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class PatchDomain:
    """Box [0,l]x[0,h]x[0,w] compressed by pressure p against the plane y=0."""

    length: float = 1.0
    height: float = 1.0
    depth: float = 1.0
    pressure: float = 0.1

    def contains(self, points, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        lims = np.array([self.length, self.height, self.depth])
        return np.all((pts >= -tol) & (pts <= lims + tol), axis=1)


@dataclass(frozen=True)
class HertzDomain:
    """Quarter cylinder {x>=0, y<=0, x^2+y^2<=R^2, -w<=z<=0} on the plane y=-R.

    contact_angle_deg bounds the curved-surface sector (polar angle from the
    downward vertical) where contact conditions are enforced; the rest of
    the curved surface is traction-free.
    """

    radius: float = 1.0
    width: float = 1.0
    pressure: float = 0.5
    contact_angle_deg: float = 15.0

    @property
    def plane_height(self) -> float:
        return -self.radius

    def contains(self, points, tol: float = MEMBERSHIP_TOL) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        r2 = self.radius**2
        return ((x >= -tol) & (y <= tol) & (x * x + y * y <= r2 + tol)
                & (z >= -self.width - tol) & (z <= tol))


@dataclass(frozen=True)
class PatchCounts:
    interior: int = 2000
    contact: int = 400
    evaluation_grid: int = 21  # lattice points per axis

    def __post_init__(self):
        if min(self.interior, self.contact, self.evaluation_grid) <= 0:
            raise ConfigurationError("sampling counts must be positive")


@dataclass(frozen=True)
class HertzCounts:
    interior: int = 5000
    curved: int = 1000
    contact: int = 500
    evaluation: int = 200

    def __post_init__(self):
        if min(self.interior, self.curved, self.contact, self.evaluation) <= 0:
            raise ConfigurationError("sampling counts must be positive")


def _grid_sides(count: int) -> tuple[int, int]:
    """Split a count into the most square exact factorization (a <= b)."""
    a = int(math.isqrt(count))
    while count % a:
        a -= 1
    return a, count // a


def _halton(n: int, dim: int, seed: int) -> np.ndarray:
    sampler = qmc.Halton(d=dim, scramble=True, seed=seed)
    u = sampler.random(n)
    # keep interior points strictly interior even in pathological draws
    return np.clip(u, 1e-9, 1.0 - 1e-9)


def sample_patch(counts: PatchCounts = PatchCounts(), seed: int = 0,
                 domain: PatchDomain = PatchDomain()) -> dict[str, PointSet]:
    """Collocation sets for the patch test: interior, contact face y=0, eval lattice."""
    lims = np.array([domain.length, domain.height, domain.depth])
    interior = _halton(counts.interior, 3, seed) * lims

    nx, nz = _grid_sides(counts.contact)
    gx = np.linspace(0.0, domain.length, nx)
    gz = np.linspace(0.0, domain.depth, nz)
    xx, zz = np.meshgrid(gx, gz, indexing="ij")
    contact = np.column_stack([xx.ravel(), np.zeros(xx.size), zz.ravel()])

    m = counts.evaluation_grid
    axes = [np.linspace(0.0, float(l), m) for l in lims]
    xs, ys, zs = np.meshgrid(*axes, indexing="ij")
    evaluation = np.column_stack([xs.ravel(), ys.ravel(), zs.ravel()])

    sets = {
        "interior": PointSet(role="interior", points=interior),
        "contact": PointSet(role="contact", points=contact),
        "evaluation": PointSet(role="evaluation", points=evaluation),
    }
    _check_membership(domain, sets)
    return sets


def sample_hertz(counts: HertzCounts = HertzCounts(), seed: int = 0,
                 domain: HertzDomain = HertzDomain()) -> dict[str, PointSet]:
    """Collocation sets for the half-cylinder contact benchmark.

    interior: quasi-random in the quarter cylinder; neumann_soft: curved
    surface outside the contact sector, outward normals attached with zero
    prescribed traction; contact: curved sector within the contact angle;
    evaluation: the x=0 line at z=-0.75 spanning the reference profile.
    """
    r, w = domain.radius, domain.width
    interior = _sample_quarter_cylinder(counts.interior, seed, r, w)

    alpha = math.radians(domain.contact_angle_deg)

    nt, nz = _grid_sides(counts.contact)
    theta = np.linspace(0.0, alpha, nt)
    contact, contact_normals = _cylinder_sector(theta, nz, r, w)

    nt, nz = _grid_sides(counts.curved)
    theta = np.linspace(alpha, 0.5 * math.pi, nt + 1)[1:]
    curved, curved_normals = _cylinder_sector(theta, nz, r, w)

    ys = np.linspace(-r, DATA_LINE_Y_END, counts.evaluation)
    evaluation = np.column_stack([np.zeros(ys.size), ys, np.full(ys.size, EVAL_LINE_Z)])

    sets = {
        "interior": PointSet(role="interior", points=interior),
        "neumann_soft": PointSet(role="neumann_soft", points=curved,
                                 normals=curved_normals,
                                 tractions=np.zeros_like(curved_normals)),
        "contact": PointSet(role="contact", points=contact, normals=contact_normals),
        "evaluation": PointSet(role="evaluation", points=evaluation),
    }
    _check_membership(domain, sets)
    return sets


def _sample_quarter_cylinder(n: int, seed: int, radius: float, width: float) -> np.ndarray:
    """Rejection-sample the Halton sequence into the quarter-cylinder volume."""
    sampler = qmc.Halton(d=3, scramble=True, seed=seed)
    out = []
    have = 0
    while have < n:
        u = np.clip(sampler.random(max(2 * (n - have), 256)), 1e-9, 1.0 - 1e-9)
        cand = np.column_stack([u[:, 0] * radius, -u[:, 1] * radius, -u[:, 2] * width])
        keep = cand[cand[:, 0] ** 2 + cand[:, 1] ** 2 < radius**2]
        out.append(keep)
        have += keep.shape[0]
    return np.concatenate(out)[:n]


def _cylinder_sector(theta: np.ndarray, nz: int, radius: float, width: float):
    """Grid a curved-surface sector; theta measured from the downward vertical."""
    zs = np.linspace(-width, 0.0, nz)
    tt, zz = np.meshgrid(theta, zs, indexing="ij")
    sin, cos = np.sin(tt.ravel()), np.cos(tt.ravel())
    points = np.column_stack([radius * sin, -radius * cos, zz.ravel()])
    normals = np.column_stack([sin, -cos, np.zeros(sin.size)])
    return points, normals


def polar_angle(points) -> np.ndarray:
    """Polar angle from the downward vertical at the cylinder axis."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    return np.arctan2(pts[:, 0], -pts[:, 1])


def hertz_data_lines(domain: HertzDomain = HertzDomain(),
                     young_modulus: float = 200.0, poisson_ratio: float = 0.3,
                     points_per_line: int = 50) -> PointSet:
    """Reference stress measurements on three vertical lines at x = 0.

    Lines at z in {-1, -0.5, 0}, y from -1 to -0.7642, 50 points each; the
    measured components are (sxx, syy, szz) from the analytical profile.
    """
    consts = analytic.hertz_constants(young_modulus, poisson_ratio, domain.radius,
                                      domain.width, domain.pressure)
    ys = np.linspace(-domain.radius, DATA_LINE_Y_END, points_per_line)
    lines = []
    for z in (-domain.width, -0.5 * domain.width, 0.0):
        lines.append(np.column_stack([np.zeros(ys.size), ys, np.full(ys.size, z)]))
    points = np.concatenate(lines)
    values = np.zeros((points.shape[0], 9))
    values[:, 3:6] = analytic.hertz_field_at(points, consts, poisson_ratio, domain.radius)
    mask = np.zeros((points.shape[0], 9), dtype=bool)
    mask[:, 3:6] = True
    return PointSet(role="data", points=points, values=values, mask=mask)


def _check_membership(domain, sets: dict[str, PointSet]) -> None:
    for name, ps in sets.items():
        ok = domain.contains(ps.points)
        if not np.all(ok):
            bad = int(np.count_nonzero(~ok))
            raise ConfigurationError(f"{bad} sampled {name} points fall outside the domain")


def write_points_csv(point_set: PointSet, path) -> None:
    """Dump a point set with its attachments for inspection."""
    cols = [("x", point_set.points[:, 0]), ("y", point_set.points[:, 1]),
            ("z", point_set.points[:, 2])]
    if point_set.normals is not None:
        for i, n in enumerate(("nx", "ny", "nz")):
            cols.append((n, point_set.normals[:, i]))
    if point_set.tractions is not None:
        for i, n in enumerate(("tx", "ty", "tz")):
            cols.append((n, point_set.tractions[:, i]))
    if point_set.values is not None:
        names = ("ux", "uy", "uz", "sxx", "syy", "szz", "sxy", "syz", "sxz")
        for i, n in enumerate(names):
            cols.append((f"value_{n}", point_set.values[:, i]))
            cols.append((f"mask_{n}", point_set.mask[:, i].astype(float)))
    header = ",".join(name for name, _ in cols)
    data = np.column_stack([c for _, c in cols])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
