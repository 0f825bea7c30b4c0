"""Fast self-verification suites behind the CLI `verify` subcommand.

Each check returns (name, passed, detail).  The suites cover the
complementarity residual, constitutive identities, hard-constraint
transforms, initializer bounds, analytical constants, and
gradient-vs-finite-difference agreement on 5-point miniatures of both
benchmarks.  Everything here finishes in seconds.
"""

from __future__ import annotations

import numpy as np

from . import analytic, autodiff, contact, elasticity, geometry, network
from .contact import RigidPlane
from .elasticity import MaterialParams
from .loss import LossAssembler, LossWeights
from .network import Architecture


class CheckResult(tuple):
    def __new__(cls, name: str, passed: bool, detail: str = ""):
        return super().__new__(cls, (name, bool(passed), detail))

    @property
    def name(self):
        return self[0]

    @property
    def passed(self):
        return self[1]

    @property
    def detail(self):
        return self[2]


def check_fb_equivalence() -> CheckResult:
    """phi roots coincide with the complementarity set on a [-2,2]^2 grid."""
    grid = np.linspace(-2.0, 2.0, 81)
    a, b = np.meshgrid(grid, grid, indexing="ij")
    phi = contact.fischer_burmeister(a, b)
    is_root = np.abs(phi) < 1e-12
    in_set = (a >= -1e-12) & (b >= -1e-12) & (np.abs(a * b) < 1e-12)
    ok = np.array_equal(is_root, in_set)
    pos = phi > 0
    should_pos = (a > 0) & (b > 0)
    nonroot = ~is_root
    sign_ok = (np.array_equal(pos & nonroot, should_pos & nonroot)
               and np.all(phi[nonroot & ((a < 0) | (b < 0))] < 0))
    return CheckResult("fb_equivalence_grid", ok and sign_ok,
                       f"{int(np.count_nonzero(is_root))} roots on grid")


def check_fb_origin_gradient() -> CheckResult:
    """Gradient of phi^2 at the origin is exactly zero (guarded sqrt)."""

    def objective(v):
        phi = contact.fischer_burmeister(v[0], v[1])
        return autodiff.mul(phi, phi)

    _, grad = autodiff.loss_gradient(np.zeros(2), objective)
    mag = float(np.linalg.norm(grad))
    return CheckResult("fb_squared_gradient_at_origin", mag < 1e-6, f"|grad| = {mag:.3e}")


def check_hooke_identities() -> CheckResult:
    """Trace identity and linearity of the constitutive map."""
    rng = np.random.default_rng(7)
    mat = MaterialParams(young_modulus=1.33, poisson_ratio=0.33)
    lam, mu = mat.lame_lambda, mat.lame_mu
    ok = True
    details = []
    for _ in range(10):
        eps = rng.normal(size=6)
        sig = elasticity.hooke_stress(eps, mat)
        lhs = sig[:3].sum()
        rhs = (3.0 * lam + 2.0 * mu) * eps[:3].sum()
        ok &= abs(lhs - rhs) < 1e-12 * max(1.0, abs(rhs))
        e1, e2 = rng.normal(size=6), rng.normal(size=6)
        a, b = rng.normal(), rng.normal()
        lin = elasticity.hooke_stress(a * e1 + b * e2, mat)
        split = a * elasticity.hooke_stress(e1, mat) + b * elasticity.hooke_stress(e2, mat)
        ok &= np.allclose(lin, split, rtol=0.0, atol=1e-12)
    details.append("trace + linearity over 10 random strains")
    return CheckResult("hooke_identities", bool(ok), details[0])


def check_momentum_linear_field() -> CheckResult:
    """Linear displacement fields produce exactly zero momentum residual."""
    rng = np.random.default_rng(11)
    mat = MaterialParams(young_modulus=200.0, poisson_ratio=0.3)
    ok = True
    for _ in range(5):
        a = rng.normal(size=(3, 3))  # u = A x has constant grad, constant stress
        grad_u = np.broadcast_to(a, (20, 3, 3)).copy()
        sig = elasticity.hooke_stress(
            elasticity.strain_from_displacement_gradient(grad_u), mat)
        jac = np.zeros((20, 6, 3))  # constant stress: zero spatial derivatives
        res = elasticity.momentum_residual(elasticity.divergence_of_stress(jac))
        ok &= np.all(res == 0.0) and np.all(np.isfinite(sig))
    return CheckResult("momentum_zero_for_linear_fields", bool(ok),
                       "5 random linear fields")


def _boundary_points_patch(rng, n):
    pts = rng.uniform(0.0, 1.0, size=(n, 3))
    face = rng.integers(0, 6, size=n)
    axis = face // 2
    pts[np.arange(n), axis] = (face % 2).astype(float)
    return pts


def check_patch_hard_constraints(n: int = 1000) -> CheckResult:
    """Patch transform pins displacement/traction components on their faces."""
    rng = np.random.default_rng(23)
    arch = Architecture(hidden_layers=2, hidden_width=8)
    theta = rng.normal(size=arch.n_params)
    tf = network.patch_transform()
    pts = _boundary_points_patch(rng, n)
    vals, _ = network.transformed_fields(theta, arch, tf, pts)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    worst = 0.0

    def track(maskv, got, want):
        nonlocal worst
        if np.any(maskv):
            worst = max(worst, float(np.max(np.abs(got[maskv] - want))))

    track(x == 0.0, vals[:, 0], 0.0)  # ux pinned
    track(z == 0.0, vals[:, 2], 0.0)  # uz pinned
    track(x == 1.0, vals[:, 3], 0.0)  # sxx free face
    track(y == 1.0, vals[:, 4], -0.1)  # pressure face
    track(z == 1.0, vals[:, 5], 0.0)
    for cond in (x == 0.0, x == 1.0, y == 1.0):
        track(cond, vals[:, 6], 0.0)  # sxy
    for cond in (z == 0.0, z == 1.0, y == 1.0):
        track(cond, vals[:, 7], 0.0)  # syz
    for cond in (x == 0.0, x == 1.0, z == 0.0, z == 1.0):
        track(cond, vals[:, 8], 0.0)  # sxz
    return CheckResult("patch_hard_constraints", worst < 1e-14, f"worst = {worst:.3e}")


def check_hertz_hard_constraints(n: int = 1000) -> CheckResult:
    """Cylinder transform pins components on symmetry/plane-strain/loaded faces."""
    rng = np.random.default_rng(29)
    arch = Architecture(hidden_layers=2, hidden_width=8)
    theta = rng.normal(size=arch.n_params)
    tf = network.hertz_transform()
    # sample the flat faces x=0, y=0, z=0, z=-1 inside the quarter cylinder
    pts = np.empty((n, 3))
    which = rng.integers(0, 4, size=n)
    r = rng.uniform(0.0, 1.0, size=n)
    ang = rng.uniform(0.0, 0.5 * np.pi, size=n)
    pts[:, 0] = np.where(which == 0, 0.0, r * np.sin(ang))
    pts[:, 1] = np.where(which == 1, 0.0, -r * np.cos(ang))
    pts[:, 2] = rng.uniform(-1.0, 0.0, size=n)
    pts[which == 2, 2] = 0.0
    pts[which == 3, 2] = -1.0
    vals, _ = network.transformed_fields(theta, arch, tf, pts)
    x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
    worst = 0.0

    def track(maskv, got, want):
        nonlocal worst
        if np.any(maskv):
            worst = max(worst, float(np.max(np.abs(got[maskv] - want))))

    track(x == 0.0, vals[:, 0], 0.0)  # ux symmetry
    track(z == 0.0, vals[:, 2], 0.0)  # uz plane strain
    track(z == -1.0, vals[:, 2], 0.0)
    track(y == 0.0, vals[:, 4], -0.5)  # loaded face
    track(x == 0.0, vals[:, 6], 0.0)  # sxy
    track(y == 0.0, vals[:, 6], 0.0)
    for cond in (z == 0.0, z == -1.0, y == 0.0):
        track(cond, vals[:, 7], 0.0)  # syz
    for cond in (z == 0.0, z == -1.0, x == 0.0):
        track(cond, vals[:, 8], 0.0)  # sxz
    return CheckResult("hertz_hard_constraints", worst < 1e-14, f"worst = {worst:.3e}")


def check_glorot_bounds() -> CheckResult:
    """Every weight obeys the layer's Glorot-uniform bound; biases are zero."""
    arch = Architecture()
    theta = network.init_glorot_uniform(arch, seed=123)
    ok = True
    for w, b in autodiff.split_params(theta, arch.widths):
        limit = np.sqrt(6.0 / (w.shape[0] + w.shape[1]))
        ok &= float(np.max(np.abs(w))) < limit
        ok &= np.all(b == 0.0)
    return CheckResult("glorot_bounds", bool(ok), f"P = {arch.n_params}")


def check_hertz_constants() -> CheckResult:
    """Derived half-width/peak pressure match their 3-significant-figure values."""
    c = analytic.hertz_constants()
    ok = (c.force == 1.0
          and round(c.half_width, 3) == 0.076
          and round(c.peak_pressure, 2) == 8.36)
    return CheckResult("hertz_constants", ok,
                       f"b = {c.half_width:.6f}, p_max = {c.peak_pressure:.6f}")


def _miniature(benchmark: str, seed: int = 5):
    rng = np.random.default_rng(seed)
    arch = Architecture(hidden_layers=2, hidden_width=8)
    theta = 0.5 * rng.normal(size=arch.n_params)
    if benchmark == "patch":
        interior = rng.uniform(0.05, 0.95, size=(5, 3))
        contact_pts = np.column_stack([rng.uniform(0, 1, 5), np.zeros(5),
                                       rng.uniform(0, 1, 5)])
        sets = {
            "interior": geometry.PointSet(role="interior", points=interior),
            "contact": geometry.PointSet(role="contact", points=contact_pts),
        }
        asm = LossAssembler(arch, MaterialParams(1.33, 0.33),
                            network.patch_transform(), sets, LossWeights(),
                            plane=RigidPlane.horizontal(0.0))
    else:
        ang = rng.uniform(0.0, 0.4 * np.pi, size=5)
        rad = rng.uniform(0.2, 0.95, size=5)
        interior = np.column_stack([rad * np.sin(ang), -rad * np.cos(ang),
                                    rng.uniform(-0.95, -0.05, 5)])
        cang = rng.uniform(0.0, np.radians(15.0), size=5)
        contact_pts = np.column_stack([np.sin(cang), -np.cos(cang),
                                       rng.uniform(-1.0, 0.0, 5)])
        nang = rng.uniform(np.radians(20.0), 0.5 * np.pi, size=5)
        curved = np.column_stack([np.sin(nang), -np.cos(nang),
                                  rng.uniform(-1.0, 0.0, 5)])
        normals = np.column_stack([np.sin(nang), -np.cos(nang), np.zeros(5)])
        data = geometry.hertz_data_lines(points_per_line=2)
        sets = {
            "interior": geometry.PointSet(role="interior", points=interior),
            "contact": geometry.PointSet(role="contact", points=contact_pts),
            "neumann_soft": geometry.PointSet(role="neumann_soft", points=curved,
                                              normals=normals,
                                              tractions=np.zeros((5, 3))),
            "data": data,
        }
        asm = LossAssembler(arch, MaterialParams(200.0, 0.3),
                            network.hertz_transform(), sets,
                            LossWeights.hertz_defaults(),
                            plane=RigidPlane.horizontal(-1.0))
    return asm, theta, rng


def check_gradient_oracle(benchmark: str, n_directions: int = 20) -> CheckResult:
    """Loss gradient vs central finite differences on a 5-point miniature."""
    asm, theta, rng = _miniature(benchmark)
    _, grad = asm.value_and_gradient(theta)

    def f(t):
        return asm.breakdown(t).total

    directions = [d / np.linalg.norm(d) for d in rng.normal(size=(n_directions, theta.size))]
    try:
        worst = autodiff.check_gradient(f, grad, theta, directions, h=1e-4, rtol=1e-5)
    except AssertionError as exc:
        return CheckResult(f"gradient_oracle_{benchmark}", False, str(exc))
    return CheckResult(f"gradient_oracle_{benchmark}", True, f"worst rel err = {worst:.2e}")


def run_all() -> list[CheckResult]:
    return [
        check_fb_equivalence(),
        check_fb_origin_gradient(),
        check_hooke_identities(),
        check_momentum_linear_field(),
        check_patch_hard_constraints(),
        check_hertz_hard_constraints(),
        check_glorot_bounds(),
        check_hertz_constants(),
        check_gradient_oracle("patch"),
        check_gradient_oracle("hertz"),
    ]
