"""Assembly of the training objective for the mixed-variable contact solver.

The total loss is a sum of weighted mean-squared residual groups:

    total = pde_momentum + pde_coupling + dirichlet + neumann + data
            + sliding + kkt

evaluated full-batch over role-tagged point sets.  Hard-constrained
benchmarks leave the Dirichlet/Neumann groups empty (they stay in the
breakdown as zeros).  A LossAssembler concatenates every point set into a
single network sweep per evaluation, which keeps the per-iteration cost one
fused forward/backward pass.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import autodiff, contact, elasticity
from .autodiff import ConfigurationError, Var
from .contact import RigidPlane
from .elasticity import MaterialParams
from .geometry import PointSet
from .network import Architecture, OutputTransform


def _ones(n: int):
    return tuple([1.0] * n)


@dataclass(frozen=True)
class LossWeights:
    """Per-residual weights; all default to 1.

    momentum/coupling weight the interior residual components, dirichlet,
    neumann and data the respective pointwise residual components; the
    scalar weights apply to the two sliding shears and the complementarity
    residual.
    """

    momentum: tuple = _ones(3)
    coupling: tuple = _ones(6)
    dirichlet: tuple = _ones(3)
    neumann: tuple = _ones(3)
    data: tuple = _ones(9)
    sliding_xi: float = 1.0
    sliding_eta: float = 1.0
    kkt: float = 1.0

    def __post_init__(self):
        for name, length in (("momentum", 3), ("coupling", 6), ("dirichlet", 3),
                             ("neumann", 3), ("data", 9)):
            v = np.asarray(getattr(self, name), dtype=np.float64)
            if v.shape != (length,):
                raise ConfigurationError(f"weights.{name} must have {length} entries")
            if np.any(v < 0):
                raise ConfigurationError(f"weights.{name} must be non-negative")
            object.__setattr__(self, name, tuple(float(x) for x in v))
        for name in ("sliding_xi", "sliding_eta", "kkt"):
            if getattr(self, name) < 0:
                raise ConfigurationError(f"weights.{name} must be non-negative")

    @classmethod
    def hertz_defaults(cls) -> "LossWeights":
        """All weights 1 except the complementarity term, upweighted to 500."""
        return cls(kkt=500.0)


@dataclass(frozen=True)
class LossBreakdown:
    """Scalar value of each loss group plus their sum."""

    pde_momentum: float
    pde_coupling: float
    dirichlet: float
    neumann: float
    data: float
    sliding: float
    kkt: float
    total: float

    FIELDS = ("pde_momentum", "pde_coupling", "dirichlet", "neumann", "data",
              "sliding", "kkt", "total")

    @classmethod
    def from_parts(cls, **parts) -> "LossBreakdown":
        vals = {k: float(parts.get(k, 0.0)) for k in cls.FIELDS if k != "total"}
        return cls(total=sum(vals.values()), **vals)

    @classmethod
    def scalar(cls, value: float) -> "LossBreakdown":
        """Wrap a bare objective value (used by optimizer unit contexts)."""
        return cls.from_parts(pde_momentum=float(value))

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.FIELDS}


def _normal_traction_matrices(normals: np.ndarray) -> np.ndarray:
    """Per-point (3, 6) maps from Voigt stress to the traction sigma . n."""
    n = normals.shape[0]
    mats = np.zeros((n, 3, 6))
    nx, ny, nz = normals[:, 0], normals[:, 1], normals[:, 2]
    mats[:, 0, 0], mats[:, 0, 3], mats[:, 0, 5] = nx, ny, nz
    mats[:, 1, 3], mats[:, 1, 1], mats[:, 1, 4] = nx, ny, nz
    mats[:, 2, 5], mats[:, 2, 4], mats[:, 2, 2] = nx, ny, nz
    return mats


def _masked_coeff(mask: np.ndarray, weights, cols: slice) -> np.ndarray:
    """Coefficients weight_c * mask / count_c for a masked MSE over columns."""
    sub = mask[:, cols]
    counts = sub.sum(axis=0)
    w = np.asarray(weights, dtype=np.float64)
    coeff = np.zeros(sub.shape)
    nonzero = counts > 0
    coeff[:, nonzero] = sub[:, nonzero] * (w[nonzero] / counts[nonzero])
    return coeff


class LossAssembler:
    """Precomputed full-batch objective over a dictionary of point sets.

    Every present role contributes its group; the network is evaluated once
    per call on the concatenation of all points.  Instances are reusable
    and deterministic: identical parameters give bitwise-identical values
    and gradients.
    """

    def __init__(self, arch: Architecture, material: MaterialParams,
                 transform: OutputTransform, point_sets: dict[str, PointSet],
                 weights: LossWeights = LossWeights(),
                 plane: Optional[RigidPlane] = None,
                 body_force=None):
        self.arch = arch
        self.material = material
        self.weights = weights
        self.plane = plane
        known = ("interior", "dirichlet", "neumann_soft", "contact", "data")
        self._slices: dict[str, slice] = {}
        blocks = []
        start = 0
        for role in known:
            ps = point_sets.get(role)
            if ps is None:
                continue
            if len(ps) == 0:
                raise ConfigurationError(f"{role} point set is empty")
            if role == "contact" and plane is None:
                raise ConfigurationError("contact points supplied without a rigid plane")
            blocks.append(ps.points)
            self._slices[role] = slice(start, start + len(ps))
            start += len(ps)
        if "interior" not in self._slices:
            raise ConfigurationError("loss assembly needs an interior point set")
        self.points = np.concatenate(blocks)
        self.tf = transform.arrays(self.points)
        self.body_force = None if body_force is None else np.asarray(body_force, float)

        if "neumann_soft" in self._slices:
            ps = point_sets["neumann_soft"]
            if ps.normals is None:
                raise ConfigurationError("neumann_soft set needs outward normals")
            self._neumann_mats = _normal_traction_matrices(ps.normals)
            self._neumann_tractions = (np.zeros((len(ps), 3)) if ps.tractions is None
                                       else ps.tractions)
        if "data" in self._slices:
            ps = point_sets["data"]
            if ps.values is None or ps.mask is None:
                raise ConfigurationError("data set needs values and a component mask")
            if np.any(~ps.mask.any(axis=1)):
                raise ConfigurationError("every data point must measure at least one component")
            self._data_values = ps.values
            self._data_coeff = _masked_coeff(ps.mask, weights.data, slice(0, 9))
        if "dirichlet" in self._slices:
            ps = point_sets["dirichlet"]
            if ps.values is None or ps.mask is None:
                raise ConfigurationError("dirichlet set needs values and a component mask")
            if ps.mask[:, 3:].any():
                raise ConfigurationError("dirichlet mask may only mark displacement components")
            self._dirichlet_values = ps.values[:, :3]
            self._dirichlet_coeff = _masked_coeff(ps.mask, weights.dirichlet, slice(0, 3))
        if "contact" in self._slices:
            pts = point_sets["contact"].points
            self._gap_offset = (pts - plane.point_on_plane) @ plane.inward_normal
            self._contact_points = pts

    # -- assembly ----------------------------------------------------------

    def _parts(self, theta) -> dict:
        w = self.weights
        packed = autodiff.mlp_with_jacobian(theta, self.arch.widths, self.points)
        raw_vals = packed[:, :, 0]
        raw_jac = packed[:, :, 1:]
        n_all = self.points.shape[0]
        values = autodiff.add(autodiff.mul(raw_vals, self.tf.factor), self.tf.offset)
        jac = autodiff.add(
            autodiff.add(
                autodiff.mul(raw_jac, self.tf.factor[:, :, None]),
                autodiff.mul(autodiff.reshape(raw_vals, (n_all, 9, 1)), self.tf.factor_grad),
            ),
            self.tf.offset_grad,
        )
        parts: dict[str, object] = {}

        sl = self._slices["interior"]
        n = sl.stop - sl.start
        mom = elasticity.momentum_residual(
            elasticity.divergence_of_stress(jac[sl, 3:9, :]), self.body_force)
        parts["pde_momentum"] = autodiff.weighted_square_sum(
            mom, np.asarray(w.momentum) / n)
        coup = elasticity.stress_coupling_residual(
            values[sl, 3:9], jac[sl, 0:3, :], self.material)
        parts["pde_coupling"] = autodiff.weighted_square_sum(
            coup, np.asarray(w.coupling) / n)

        sl = self._slices.get("dirichlet")
        if sl is not None:
            diff = autodiff.sub(values[sl, 0:3], self._dirichlet_values)
            parts["dirichlet"] = autodiff.weighted_square_sum(diff, self._dirichlet_coeff)

        sl = self._slices.get("neumann_soft")
        if sl is not None:
            n = sl.stop - sl.start
            traction = autodiff.bmatvec_const(values[sl, 3:9], self._neumann_mats)
            diff = autodiff.sub(traction, self._neumann_tractions)
            parts["neumann"] = autodiff.weighted_square_sum(
                diff, np.asarray(w.neumann) / n)

        sl = self._slices.get("data")
        if sl is not None:
            diff = autodiff.sub(values[sl, :], self._data_values)
            parts["data"] = autodiff.weighted_square_sum(diff, self._data_coeff)

        sl = self._slices.get("contact")
        if sl is not None:
            n = sl.stop - sl.start
            g = autodiff.add(
                autodiff.matmul_const(values[sl, 0:3], self.plane.inward_normal),
                self._gap_offset)
            state = contact.traction_decomposition(values[sl, 3:9], self.plane)
            shear_xi, shear_eta = contact.sliding_residuals(state.shear_xi, state.shear_eta)
            sliding = autodiff.add(
                autodiff.weighted_square_sum(shear_xi, w.sliding_xi / n),
                autodiff.weighted_square_sum(shear_eta, w.sliding_eta / n))
            parts["sliding"] = sliding
            r = contact.kkt_residual(g, state.pressure)
            parts["kkt"] = autodiff.weighted_square_sum(r, w.kkt / n)
        return parts

    def _total(self, parts: dict):
        total = None
        for v in parts.values():
            total = v if total is None else autodiff.add(total, v)
        return total

    def breakdown(self, theta: np.ndarray) -> LossBreakdown:
        """Loss groups at theta, no gradients."""
        parts = self._parts(np.asarray(theta, dtype=np.float64))
        return LossBreakdown.from_parts(**{k: float(autodiff.value_of(v)) for k, v in parts.items()})

    def value_and_gradient(self, theta: np.ndarray) -> tuple[LossBreakdown, np.ndarray]:
        """Loss groups and exact parameter gradient of their sum."""
        leaf = Var(np.asarray(theta, dtype=np.float64))
        parts = self._parts(leaf)
        total = self._total(parts)
        autodiff.backward(total)
        grad = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
        bd = LossBreakdown.from_parts(**{k: float(autodiff.value_of(v)) for k, v in parts.items()})
        return bd, grad

    def contact_diagnostics(self, theta: np.ndarray) -> dict:
        """Gap/pressure extremes over the contact set at theta."""
        if "contact" not in self._slices:
            raise ConfigurationError("assembler has no contact set")
        sl = self._slices["contact"]
        packed = autodiff.mlp_with_jacobian(np.asarray(theta, float),
                                            self.arch.widths, self.points[sl])
        vals = packed[:, :, 0] * self.tf.factor[sl] + self.tf.offset[sl]
        g = vals[:, 0:3] @ self.plane.inward_normal + self._gap_offset
        state = contact.traction_decomposition(vals[:, 3:9], self.plane)
        p = autodiff.value_of(state.pressure)
        return {
            "min_gap": float(np.min(g)),
            "max_pressure": float(np.max(p)),
            "max_abs_gap_pressure": float(np.max(np.abs(g * p))),
            "max_pressure_magnitude": float(np.max(np.abs(p))),
        }


# -- single-purpose wrappers -------------------------------------------------


def pde_loss(theta, arch: Architecture, interior: PointSet, material: MaterialParams,
             transform: OutputTransform, weights: LossWeights = LossWeights()):
    """(momentum, coupling) parts over an interior point set."""
    asm = LossAssembler(arch, material, transform, {"interior": interior}, weights)
    bd = asm.breakdown(theta)
    return bd.pde_momentum, bd.pde_coupling


def data_loss(theta, arch: Architecture, data: PointSet,
              transform: OutputTransform, weights: LossWeights = LossWeights()) -> float:
    """Weighted masked MSE against measured components."""
    if data.values is None or data.mask is None:
        raise ConfigurationError("data set needs values and a component mask")
    if np.any(~data.mask.any(axis=1)):
        raise ConfigurationError("every data point must measure at least one component")
    pts = data.points
    packed = autodiff.mlp_with_jacobian(np.asarray(theta, float), arch.widths, pts)
    tf = transform.arrays(pts)
    pred = packed[:, :, 0] * tf.factor + tf.offset
    coeff = _masked_coeff(data.mask, weights.data, slice(0, 9))
    return float(np.sum(coeff * (pred - data.values) ** 2))


def contact_losses(theta, arch: Architecture, contact_set: PointSet,
                   transform: OutputTransform, plane: RigidPlane,
                   weights: LossWeights = LossWeights()):
    """(sliding, kkt) parts over a contact point set."""
    n = len(contact_set)
    pts = contact_set.points
    packed = autodiff.mlp_with_jacobian(np.asarray(theta, float), arch.widths, pts)
    tf = transform.arrays(pts)
    vals = packed[:, :, 0] * tf.factor + tf.offset
    g = contact.gap(pts, vals[:, 0:3], plane)
    state = contact.traction_decomposition(vals[:, 3:9], plane)
    shear_xi, shear_eta = contact.sliding_residuals(state.shear_xi, state.shear_eta)
    sliding = (weights.sliding_xi * np.mean(shear_xi**2)
               + weights.sliding_eta * np.mean(shear_eta**2))
    r = contact.kkt_residual(g, state.pressure)
    kkt = weights.kkt * np.mean(np.asarray(r) ** 2)
    return float(sliding), float(kkt)


def total_loss(theta, arch: Architecture, material: MaterialParams,
               transform: OutputTransform, point_sets: dict[str, PointSet],
               weights: LossWeights = LossWeights(),
               plane: Optional[RigidPlane] = None) -> LossBreakdown:
    """Full breakdown over all supplied point sets."""
    asm = LossAssembler(arch, material, transform, point_sets, weights, plane=plane)
    return asm.breakdown(theta)


def make_provider(assembler: LossAssembler) -> Callable[[np.ndarray], tuple[LossBreakdown, np.ndarray]]:
    """Objective+gradient callable consumed by the optimizers."""

    def provider(theta: np.ndarray):
        return assembler.value_and_gradient(theta)

    return provider
