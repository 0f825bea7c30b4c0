"""Fully connected tanh network and hard-constraint output transforms.

The network maps a point (x, y, z) to nine raw fields: three displacement
components followed by six stress components in Voigt order (xx, yy, zz,
xy, yz, xz).  Raw outputs are composed with per-field polynomial transforms

    field_i(x) = factor_i(x) * raw_i(x) + offset_i(x)

so that Dirichlet displacement conditions and Neumann traction conditions on
flat faces hold identically, not just in the penalty sense.  Factors and
offsets are trivariate polynomials with analytic gradients, so transformed
spatial Jacobians stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff
from .autodiff import ConfigurationError

N_FIELDS = 9  # ux, uy, uz, sxx, syy, szz, sxy, syz, sxz


@dataclass(frozen=True)
class Architecture:
    """Shape of the fully connected network."""

    input_dim: int = 3
    hidden_layers: int = 5
    hidden_width: int = 50
    output_dim: int = N_FIELDS
    activation: str = "tanh"

    def __post_init__(self):
        if self.activation != "tanh":
            raise ConfigurationError(f"unsupported activation {self.activation!r}")
        if self.input_dim <= 0 or self.output_dim <= 0 or self.hidden_width <= 0:
            raise ConfigurationError("layer dimensions must be positive")
        if self.hidden_layers < 0:
            raise ConfigurationError("hidden_layers must be >= 0")

    @property
    def widths(self) -> list[int]:
        return [self.input_dim] + [self.hidden_width] * self.hidden_layers + [self.output_dim]

    @property
    def n_params(self) -> int:
        return autodiff.param_count(self.widths)


def init_glorot_uniform(arch: Architecture, seed: int) -> np.ndarray:
    """Glorot-uniform weights, zero biases, packed into one flat vector.

    Each weight entry is uniform on [-L, L] with L = sqrt(6/(fan_in+fan_out)).
    The layer draw order is fixed, so a seed fully determines the vector.
    """
    rng = np.random.default_rng(seed)
    theta = np.zeros(arch.n_params)
    for w, b in autodiff.split_params(theta, arch.widths):
        fan_in, fan_out = w.shape
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w[...] = rng.uniform(-limit, limit, size=w.shape)
        b[...] = 0.0
    return theta


def forward(theta: np.ndarray, arch: Architecture, points) -> np.ndarray:
    """Raw network outputs; accepts one point (3,) or a batch (n, 3)."""
    points = np.asarray(points, dtype=np.float64)
    single = points.ndim == 1
    if single:
        points = points[None, :]
    out = autodiff.mlp_forward(theta, arch.widths, points)
    return out[0] if single else out


# ---------------------------------------------------------------------------
# trivariate polynomials for transform factors and offsets
# ---------------------------------------------------------------------------


class Poly:
    """Sparse trivariate polynomial sum c * x^i y^j z^k with exact gradient."""

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms = {}
        if terms:
            for powers, coeff in terms.items():
                if coeff != 0.0:
                    self.terms[tuple(int(p) for p in powers)] = float(coeff)

    @classmethod
    def const(cls, c: float) -> "Poly":
        return cls({(0, 0, 0): c})

    @classmethod
    def axis(cls, i: int) -> "Poly":
        powers = [0, 0, 0]
        powers[i] = 1
        return cls({tuple(powers): 1.0})

    def __add__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        out = dict(self.terms)
        for p, c in other.terms.items():
            out[p] = out.get(p, 0.0) + c
        return Poly(out)

    __radd__ = __add__

    def __sub__(self, other):
        other = other if isinstance(other, Poly) else Poly.const(other)
        return self + (other * -1.0)

    def __rsub__(self, other):
        return (self * -1.0) + other

    def __mul__(self, other):
        if not isinstance(other, Poly):
            return Poly({p: c * float(other) for p, c in self.terms.items()})
        out = {}
        for p1, c1 in self.terms.items():
            for p2, c2 in other.terms.items():
                p = (p1[0] + p2[0], p1[1] + p2[1], p1[2] + p2[2])
                out[p] = out.get(p, 0.0) + c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1.0

    def __call__(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        out = np.zeros(points.shape[:-1])
        for (i, j, k), c in self.terms.items():
            out += c * x**i * y**j * z**k
        return out

    def grad(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        x, y, z = points[..., 0], points[..., 1], points[..., 2]
        out = np.zeros(points.shape[:-1] + (3,))
        for (i, j, k), c in self.terms.items():
            if i:
                out[..., 0] += c * i * x ** (i - 1) * y**j * z**k
            if j:
                out[..., 1] += c * j * x**i * y ** (j - 1) * z**k
            if k:
                out[..., 2] += c * k * x**i * y**j * z ** (k - 1)
        return out

    def __repr__(self):
        return f"Poly({self.terms})"


# symbols for building transform tables
X, Y, Z = Poly.axis(0), Poly.axis(1), Poly.axis(2)
ONE = Poly.const(1.0)
ZERO = Poly.const(0.0)


@dataclass(frozen=True)
class TransformArrays:
    """Transform factors/offsets and their gradients evaluated on a point batch."""

    factor: np.ndarray  # (n, 9)
    factor_grad: np.ndarray  # (n, 9, 3)
    offset: np.ndarray  # (n, 9)
    offset_grad: np.ndarray  # (n, 9, 3)


@dataclass(frozen=True)
class OutputTransform:
    """Per-field multiplicative factor and additive offset polynomials."""

    factors: tuple
    offsets: tuple

    def __post_init__(self):
        if len(self.factors) != N_FIELDS or len(self.offsets) != N_FIELDS:
            raise ConfigurationError(
                f"transform needs {N_FIELDS} factors and offsets, got "
                f"{len(self.factors)}/{len(self.offsets)}"
            )

    @classmethod
    def identity(cls) -> "OutputTransform":
        return cls(factors=(ONE,) * N_FIELDS, offsets=(ZERO,) * N_FIELDS)

    def arrays(self, points: np.ndarray) -> TransformArrays:
        points = np.asarray(points, dtype=np.float64)
        n = points.shape[0]
        m = np.empty((n, N_FIELDS))
        dm = np.empty((n, N_FIELDS, 3))
        a = np.empty((n, N_FIELDS))
        da = np.empty((n, N_FIELDS, 3))
        for i in range(N_FIELDS):
            m[:, i] = self.factors[i](points)
            dm[:, i, :] = self.factors[i].grad(points)
            a[:, i] = self.offsets[i](points)
            da[:, i, :] = self.offsets[i].grad(points)
        return TransformArrays(factor=m, factor_grad=dm, offset=a, offset_grad=da)


def patch_transform(length: float = 1.0, height: float = 1.0, depth: float = 1.0,
                    pressure: float = 0.1) -> OutputTransform:
    """Hard constraints for the uniaxial-compression patch test on a box.

    Box [0,l]x[0,h]x[0,w].  Roller symmetry planes x=0, z=0 (zero normal
    displacement), frictionless rigid support at y=0 handled by the contact
    terms, pressure p pushing down on y=h (syy=-p there), traction-free
    x=l and z=w.  Shear stresses vanish on every face they act on, which
    the product factors enforce; u_y carries no hard constraint.
    """
    l, h, w = float(length), float(height), float(depth)
    p = float(pressure)
    lx = Poly.const(l) - X
    hy = Poly.const(h) - Y
    wz = Poly.const(w) - Z
    factors = (
        X,  # ux = 0 on x=0
        ONE,
        Z,  # uz = 0 on z=0
        lx,  # sxx = 0 on x=l
        hy,  # syy = -p on y=h
        wz,  # szz = 0 on z=w
        X * hy * lx,  # sxy = 0 on x=0, x=l, y=h
        Z * hy * wz,  # syz = 0 on z=0, z=w, y=h
        X * Z * lx * wz,  # sxz = 0 on x=0, x=l, z=0, z=w
    )
    offsets = (ZERO, ZERO, ZERO, ZERO, Poly.const(-p), ZERO, ZERO, ZERO, ZERO)
    return OutputTransform(factors=factors, offsets=offsets)


def hertz_transform(young_modulus: float = 200.0, pressure: float = 0.5,
                    width: float = 1.0) -> OutputTransform:
    """Hard constraints for the half-cylinder-on-rigid-plane benchmark.

    Quarter domain {x >= 0, y <= 0, x^2 + y^2 <= R^2, -width <= z <= 0} of a
    long half cylinder pressed downward by pressure p on its flat top face
    y=0.  Symmetry plane x=0 (ux=0, zero in-plane shear) and plane-strain
    faces z=0, z=-width (uz=0, zero out-of-plane shear); syy = -p on the
    loaded face y=0.  Displacement factors are scaled by 1/E so raw outputs
    stay order one.
    """
    e = float(young_modulus)
    p = float(pressure)
    h = float(width)
    factors = (
        X * (1.0 / e),  # ux = 0 on x=0
        ONE * (1.0 / e),
        Z * (Z + h) * (1.0 / e),  # uz = 0 on z=0 and z=-h
        ONE,
        -1.0 * Y,  # syy = -p on y=0
        ONE,
        X * Y,  # sxy = 0 on x=0 and y=0
        (Z + h) * Z * Y,  # syz = 0 on z=0, z=-h, y=0
        (Z + h) * Z * X,  # sxz = 0 on z=0, z=-h, x=0
    )
    offsets = (ZERO, ZERO, ZERO, ZERO, Poly.const(-p), ZERO, ZERO, ZERO, ZERO)
    return OutputTransform(factors=factors, offsets=offsets)


def apply_transform(tf: TransformArrays, values, jacobian):
    """Compose raw outputs/Jacobian with precomputed transform arrays.

    values: (n, 9); jacobian: (n, 9, 3).  Product rule:
    J'_ij = dfactor_i/dx_j * raw_i + factor_i * J_ij + doffset_i/dx_j.
    Accepts Vars or plain arrays.
    """
    n = tf.factor.shape[0]
    out_values = autodiff.add(autodiff.mul(values, tf.factor), tf.offset)
    raw_col = autodiff.reshape(values, (n, N_FIELDS, 1))
    out_jac = autodiff.add(
        autodiff.add(
            autodiff.mul(jacobian, tf.factor[:, :, None]),
            autodiff.mul(raw_col, tf.factor_grad),
        ),
        tf.offset_grad,
    )
    return out_values, out_jac


def transformed_fields(theta, arch: Architecture, transform: OutputTransform,
                       points) -> tuple[np.ndarray, np.ndarray]:
    """Transformed fields and spatial Jacobians at a batch of points.

    Returns (values (n, 9), jacobian (n, 9, 3)) as plain arrays.
    """
    points = np.asarray(points, dtype=np.float64)
    single = points.ndim == 1
    if single:
        points = points[None, :]
    packed = autodiff.mlp_with_jacobian(np.asarray(theta, dtype=np.float64),
                                        arch.widths, points)
    tf = transform.arrays(points)
    values, jac = apply_transform(tf, packed[:, :, 0], packed[:, :, 1:])
    if single:
        return values[0], jac[0]
    return values, jac
