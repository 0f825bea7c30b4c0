"""Reverse-mode differentiation engine for first-order field-residual losses.

The engine is a small tape over float64 numpy arrays.  Generic elementwise
and reduction nodes cover the residual algebra; the one specialized node,
``mlp_with_jacobian``, evaluates a tanh network together with its spatial
Jacobian in a single forward-tangent sweep and implements the exact adjoint
of that sweep, so losses may depend on both network outputs and their first
spatial derivatives while gradients with respect to the parameters stay
exact to rounding.

Evaluation order is fixed by the tape, so repeated evaluations with
identical inputs are bitwise identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

# Backward-pass guard for sqrt at 0: the derivative denominator is floored at
# sqrt(GUARD) so chains like sqrt(a^2+b^2) propagate an exact zero gradient
# from the origin instead of nan.
GUARD = 1e-12


class ConfigurationError(ValueError):
    """Raised when shapes, counts or options are inconsistent."""


class ConstructionError(TypeError):
    """Raised when an objective is not composed from supported operations."""


# ---------------------------------------------------------------------------
# tape
# ---------------------------------------------------------------------------


class Var:
    """Node in the reverse-mode tape: a float64 array plus its adjoint."""

    __slots__ = ("value", "grad", "_parents", "_backward")

    # keep numpy from hijacking ndarray (op) Var; we want __radd__ and friends
    __array_ufunc__ = None

    def __init__(self, value, parents=(), backward=None):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = None
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    def _accumulate(self, g):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return neg(self)

    def __getitem__(self, key):
        return take(self, key)

    def __repr__(self):
        return f"Var(shape={self.value.shape})"


def value_of(x):
    """Underlying float64 array of a Var or array-like."""
    if isinstance(x, Var):
        return x.value
    return np.asarray(x, dtype=np.float64)


def _toposort(root: Var):
    seen = set()
    order = []
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if id(p) not in seen:
                stack.append((p, False))
    order.reverse()  # root first
    return order


def backward(root: Var) -> None:
    """Reverse accumulation from a scalar root; fills .grad on reachable leaves."""
    if not isinstance(root, Var):
        raise ConstructionError("backward expects a Var produced by tape operations")
    if root.value.shape != ():
        raise ConstructionError("backward root must be a scalar")
    root.grad = np.ones((), dtype=np.float64)
    for node in _toposort(root):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum gradient g down to `shape` (inverse of numpy broadcasting)."""
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise / structural operations (polymorphic: plain arrays pass through)
# ---------------------------------------------------------------------------


def add(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.asarray(a, dtype=np.float64) + np.asarray(b, dtype=np.float64)
    av, bv = value_of(a), value_of(b)
    parents = tuple(x for x in (a, b) if isinstance(x, Var))

    def bwd(g, a=a, b=b, ash=av.shape, bsh=bv.shape):
        if isinstance(a, Var):
            a._accumulate(_unbroadcast(g, ash))
        if isinstance(b, Var):
            b._accumulate(_unbroadcast(g, bsh))

    return Var(av + bv, parents, bwd)


def neg(a):
    if not isinstance(a, Var):
        return -np.asarray(a, dtype=np.float64)

    def bwd(g):
        a._accumulate(-g)

    return Var(-a.value, (a,), bwd)


def sub(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    av, bv = value_of(a), value_of(b)
    parents = tuple(x for x in (a, b) if isinstance(x, Var))

    def bwd(g, ash=av.shape, bsh=bv.shape):
        if isinstance(a, Var):
            a._accumulate(_unbroadcast(g, ash))
        if isinstance(b, Var):
            b._accumulate(_unbroadcast(-g, bsh))

    return Var(av - bv, parents, bwd)


def mul(a, b):
    if not isinstance(a, Var) and not isinstance(b, Var):
        return np.asarray(a, dtype=np.float64) * np.asarray(b, dtype=np.float64)
    av, bv = value_of(a), value_of(b)
    parents = tuple(x for x in (a, b) if isinstance(x, Var))

    def bwd(g, ash=av.shape, bsh=bv.shape):
        if isinstance(a, Var):
            a._accumulate(_unbroadcast(g * bv, ash))
        if isinstance(b, Var):
            b._accumulate(_unbroadcast(g * av, bsh))

    return Var(av * bv, parents, bwd)


def sqrt(a):
    """Elementwise sqrt; the backward denominator is floored at sqrt(GUARD).

    Forward values are exact.  Only the derivative at exactly 0 is guarded,
    so compositions such as the Fischer-Burmeister residual get a finite
    (and, for its square, exactly zero) gradient at the origin.
    """
    if not isinstance(a, Var):
        arr = np.asarray(a, dtype=np.float64)
        if np.any(arr < 0.0):
            raise ConfigurationError("sqrt requires nonnegative inputs")
        return np.sqrt(arr)
    if np.any(a.value < 0.0):
        raise ConfigurationError("sqrt requires nonnegative inputs")
    root = np.sqrt(a.value)

    def bwd(g):
        denom = np.where(root == 0.0, np.sqrt(GUARD), root)
        a._accumulate(g * (0.5 / denom))

    return Var(root, (a,), bwd)


def take(a, key):
    """Basic (slice/integer) indexing into a Var."""
    if not isinstance(a, Var):
        return np.asarray(a, dtype=np.float64)[key]
    out = a.value[key]

    def bwd(g):
        full = np.zeros_like(a.value)
        full[key] = g
        a._accumulate(full)

    return Var(out, (a,), bwd)


def reshape(a, shape):
    if not isinstance(a, Var):
        return np.asarray(a, dtype=np.float64).reshape(shape)
    old = a.value.shape

    def bwd(g):
        a._accumulate(np.asarray(g).reshape(old))

    return Var(a.value.reshape(shape), (a,), bwd)


def matmul_const(a, m):
    """Contract the last axis of `a` with a constant matrix (K,L) or vector (K,)."""
    m = np.asarray(m, dtype=np.float64)
    if not isinstance(a, Var):
        return np.asarray(a, dtype=np.float64) @ m
    out = a.value @ m

    def bwd(g):
        if m.ndim == 1:
            a._accumulate(np.asarray(g)[..., None] * m)
        else:
            a._accumulate(np.asarray(g) @ m.T)

    return Var(out, (a,), bwd)


def bmatvec_const(a, mats):
    """Per-row matrix-vector product with constant matrices: (n,i,k),(n,k)->(n,i)."""
    mats = np.asarray(mats, dtype=np.float64)
    if not isinstance(a, Var):
        return np.einsum("nik,nk->ni", mats, np.asarray(a, dtype=np.float64))
    out = np.einsum("nik,nk->ni", mats, a.value)

    def bwd(g):
        a._accumulate(np.einsum("nik,ni->nk", mats, np.asarray(g)))

    return Var(out, (a,), bwd)


def total_sum(a):
    if not isinstance(a, Var):
        return np.asarray(a, dtype=np.float64).sum()

    def bwd(g):
        a._accumulate(np.broadcast_to(g, a.value.shape).copy())

    return Var(a.value.sum(), (a,), bwd)


def mean(a):
    if not isinstance(a, Var):
        return np.asarray(a, dtype=np.float64).mean()
    n = a.value.size

    def bwd(g):
        a._accumulate(np.full(a.value.shape, float(g) / n))

    return Var(a.value.mean(), (a,), bwd)


def weighted_square_sum(a, coeff):
    """Scalar sum(coeff * a * a) with constant coeff broadcastable to a.

    Every loss term is a weighted mean of squared residuals; folding the
    weight and the 1/count into `coeff` keeps each term a single node.
    """
    coeff = np.asarray(coeff, dtype=np.float64)
    if not isinstance(a, Var):
        av = np.asarray(a, dtype=np.float64)
        return float(np.sum(coeff * av * av))
    av = a.value

    def bwd(g):
        a._accumulate((2.0 * float(g)) * coeff * av)

    return Var(np.sum(coeff * av * av), (a,), bwd)


# ---------------------------------------------------------------------------
# network parameter layout
# ---------------------------------------------------------------------------


def layer_dims(widths: Sequence[int]) -> list[tuple[int, int]]:
    """(fan_in, fan_out) per affine layer of an MLP with the given widths."""
    widths = list(widths)
    if len(widths) < 2 or any(w <= 0 for w in widths):
        raise ConfigurationError(f"invalid layer widths {widths}")
    return [(widths[i], widths[i + 1]) for i in range(len(widths) - 1)]


def param_count(widths: Sequence[int]) -> int:
    return sum(fi * fo + fo for fi, fo in layer_dims(widths))


def split_params(theta: np.ndarray, widths: Sequence[int]):
    """Views (W, b) per layer into the flat parameter vector.

    Layout: for each layer in order, the weight matrix (fan_in, fan_out)
    row-major, then the bias (fan_out,).
    """
    theta = np.asarray(theta)
    dims = layer_dims(widths)
    expected = sum(fi * fo + fo for fi, fo in dims)
    if theta.ndim != 1 or theta.size != expected:
        raise ConfigurationError(
            f"parameter vector has size {theta.size}, architecture needs {expected}"
        )
    out = []
    pos = 0
    for fi, fo in dims:
        w = theta[pos : pos + fi * fo].reshape(fi, fo)
        pos += fi * fo
        b = theta[pos : pos + fo]
        pos += fo
        out.append((w, b))
    return out


# ---------------------------------------------------------------------------
# fused MLP + spatial Jacobian node
# ---------------------------------------------------------------------------


def _mlp_forward_tangent(theta, widths, x, keep_cache):
    """Forward pass carrying input-direction tangents.

    H: layer activations (n, width).  T: tangents dH/dx (n, d_in, width),
    seeded with the identity, so after the last affine layer T is the full
    spatial Jacobian.  Batched matmuls are flattened to 2-D GEMMs.
    """
    params = split_params(theta, widths)
    n, d = x.shape
    h = x
    t = np.broadcast_to(np.eye(d), (n, d, d)).reshape(n * d, d)
    cache = [] if keep_cache else None
    for w, b in params[:-1]:
        a = h @ w + b
        hn = np.tanh(a)
        dn = 1.0 - hn * hn
        s = t @ w  # (n*d, fan_out)
        tn = (dn[:, None, :] * s.reshape(n, d, -1)).reshape(n * d, -1)
        if keep_cache:
            cache.append((h, t, hn, dn, s))
        h, t = hn, tn
    w, b = params[-1]
    y = h @ w + b
    jac = (t @ w).reshape(n, d, -1)  # (n, d_in, d_out)
    return y, jac, (cache, h, t)


def _mlp_backward(theta, widths, caches, ybar, jbar):
    """Adjoint of the forward-tangent sweep; returns dL/dtheta.

    ybar: (n, d_out) adjoint of outputs.  jbar: (n, d_in, d_out) adjoint of
    the spatial Jacobian.  Derivation mirrors the forward recurrences
    A = HW + b, H' = tanh(A), S = TW, T' = (1 - H'^2) * S.
    """
    params = split_params(theta, widths)
    grad = np.zeros_like(theta)
    gparams = split_params(grad, widths)
    cache, h_last, t_last = caches
    n = ybar.shape[0]
    d = t_last.shape[0] // n

    w_out, _ = params[-1]
    gw, gb = gparams[-1]
    jbar2 = jbar.reshape(n * d, -1)
    gw += h_last.T @ ybar
    gw += t_last.T @ jbar2
    gb += ybar.sum(axis=0)
    hbar = ybar @ w_out.T
    tbar = jbar2 @ w_out.T

    for (w, _), (gw, gb), (hp, tp, hn, dn, s) in zip(
        reversed(params[:-1]), reversed(gparams[:-1]), reversed(cache)
    ):
        sbar = (dn[:, None, :] * tbar.reshape(n, d, -1)).reshape(n * d, -1)
        dbar = (s.reshape(n, d, -1) * tbar.reshape(n, d, -1)).sum(axis=1)
        hbar += (-2.0 * hn) * dbar
        abar = dn * hbar
        gw += hp.T @ abar
        gw += tp.T @ sbar
        gb += abar.sum(axis=0)
        hbar = abar @ w.T
        tbar = sbar @ w.T
    return grad


def mlp_with_jacobian(theta, widths: Sequence[int], points: np.ndarray):
    """Evaluate a tanh MLP and its spatial Jacobian at many points.

    Returns an array (or Var) of shape (n, d_out, 1 + d_in): slot 0 holds the
    output values, slots 1..d_in the derivatives with respect to each input
    coordinate.  When `theta` is a Var the result participates in the tape
    and backward propagates exact parameter gradients for any downstream
    scalar built from both values and derivatives.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != widths[0]:
        raise ConfigurationError(
            f"points must have shape (n, {widths[0]}), got {points.shape}"
        )
    is_var = isinstance(theta, Var)
    theta_val = value_of(theta)
    y, jac, caches = _mlp_forward_tangent(theta_val, widths, points, keep_cache=is_var)
    n, d_out = y.shape
    d_in = points.shape[1]
    packed = np.empty((n, d_out, 1 + d_in))
    packed[:, :, 0] = y
    packed[:, :, 1:] = jac.transpose(0, 2, 1)
    if not is_var:
        return packed

    def bwd(g):
        g = np.asarray(g)
        ybar = np.ascontiguousarray(g[:, :, 0])
        jbar = np.ascontiguousarray(g[:, :, 1:].transpose(0, 2, 1))
        theta._accumulate(_mlp_backward(theta_val, widths, caches, ybar, jbar))

    return Var(packed, (theta,), bwd)


def mlp_forward(theta, widths: Sequence[int], points: np.ndarray) -> np.ndarray:
    """Plain MLP evaluation (no tape, no Jacobian): (n, d_in) -> (n, d_out)."""
    points = np.ascontiguousarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != widths[0]:
        raise ConfigurationError(
            f"points must have shape (n, {widths[0]}), got {points.shape}"
        )
    h = points
    params = split_params(value_of(theta), widths)
    for w, b in params[:-1]:
        h = np.tanh(h @ w + b)
    w, b = params[-1]
    return h @ w + b


@dataclass(frozen=True)
class JacobianAtPoint:
    """Network outputs and their spatial derivatives at one point."""

    values: np.ndarray  # (d_out,)
    d_dx: np.ndarray  # (d_out, d_in)


def evaluate_with_jacobian(theta, widths: Sequence[int], point) -> JacobianAtPoint:
    """Outputs and exact first spatial derivatives at a single point."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (widths[0],):
        raise ConfigurationError(f"point must have shape ({widths[0]},), got {point.shape}")
    packed = mlp_with_jacobian(value_of(theta), widths, point[None, :])
    return JacobianAtPoint(values=packed[0, :, 0].copy(), d_dx=packed[0, :, 1:].copy())


# ---------------------------------------------------------------------------
# loss gradients and finite-difference verification
# ---------------------------------------------------------------------------


def loss_gradient(theta, objective: Callable[[Var], Var]) -> tuple[float, np.ndarray]:
    """Value and exact gradient of a tape-composed scalar objective.

    `objective` receives the parameters as a Var and must return a scalar
    Var built from engine operations.
    """
    leaf = Var(np.asarray(theta, dtype=np.float64))
    out = objective(leaf)
    if not isinstance(out, Var):
        raise ConstructionError("objective must return a Var (got a plain value)")
    if out.value.shape != ():
        raise ConstructionError("objective must return a scalar")
    backward(out)
    grad = leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value)
    return float(out.value), grad


def directional_derivative_fd(f: Callable[[np.ndarray], float], theta, direction,
                              h: float = 1e-4) -> float:
    """Central finite difference of f along a direction."""
    theta = np.asarray(theta, dtype=np.float64)
    direction = np.asarray(direction, dtype=np.float64)
    return (f(theta + h * direction) - f(theta - h * direction)) / (2.0 * h)


def check_gradient(f: Callable[[np.ndarray], float], grad: np.ndarray, theta,
                   directions, h: float = 1e-4, rtol: float = 1e-5,
                   atol: float = 1e-8) -> float:
    """Compare grad . v against central differences along each direction.

    Returns the worst relative error (with an absolute floor `atol` guarding
    near-zero derivatives); raises AssertionError when it exceeds rtol.
    """
    grad = np.asarray(grad, dtype=np.float64)
    worst = 0.0
    for v in directions:
        v = np.asarray(v, dtype=np.float64)
        fd = directional_derivative_fd(f, theta, v, h=h)
        an = float(grad @ v)
        err = abs(an - fd) / max(abs(fd), abs(an), atol)
        worst = max(worst, err)
        if err > rtol:
            raise AssertionError(
                f"gradient check failed: analytic {an:.12e} vs finite-difference "
                f"{fd:.12e} (relative error {err:.3e} > {rtol:.1e})"
            )
    return worst
