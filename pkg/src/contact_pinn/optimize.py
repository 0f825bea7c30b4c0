"""Training drivers: Adam warm-up followed by L-BFGS refinement.

Both optimizers consume a deterministic provider callable
theta -> (LossBreakdown, gradient) and keep a per-step log.  The L-BFGS
refinement uses the two-loop recursion with a strong-Wolfe line search;
termination is one of three recorded reasons: gradient norm below
tolerance, loss change below a machine-epsilon-scaled tolerance, or the
iteration cap.  A failed line search falls back to one steepest-descent
attempt; if that fails too the run stops under the loss-change reason (no
further decrease is achievable at working precision).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .autodiff import ConfigurationError
from .loss import LossBreakdown

Provider = Callable[[np.ndarray], tuple[LossBreakdown, np.ndarray]]

MACHINE_EPS = float(np.finfo(np.float64).eps)

REASON_GRADIENT = "gradient_tol"
REASON_LOSS_CHANGE = "loss_change_tol"
REASON_MAX_ITERATIONS = "max_iterations"


class TrainingDiverged(RuntimeError):
    """Loss or gradient became non-finite during optimization."""


@dataclass(frozen=True)
class AdamConfig:
    learning_rate: float = 0.001
    epochs: int = 2000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigurationError("epochs must be >= 0")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("betas must lie in [0, 1)")


@dataclass(frozen=True)
class LbfgsConfig:
    memory: int = 50
    max_iterations: int = 15000
    gradient_tol: float = 1e-8
    loss_change_tol: float = 10.0 * MACHINE_EPS  # scaled by max(|loss|, 1)
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.9
    max_line_search_evals: int = 25

    def __post_init__(self):
        if self.memory < 1:
            raise ConfigurationError("memory must be >= 1")
        if self.gradient_tol <= 0 or self.loss_change_tol <= 0:
            raise ConfigurationError("tolerances must be positive")
        if not 0 < self.wolfe_c1 < self.wolfe_c2 < 1:
            raise ConfigurationError("Wolfe constants need 0 < c1 < c2 < 1")


@dataclass
class LogRow:
    step: int
    phase: str
    breakdown: LossBreakdown
    grad_norm: float
    step_length: float


@dataclass
class TrainingLog:
    rows: list = field(default_factory=list)

    HEADER = ("step,phase,pde_momentum,pde_coupling,dirichlet,neumann,data,"
              "sliding,kkt,total,grad_norm,step_length")

    def append(self, step: int, phase: str, breakdown: LossBreakdown,
               grad_norm: float, step_length: float) -> None:
        self.rows.append(LogRow(step, phase, breakdown, float(grad_norm),
                                float(step_length)))

    def extend(self, other: "TrainingLog") -> None:
        self.rows.extend(other.rows)

    def write_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.HEADER + "\n")
            for r in self.rows:
                b = r.breakdown
                fh.write(
                    f"{r.step},{r.phase},{b.pde_momentum:.17g},{b.pde_coupling:.17g},"
                    f"{b.dirichlet:.17g},{b.neumann:.17g},{b.data:.17g},{b.sliding:.17g},"
                    f"{b.kkt:.17g},{b.total:.17g},{r.grad_norm:.17g},{r.step_length:.17g}\n")


def _check_finite(value: float, grad: np.ndarray, phase: str, step: int) -> None:
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise TrainingDiverged(f"non-finite loss or gradient at {phase} step {step}")


def adam_run(provider: Provider, theta0: np.ndarray, config: AdamConfig = AdamConfig(),
             log: Optional[TrainingLog] = None, log_every: int = 1,
             step_offset: int = 0) -> tuple[np.ndarray, TrainingLog]:
    """Bias-corrected Adam for a fixed epoch count (full-batch)."""
    if log is None:
        log = TrainingLog()
    theta = np.array(theta0, dtype=np.float64, copy=True)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    lr, b1, b2, eps = config.learning_rate, config.beta1, config.beta2, config.eps
    for step in range(1, config.epochs + 1):
        bd, grad = provider(theta)
        _check_finite(bd.total, grad, "adam", step)
        m = b1 * m + (1.0 - b1) * grad
        v = b2 * v + (1.0 - b2) * grad * grad
        m_hat = m / (1.0 - b1**step)
        v_hat = v / (1.0 - b2**step)
        delta = lr * m_hat / (np.sqrt(v_hat) + eps)
        theta -= delta
        if step % log_every == 0 or step == config.epochs:
            log.append(step_offset + step, "adam", bd, np.linalg.norm(grad),
                       float(np.max(np.abs(delta))) if delta.size else 0.0)
    return theta, log


def _two_loop(grad: np.ndarray, memory: list[tuple[np.ndarray, np.ndarray, float]]) -> np.ndarray:
    """H . grad via the two-loop recursion with the standard gamma scaling."""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(memory):
        a = rho * (s @ q)
        q -= a * y
        alphas.append(a)
    if memory:
        s, y, _ = memory[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(memory, reversed(alphas)):
        b = rho * (y @ q)
        q += (a - b) * s
    return q


def _cubic_argmin(a, fa, ga, b, fb, gb) -> Optional[float]:
    """Minimizer of the cubic interpolant through two (value, slope) pairs."""
    d1 = ga + gb - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - ga * gb
    if disc < 0.0:
        return None
    d2 = np.sqrt(disc)
    if b < a:
        d2 = -d2
    denom = gb - ga + 2.0 * d2
    if denom == 0.0:
        return None
    t = b - (b - a) * (gb + d2 - d1) / denom
    if not np.isfinite(t):
        return None
    return float(t)


class _LineSearchFailed(Exception):
    pass


def _strong_wolfe(fg, f0, g0, direction, c1, c2, max_evals):
    """Strong-Wolfe line search (bracket then zoom) along a descent direction.

    fg(t) evaluates theta + t*direction and returns (f, grad, breakdown).
    Returns (t, f, grad, breakdown, evals).
    """
    dphi0 = float(g0 @ direction)
    if dphi0 >= 0.0:
        raise _LineSearchFailed("not a descent direction")

    def phi(t):
        f, g, bd = fg(t)
        return f, float(g @ direction), g, bd

    evals = 0
    t_prev, f_prev, dphi_prev = 0.0, f0, dphi0
    t = 1.0
    t_max = 1e10
    bracket = None
    for _ in range(max_evals):
        f_t, dphi_t, g_t, bd_t = phi(t)
        evals += 1
        if not np.isfinite(f_t):
            # shrink back into the finite region
            bracket = (t_prev, f_prev, dphi_prev, t, f_t, dphi_t)
            break
        if f_t > f0 + c1 * t * dphi0 or (evals > 1 and f_t >= f_prev):
            bracket = (t_prev, f_prev, dphi_prev, t, f_t, dphi_t)
            break
        if abs(dphi_t) <= -c2 * dphi0:
            return t, f_t, g_t, bd_t, evals
        if dphi_t >= 0.0:
            bracket = (t, f_t, dphi_t, t_prev, f_prev, dphi_prev)
            break
        t_prev, f_prev, dphi_prev = t, f_t, dphi_t
        t = min(2.0 * t, t_max)
    if bracket is None:
        raise _LineSearchFailed("bracketing exhausted the evaluation budget")

    lo, f_lo, dphi_lo, hi, f_hi, dphi_hi = bracket
    for _ in range(max_evals - evals):
        span = hi - lo
        t = _cubic_argmin(lo, f_lo, dphi_lo, hi, f_hi, dphi_hi)
        lo_t, hi_t = (lo, hi) if lo < hi else (hi, lo)
        margin = 0.1 * abs(span)
        if t is None or not (lo_t + margin <= t <= hi_t - margin):
            t = 0.5 * (lo + hi)
        f_t, dphi_t, g_t, bd_t = phi(t)
        evals += 1
        if not np.isfinite(f_t) or f_t > f0 + c1 * t * dphi0 or f_t >= f_lo:
            hi, f_hi, dphi_hi = t, f_t, dphi_t
        else:
            if abs(dphi_t) <= -c2 * dphi0:
                return t, f_t, g_t, bd_t, evals
            if dphi_t * (hi - lo) >= 0.0:
                hi, f_hi, dphi_hi = lo, f_lo, dphi_lo
            lo, f_lo, dphi_lo = t, f_t, dphi_t
        if abs(hi - lo) < 1e-16 * max(1.0, abs(lo)):
            break
    raise _LineSearchFailed("zoom exhausted the evaluation budget")


def lbfgs_run(provider: Provider, theta0: np.ndarray,
              config: LbfgsConfig = LbfgsConfig(),
              log: Optional[TrainingLog] = None, log_every: int = 1,
              step_offset: int = 0) -> tuple[np.ndarray, TrainingLog, str]:
    """L-BFGS with strong-Wolfe line search; returns (theta, log, reason)."""
    if log is None:
        log = TrainingLog()
    theta = np.array(theta0, dtype=np.float64, copy=True)
    bd, grad = provider(theta)
    _check_finite(bd.total, grad, "lbfgs", 0)
    f = bd.total
    memory: list[tuple[np.ndarray, np.ndarray, float]] = []
    reason = REASON_MAX_ITERATIONS

    for it in range(1, config.max_iterations + 1):
        if np.linalg.norm(grad) <= config.gradient_tol:
            reason = REASON_GRADIENT
            break

        direction = -_two_loop(grad, memory)
        if direction @ grad >= 0.0:  # numerically lost curvature; reset
            memory.clear()
            direction = -grad

        def fg(t):
            bd_t, g_t = provider(theta + t * direction)
            return bd_t.total, g_t, bd_t

        tried_steepest = np.array_equal(direction, -grad)
        try:
            t, f_new, g_new, bd_new, _ = _strong_wolfe(
                fg, f, grad, direction, config.wolfe_c1, config.wolfe_c2,
                config.max_line_search_evals)
        except _LineSearchFailed:
            if tried_steepest:
                reason = REASON_LOSS_CHANGE
                break
            memory.clear()
            direction = -grad
            try:
                t, f_new, g_new, bd_new, _ = _strong_wolfe(
                    fg, f, grad, direction, config.wolfe_c1, config.wolfe_c2,
                    config.max_line_search_evals)
            except _LineSearchFailed:
                reason = REASON_LOSS_CHANGE
                break

        step_vec = t * direction
        theta = theta + step_vec
        _check_finite(f_new, g_new, "lbfgs", it)
        s = step_vec
        y = g_new - grad
        sy = s @ y
        if sy > 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
            memory.append((s, y, 1.0 / sy))
            if len(memory) > config.memory:
                memory.pop(0)

        if it % log_every == 0:
            log.append(step_offset + it, "lbfgs", bd_new, np.linalg.norm(g_new),
                       float(np.max(np.abs(step_vec))))
        converged_f = abs(f_new - f) <= config.loss_change_tol * max(abs(f_new), 1.0)
        f, grad, bd = f_new, g_new, bd_new
        if converged_f:
            reason = REASON_LOSS_CHANGE
            break
        if np.linalg.norm(grad) <= config.gradient_tol:
            reason = REASON_GRADIENT
            break

    return theta, log, reason


@dataclass
class TrainResult:
    theta: np.ndarray
    log: TrainingLog
    termination_reason: str


def train(provider: Provider, theta0: np.ndarray,
          adam: AdamConfig = AdamConfig(),
          lbfgs: LbfgsConfig = LbfgsConfig(),
          log_every: int = 1, log: Optional[TrainingLog] = None) -> TrainResult:
    """Adam warm-up then L-BFGS refinement from an initial parameter vector.

    A caller-supplied log is filled in place, so partial rows survive a
    TrainingDiverged abort.
    """
    if log is None:
        log = TrainingLog()
    theta, log = adam_run(provider, theta0, adam, log=log, log_every=log_every)
    theta, log, reason = lbfgs_run(provider, theta, lbfgs, log=log,
                                   log_every=log_every, step_offset=adam.epochs)
    return TrainResult(theta=theta, log=log, termination_reason=reason)


# -- checkpointing -------------------------------------------------------


def save_checkpoint(path, theta: np.ndarray, arch, seed: int) -> None:
    """Raw little-endian float64 parameters plus a JSON sidecar."""
    theta = np.ascontiguousarray(theta, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(theta.tobytes())
    sidecar = {
        "format": "raw float64 little-endian",
        "n_params": int(theta.size),
        "architecture": {
            "input_dim": arch.input_dim,
            "hidden_layers": arch.hidden_layers,
            "hidden_width": arch.hidden_width,
            "output_dim": arch.output_dim,
            "activation": arch.activation,
        },
        "seed": int(seed),
    }
    with open(str(path) + ".json", "w") as fh:
        json.dump(sidecar, fh, indent=2)
        fh.write("\n")


def load_checkpoint(path) -> tuple[np.ndarray, dict]:
    """Parameters and sidecar metadata saved by save_checkpoint."""
    with open(str(path) + ".json") as fh:
        sidecar = json.load(fh)
    raw = np.fromfile(path, dtype="<f8")
    if raw.size != sidecar["n_params"]:
        raise ConfigurationError(
            f"checkpoint holds {raw.size} parameters, sidecar says {sidecar['n_params']}")
    return raw.astype(np.float64), sidecar
