"""Full-batch gradient descent with backtracking line search.

Both trainable models (the fragment classifiers and the span heads) are
optimized through this one routine over a flat parameter vector. The
Armijo backtracking rule guarantees a non-increasing loss sequence; the
accepted step doubles as the next trial so a conservative initial step
only costs a few early iterations.
"""

from __future__ import annotations

import math

import numpy as np

ARMIJO_C = 1e-4
SHRINK = 0.5
GROW = 2.0
MIN_STEP = 1e-20


class TrainingDivergedError(RuntimeError):
    """Loss became NaN/Inf; carries the iteration where it happened."""

    def __init__(self, iteration: int, message: str | None = None):
        self.iteration = iteration
        super().__init__(message or f"training diverged at iteration {iteration}")


def minimize_gd(fun, x0: np.ndarray, *, initial_step: float, max_iters: int,
                tolerance: float):
    """Minimize fun(x) -> (loss, grad) from x0.

    Returns (x, history) with history rows (iteration, loss, grad_norm).
    Raises TrainingDivergedError when the loss ever evaluates to NaN/Inf.
    """
    if initial_step <= 0:
        raise ValueError("initial_step must be positive")
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    x = np.array(x0, dtype=np.float64)
    step = initial_step
    history: list[tuple[int, float, float]] = []

    loss, grad = fun(x)
    if not math.isfinite(loss):
        raise TrainingDivergedError(0)
    it = 0
    while True:
        gnorm = float(np.linalg.norm(grad))
        history.append((it, float(loss), gnorm))
        if gnorm <= tolerance or it >= max_iters:
            break
        trial = step
        gsq = gnorm * gnorm
        cand = None
        while trial >= MIN_STEP:
            x_try = x - trial * grad
            try_loss, try_grad = fun(x_try)
            if math.isfinite(try_loss) and try_loss <= loss - ARMIJO_C * trial * gsq:
                cand = (x_try, try_loss, try_grad)
                break
            trial *= SHRINK
        if cand is None:
            # no productive step exists at float precision; treat as converged
            break
        x, loss, grad = cand
        step = trial * GROW
        it += 1
    return x, history


def finite_difference_grad(loss_fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar loss, coordinate by coordinate."""
    grad = np.empty_like(x, dtype=np.float64)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += step
        xm[i] -= step
        grad[i] = (loss_fn(xp) - loss_fn(xm)) / (2 * step)
    return grad


def gradient_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    """Norm-based relative disagreement between two gradient estimates."""
    denom = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)), 1e-12)
    return float(np.linalg.norm(analytic - numeric)) / denom
