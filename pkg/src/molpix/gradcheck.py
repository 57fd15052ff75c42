"""Central finite-difference checks for the tensor engine (float64)."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def numerical_gradient(f: Callable[[], float], arr: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """d f / d arr by central differences, perturbing ``arr`` in place."""
    grad = np.zeros_like(arr, dtype=np.float64)
    flat, gflat = arr.reshape(-1), grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = f()
        flat[i] = orig - eps
        down = f()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * eps)
    return grad


def relative_error(a: np.ndarray, b: np.ndarray, floor: float = 1e-6) -> float:
    """max |a - b| / max(|a|, |b|, floor) elementwise."""
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), floor)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def check_gradients(build: Callable[[], Tensor], leaves: Sequence[Tensor], eps: float = 1e-6) -> float:
    """Worst relative error between analytic and numeric gradients of a scalar graph.

    ``build`` must recompute the scalar output from the current leaf data.
    """
    for t in leaves:
        t.requires_grad = True
        t.zero_grad()
    build().backward()
    worst = 0.0
    for t in leaves:
        analytic = np.zeros_like(t.data) if t.grad is None else t.grad
        numeric = numerical_gradient(lambda: float(build().data), t.data, eps)
        worst = max(worst, relative_error(analytic, numeric))
    return worst
