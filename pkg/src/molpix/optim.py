"""RMSprop and decayed SGD-with-momentum, operating on lists of numpy arrays."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .exceptions import NumericalFault, ShapeMismatch

RMSPROP = "rmsprop"
SGD_MOMENTUM = "sgd-momentum"


@dataclass
class OptimizerState:
    stage: str = RMSPROP
    lr_ini: float = 1e-3
    rho: float = 0.9
    eps: float = 1e-8
    gamma: float = 0.92
    momentum: float = 0.9
    buffers: list[np.ndarray] = field(default_factory=list)
    epoch: int = 0

    def __post_init__(self):
        if self.stage not in (RMSPROP, SGD_MOMENTUM):
            raise ValueError(f"unknown optimizer stage {self.stage!r}")

    def lr(self, epoch: int | None = None) -> float:
        """Stage-2 learning rate lr_ini * gamma**epoch; stage 1 uses lr_ini throughout."""
        if self.stage == RMSPROP:
            return self.lr_ini
        return self.lr_ini * self.gamma ** (self.epoch if epoch is None else epoch)

    def _ensure(self, params: Sequence[np.ndarray]) -> None:
        if not self.buffers:
            self.buffers = [np.zeros_like(p) for p in params]
        elif len(self.buffers) != len(params) or any(b.shape != p.shape for b, p in zip(self.buffers, params)):
            raise ShapeMismatch("optimizer buffers do not match the parameter shapes")


def _check(params: Sequence[np.ndarray]) -> None:
    for p in params:
        if not np.isfinite(p).all():
            raise NumericalFault("optimizer step produced a non-finite parameter")


def rmsprop_step(state: OptimizerState, grads: Sequence[np.ndarray], params: Sequence[np.ndarray]):
    """acc <- rho*acc + (1-rho)*g^2 ; p <- p - lr*g/(sqrt(acc)+eps). Updates in place."""
    state._ensure(params)
    for acc, g, p in zip(state.buffers, grads, params):
        acc *= state.rho
        acc += (1 - state.rho) * g * g
        p -= state.lr_ini * g / (np.sqrt(acc) + state.eps)
    _check(params)
    return params


def sgd_momentum_step(state: OptimizerState, grads: Sequence[np.ndarray], params: Sequence[np.ndarray]):
    """v <- mu*v - lr(epoch)*g ; p <- p + v. Updates in place."""
    state._ensure(params)
    lr = state.lr()
    for v, g, p in zip(state.buffers, grads, params):
        v *= state.momentum
        v -= lr * g
        p += v
    _check(params)
    return params


def step(state: OptimizerState, grads, params):
    if state.stage == RMSPROP:
        return rmsprop_step(state, grads, params)
    return sgd_momentum_step(state, grads, params)
