"""Adam and the plateau learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..numerics import Tensor
from ..numerics.tensor import NumericError

INITIAL_LR = 5e-5
PATIENCE = 5
FACTOR = 10.0


@dataclass
class AdamState:
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray], state: AdamState,
              lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8
              ) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update; returns new parameter arrays and state."""
    if len(params) != len(grads):
        raise ValueError("params and grads differ in length")
    if not state.m:
        state = AdamState(0, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])
    t = state.step + 1
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient")
        m = beta1 * m + (1 - beta1) * g
        v = beta2 * v + (1 - beta2) * g * g
        m_hat = m / (1 - beta1 ** t)
        v_hat = v / (1 - beta2 ** t)
        new_p.append(p - lr * m_hat / (np.sqrt(v_hat) + eps))
        new_m.append(m)
        new_v.append(v)
    return new_p, AdamState(t, new_m, new_v)


class Adam:
    def __init__(self, params: Sequence[Tensor], lr: float = INITIAL_LR, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState()

    def step(self) -> None:
        grads = [np.zeros_like(p.data) if p.grad is None else p.grad for p in self.params]
        new, self.state = adam_step([p.data for p in self.params], grads, self.state, self.lr,
                                    self.beta1, self.beta2, self.eps)
        for p, arr in zip(self.params, new):
            p.data = arr

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None


def lr_schedule(history: Sequence[float], lr: float, patience: int = PATIENCE,
                factor: float = FACTOR) -> float:
    """Learning rate after the latest epoch of ``history`` (lower metric is better).

    The rate drops by ``factor`` each time ``patience`` consecutive epochs pass
    without beating the best value so far; an improvement restarts the count.
    """
    if not history:
        return lr
    best = history[0]
    stale = 0
    for x in history[1:]:
        if x < best:
            best, stale = x, 0
        else:
            stale += 1
    return lr / factor if stale > 0 and stale % patience == 0 else lr


class PlateauScheduler:
    """Stateful form of :func:`lr_schedule`, checkpointable."""

    def __init__(self, lr: float = INITIAL_LR, patience: int = PATIENCE, factor: float = FACTOR):
        self.lr = lr
        self.patience = patience
        self.factor = factor
        self.best: float | None = None
        self.stale = 0

    def update(self, metric: float) -> float:
        if self.best is None or metric < self.best:
            self.best, self.stale = metric, 0
        else:
            self.stale += 1
            if self.stale % self.patience == 0:
                self.lr /= self.factor
        return self.lr

    def state(self) -> dict:
        return {"lr": self.lr, "best": self.best, "stale": self.stale}

    def load(self, state: dict) -> None:
        self.lr, self.best, self.stale = state["lr"], state["best"], state["stale"]
