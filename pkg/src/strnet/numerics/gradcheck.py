from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, no_grad


@dataclass
class GradCheckResult:
    max_rel_error: float
    worst_input: int
    worst_index: tuple[int, ...]
    analytic: float
    numeric: float

    def __str__(self) -> str:
        return (f"max rel err {self.max_rel_error:.3e} at input {self.worst_input} "
                f"index {self.worst_index} (analytic {self.analytic:.6e}, "
                f"numeric {self.numeric:.6e})")


def grad_check(f: Callable[..., Tensor], points: Tensor | Sequence[Tensor], eps: float = 1e-5,
               floor: float = 1e-6) -> GradCheckResult:
    """Compare tape gradients with central differences, coordinate by coordinate.

    ``f`` receives the point tensors and must return a scalar tensor. The
    relative error of a coordinate is ``|a - n| / max(|a|, |n|, floor)``.
    """
    single = isinstance(points, Tensor)
    pts = [points] if single else list(points)
    for p in pts:
        p.data = np.ascontiguousarray(p.data)
        p.requires_grad = True
        p.grad = None
    out = f(*pts)
    out.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in pts]

    worst = GradCheckResult(0.0, 0, (), 0.0, 0.0)
    with no_grad():
        worst = _scan(f, pts, analytic, eps, floor, worst)
    for p in pts:
        p.grad = None
    return worst


def _scan(f, pts, analytic, eps, floor, worst):
    for k, p in enumerate(pts):
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            fp = f(*pts).item()
            flat[i] = orig - eps
            fm = f(*pts).item()
            flat[i] = orig
            num = (fp - fm) / (2 * eps)
            ana = analytic[k].reshape(-1)[i]
            rel = abs(ana - num) / max(abs(ana), abs(num), floor)
            if rel > worst.max_rel_error or worst.worst_index == ():
                worst = GradCheckResult(rel, k, tuple(int(j) for j in np.unravel_index(i, p.shape)),
                                         float(ana), float(num))
    return worst
