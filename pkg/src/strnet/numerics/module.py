"""Parameter containers: a small module base class, dense and MLP layers."""

from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from . import ops
from .tensor import ShapeError, Tensor


class Module:
    """Anything holding trainable tensors as attributes (possibly nested)."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        seen: set[int] = set()
        for name, t in self._walk(prefix):
            if id(t) not in seen:
                seen.add(id(t))
                yield name, t

    def _walk(self, prefix: str):
        for name, val in vars(self).items():
            if name.startswith("_"):
                continue
            full = f"{prefix}{name}"
            if isinstance(val, Tensor):
                if val.requires_grad:
                    yield full, val
            elif isinstance(val, Module):
                yield from val.named_parameters(full + ".")
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [t for _, t in self.named_parameters()]

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        missing = sorted(set(params) - set(state))
        unexpected = sorted(set(state) - set(params))
        if missing or unexpected:
            raise KeyError(f"state mismatch: missing {missing}, unexpected {unexpected}")
        for k, t in params.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != t.shape:
                raise ShapeError(f"{k}: checkpoint shape {arr.shape} != parameter shape {t.shape}")
            t.data = arr.copy()

    def zero_grad(self) -> None:
        for t in self.parameters():
            t.grad = None


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator | None = None):
        bound = 1.0 / np.sqrt(in_features)
        w = rng.uniform(-bound, bound, (in_features, out_features)) if rng is not None \
            else np.zeros((in_features, out_features))
        self.weight = Tensor(w, requires_grad=True)
        self.bias = Tensor(np.zeros(out_features), requires_grad=True)

    def __call__(self, x) -> Tensor:
        return ops.linear(x, self.weight, self.bias)


class MLP(Module):
    """(Linear + ReLU) * len(hidden), then a final Linear."""

    def __init__(self, in_features: int, hidden: Sequence[int], out_features: int,
                 rng: np.random.Generator | None = None):
        widths = [in_features, *hidden, out_features]
        self.layers = [Linear(a, b, rng) for a, b in zip(widths[:-1], widths[1:])]

    def __call__(self, x) -> Tensor:
        for layer in self.layers[:-1]:
            x = ops.relu(layer(x))
        return self.layers[-1](x)
