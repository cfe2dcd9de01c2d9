"""Temporal tendency reasoning.

The window is cut into ``k`` equal temporal fragments. The first passes
through untouched; every later fragment goes through its own GRU and is added
frame-by-frame to the previous fragment's output, so information cascades
forward across fragments. The concatenated fragment outputs are added back to
the input as a global residual.
"""

from __future__ import annotations

import numpy as np

from .numerics import GruParams, Module, Tensor, concat, gru_forward, split
from .numerics.tensor import ShapeError


def split_fragments(F, k: int = 4) -> list[Tensor]:
    """Contiguous, order-preserving split of ``(..., T, C)`` into ``k`` pieces."""
    T = F.shape[-2]
    if k < 1 or T % k:
        raise ShapeError(f"sequence length {T} is not divisible into {k} fragments")
    return split(F, k, axis=-2)


class TTR(Module):
    def __init__(self, channels: int, rng: np.random.Generator | None = None, fragments: int = 4,
                 share_weights: bool = False):
        if fragments < 2:
            raise ValueError("TTR needs at least two fragments")
        self.fragments = fragments
        self.channels = channels

        def make():
            if rng is None:
                return GruParams.zeros(channels, channels)
            return GruParams.init(channels, channels, rng)

        first = make()
        self.grus = [first if share_weights or i == 0 else make() for i in range(fragments - 1)]

    def named_parameters(self, prefix: str = ""):
        # checkpoint names follow the branch index: gru2, gru3, ...
        seen = set()
        for i, g in enumerate(self.grus):
            if id(g) in seen:
                continue
            seen.add(id(g))
            yield from g.named_parameters(f"{prefix}gru{i + 2}.")

    def __call__(self, F) -> Tensor:
        return ttr_forward(F, self)


def ttr_forward(F, params: TTR) -> Tensor:
    frags = split_fragments(F, params.fragments)
    outs = [frags[0]]
    for frag, gru in zip(frags[1:], params.grus):
        outs.append(gru_forward(frag, gru) + outs[-1])
    return F + concat(outs, axis=-2)
