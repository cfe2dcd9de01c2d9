"""Softmax-weighted feature fusion and the self-/cross-integration strategies."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .numerics import (MLP, GruParams, Module, Tensor, as_tensor, concat, global_avg_pool_time,
                       gru_forward, softmax, split, stack, tile_time)
from .numerics.tensor import ShapeError


class IntegrationNet(Module):
    """Pooled features of K inputs -> (FC + ReLU) x L -> FC -> K logits."""

    def __init__(self, num_inputs: int, channels: int, hidden: Sequence[int] | None = None,
                 rng: np.random.Generator | None = None):
        if num_inputs < 1:
            raise ValueError("integration needs at least one input")
        self.num_inputs = num_inputs
        self.channels = channels
        hidden = [2 * channels, 2 * channels] if hidden is None else list(hidden)
        self.mlp = MLP(num_inputs * channels, hidden, num_inputs, rng)

    def named_parameters(self, prefix: str = ""):
        for i, layer in enumerate(self.mlp.layers):
            yield from layer.named_parameters(f"{prefix}fc{i}.")

    def weights(self, features: Sequence) -> Tensor:
        pooled = concat([global_avg_pool_time(f) for f in features], axis=-1)
        return softmax(self.mlp(pooled), axis=-1)

    def __call__(self, features: Sequence) -> Tensor:
        return integrate(features, self)


def integrate(features: Sequence, net: IntegrationNet, return_weights: bool = False):
    """Convex combination of ``features`` with per-window softmax weights.

    Each feature is ``(..., T, C)``; the weights have shape ``(..., K)`` and are
    broadcast over time and channels.
    """
    features = [as_tensor(f) for f in features]
    if len(features) != net.num_inputs:
        raise ShapeError(f"integration net expects {net.num_inputs} inputs, got {len(features)}")
    shape = features[0].shape
    for f in features[1:]:
        if f.shape != shape:
            raise ShapeError(f"integration inputs must share a shape: {shape} vs {f.shape}")
    w = net.weights(features)
    stacked = stack(features, axis=-3)
    out = (stacked * w.reshape(w.shape + (1, 1))).sum(axis=-3)
    return (out, w) if return_weights else out


def fuse_str(F_ttr, stef1, stef2, net: IntegrationNet) -> Tensor:
    return integrate([F_ttr, stef1, stef2], net)


def fuse_final(F_sf, F_str, F_cf, net: IntegrationNet) -> Tensor:
    return integrate([F_sf, F_str, F_cf], net)


class Strategies(Module):
    """Parameters for the split / self-integration / cross-integration pipeline."""

    def __init__(self, channels: int, rng: np.random.Generator | None = None, iterations: int = 3,
                 literal: bool = False, hidden: Sequence[int] | None = None, splits: int = 2):
        if iterations < 1:
            raise ValueError(f"self-integration needs N >= 1, got {iterations}")
        if splits != 2:
            raise ValueError("only a two-way temporal split is supported")
        self.channels = channels
        self.iterations = iterations
        self.literal = literal
        self.splits = splits

        def gru():
            if rng is None:
                return GruParams.zeros(channels, channels)
            return GruParams.init(channels, channels, rng)

        self_k = 1 if literal else 2
        self.gru_c1 = gru()
        self.gru_c2 = gru()
        self.net_self_c1 = IntegrationNet(self_k, channels, hidden, rng)
        self.net_self_c2 = IntegrationNet(self_k, channels, hidden, rng)
        self.net_sf = IntegrationNet(2, channels, hidden, rng)
        self.net_cf = IntegrationNet(2, channels, hidden, rng)

    def __call__(self, F, **kw):
        return integration_strategies(F, self, **kw)


def self_integrate(half: Tensor, gru: GruParams, net: IntegrationNet, iterations: int,
                   literal: bool = False) -> Tensor:
    """Refine an encoded half ``iterations`` times.

    Each step fuses the encoded half with a GRU re-encoding of the previous
    refinement. In literal mode each step integrates the single previous
    refinement, which is the identity.
    """
    current = half
    for _ in range(iterations):
        if literal:
            current = integrate([current], net)
        else:
            current = integrate([half, gru_forward(current, gru)], net)
    return current


def integration_strategies(F, params: Strategies, skip_self: bool = False, lift: bool = True
                           ) -> tuple[Tensor, Tensor]:
    """Return ``(F_sf, F_cf)``; tiled back to the full window length when ``lift``."""
    F = as_tensor(F)
    T = F.shape[-2]
    if T % params.splits:
        raise ShapeError(f"window length {T} is not divisible by {params.splits}")
    h1, h2 = split(F, params.splits, axis=-2)
    c1 = gru_forward(h1, params.gru_c1)
    c2 = gru_forward(h2, params.gru_c2)
    if skip_self:
        r1, r2 = c1, c2
    else:
        r1 = self_integrate(c1, params.gru_c1, params.net_self_c1, params.iterations, params.literal)
        r2 = self_integrate(c2, params.gru_c2, params.net_self_c2, params.iterations, params.literal)
    F_sf = integrate([r1, r2], params.net_sf)
    F_cf = integrate([c1, c2], params.net_cf)
    if lift:
        F_sf, F_cf = tile_time(F_sf, params.splits), tile_time(F_cf, params.splits)
    return F_sf, F_cf
