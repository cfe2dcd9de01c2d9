"""Spatial tendency enhancing: time-domain and frequency-domain channel gates.

Both branches turn a per-channel offset map into a gate in (0, 1) through
temporal average pooling and a sigmoid, then scale a GRU encoding of the
window with it. The time branch measures how a learned temporal convolution
changes adjacent-frame differences; the frequency branch measures how far the
GRU moves the sequence away from its input and gates the GRU encoding of the
FFT round-tripped sequence.
"""

from __future__ import annotations

import numpy as np

from .numerics import (GruParams, Module, Tensor, conv1d_same, diff_time, fft_roundtrip,
                       global_avg_pool_time, gru_forward, sigmoid, stack)
from .numerics.fft import MASK_MODES
from .numerics.gru import uniform_init
from .numerics.tensor import ShapeError


class Conv1d(Module):
    def __init__(self, channels: int, width: int = 3, rng: np.random.Generator | None = None):
        if width % 2 == 0:
            raise ShapeError(f"kernel width must be odd, got {width}")
        shape = (width, channels, channels)
        k = uniform_init(rng, width * channels, shape) if rng is not None else np.zeros(shape)
        self.kernels = Tensor(k, requires_grad=True)
        self.bias = Tensor(np.zeros(channels), requires_grad=True)

    def __call__(self, x) -> Tensor:
        return conv1d_same(x, self.kernels, self.bias)


class STE(Module):
    def __init__(self, channels: int, rng: np.random.Generator | None = None, kernel_width: int = 3,
                 mask_mode: str = "off", mask_q: float = 0.5, share_gru: bool = False):
        if mask_mode not in MASK_MODES:
            raise ValueError(f"unknown mask mode {mask_mode!r}")
        self.channels = channels
        self.mask_mode = mask_mode
        self.mask_q = mask_q
        self.conv = Conv1d(channels, kernel_width, rng)
        make = (lambda: GruParams.init(channels, channels, rng)) if rng is not None \
            else (lambda: GruParams.zeros(channels, channels))
        self.gru_time = make()
        self.gru_freq = self.gru_time if share_gru else make()

    def named_parameters(self, prefix: str = ""):
        yield from self.conv.named_parameters(prefix + "conv.")
        yield from self.gru_time.named_parameters(prefix + "gru_time.")
        if self.gru_freq is not self.gru_time:
            yield from self.gru_freq.named_parameters(prefix + "gru_freq.")

    def __call__(self, F) -> tuple[Tensor, Tensor]:
        return time_domain_enhance(F, self), freq_domain_enhance(F, self)


def _channel_gate(offset: Tensor) -> Tensor:
    """sigmoid(temporal mean) reshaped to broadcast over time: ``(..., 1, C)``."""
    a = sigmoid(global_avg_pool_time(offset))
    return a.reshape(a.shape[:-1] + (1, a.shape[-1]))


def time_gate(F, params: STE) -> Tensor:
    """Per-channel gate from the conv-vs-raw adjacent-frame difference offset."""
    if F.shape[-2] < 2:
        raise ShapeError(f"time-domain enhancement needs T >= 2, got T={F.shape[-2]}")
    S = params.conv(F)
    offset = diff_time(S) - diff_time(F)
    return _channel_gate(offset)


def time_domain_enhance(F, params: STE) -> Tensor:
    gate = time_gate(F, params)
    return gru_forward(F, params.gru_time) * gate


def freq_domain_enhance(F, params: STE) -> Tensor:
    F_fft = fft_roundtrip(F, params.mask_mode, params.mask_q)
    # one recurrent pass over both inputs; the same weights serve both applications
    both = gru_forward(stack([F, F_fft], axis=0), params.gru_freq)
    g_raw, g_fft = both[0], both[1]
    gate = _channel_gate(g_raw - F)
    return g_fft * gate
