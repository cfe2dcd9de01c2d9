from . import ops
from .fft import fft, fft_roundtrip, ifft, spectral_mask
from .gradcheck import GradCheckResult, grad_check
from .gru import GruParams, gru_cell, gru_forward
from .module import MLP, Linear, Module
from .ops import (concat, conv1d_same, diff_time, global_avg_pool_time, linear, matmul, norm,
                  relu, sigmoid, softmax, split, stack, tanh, tile_time)
from .tensor import NumericError, ShapeError, Tensor, as_tensor, no_grad

__all__ = [
    "GradCheckResult", "GruParams", "Linear", "MLP", "Module", "NumericError", "ShapeError", "Tensor", "as_tensor",
    "concat", "conv1d_same", "diff_time", "fft", "fft_roundtrip", "global_avg_pool_time",
    "grad_check", "gru_cell", "gru_forward", "ifft", "linear", "matmul", "no_grad", "norm",
    "ops", "relu", "sigmoid", "softmax", "spectral_mask", "split", "stack", "tanh", "tile_time",
]
