"""Discrete Fourier transforms along the time axis.

Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform; other
lengths fall back to the direct O(T^2) summation.
"""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, as_tensor, make_result

MASK_MODES = ("off", "remove_dc", "keep_top_q")


def _is_pow2(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def _bit_reverse_indices(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def _radix2(a: np.ndarray, sign: float) -> np.ndarray:
    n = a.shape[0]
    a = a[_bit_reverse_indices(n)]
    m = 2
    while m <= n:
        half = m // 2
        w = np.exp(sign * 2j * np.pi * np.arange(half) / m)
        w = w.reshape((1, half) + (1,) * (a.ndim - 1))
        blocks = a.reshape((n // m, m) + a.shape[1:])
        even = blocks[:, :half]
        odd = blocks[:, half:] * w
        a = np.concatenate([even + odd, even - odd], axis=1).reshape(a.shape)
        m *= 2
    return a


def dft_direct(a: np.ndarray, sign: float = -1.0) -> np.ndarray:
    """Direct summation DFT along axis 0 (unnormalised)."""
    n = a.shape[0]
    k = np.arange(n)
    mat = np.exp(sign * 2j * np.pi * np.outer(k, k) / n)
    return np.tensordot(mat, a.astype(np.complex128), axes=(1, 0))


def fft(x: np.ndarray, axis: int = 0) -> np.ndarray:
    a = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, 0)
    if a.shape[0] < 1:
        raise ValueError("fft needs at least one sample")
    out = _radix2(a, -1.0) if _is_pow2(a.shape[0]) else dft_direct(a, -1.0)
    return np.moveaxis(out, 0, axis)


def ifft(x: np.ndarray, axis: int = 0) -> np.ndarray:
    a = np.moveaxis(np.asarray(x, dtype=np.complex128), axis, 0)
    n = a.shape[0]
    out = _radix2(a, 1.0) if _is_pow2(n) else dft_direct(a, 1.0)
    return np.moveaxis(out / n, 0, axis)


def spectral_mask(n: int, mode: str = "off", q: float = 0.5) -> np.ndarray | None:
    """Real 0/1 mask over ``n`` frequency bins, or None when disabled.

    ``remove_dc`` zeroes bin 0. ``keep_top_q`` keeps the bins whose circular
    frequency ``min(k, n - k)`` lies in the top ``q`` fraction of ``[0, n // 2]``.
    Both masks are conjugate-symmetric, so the round trip stays real.
    """
    if mode == "off":
        return None
    if mode == "remove_dc":
        m = np.ones(n)
        m[0] = 0.0
        return m
    if mode == "keep_top_q":
        if not 0.0 < q <= 1.0:
            raise ValueError(f"keep_top_q needs 0 < q <= 1, got {q}")
        k = np.arange(n)
        freq = np.minimum(k, n - k)
        return (freq >= (1.0 - q) * (n // 2)).astype(np.float64)
    raise ValueError(f"unknown spectral mask mode {mode!r}; expected one of {MASK_MODES}")


def _roundtrip(x: np.ndarray, mask: np.ndarray | None) -> np.ndarray:
    spec = fft(x, axis=-2)
    if mask is not None:
        spec = spec * mask[:, None]
    return ifft(spec, axis=-2).real


def fft_roundtrip(x, mode: str = "off", q: float = 0.5) -> Tensor:
    """FFT along time, optional spectral mask, inverse FFT, real part.

    With a real symmetric mask the map is a symmetric linear operator, so the
    backward pass is the same round trip applied to the incoming gradient.
    """
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[-2] < 1:
        raise ValueError(f"fft_roundtrip needs (..., T, C) with T >= 1, got {x.shape}")
    mask = spectral_mask(x.shape[-2], mode, q)
    return make_result(_roundtrip(x.data, mask), (x,),
                       lambda g: (_roundtrip(g, mask),), "fft_roundtrip")
