"""Differentiable primitives.

Layout convention: feature sequences are ``(..., T, C)`` with any number of
leading batch axes. Every primitive has an analytic backward.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .tensor import ShapeError, Tensor, as_tensor, make_result, unbroadcast


# -- elementwise arithmetic ------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_result(
        a.data + b.data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_result(
        a.data - b.data, (a, b),
        lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    return make_result(
        a.data * b.data, (a, b),
        lambda g: (unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = a.data / b.data
    return make_result(
        out, (a, b),
        lambda g: (unbroadcast(g / b.data, a.shape), unbroadcast(-g * out / b.data, b.shape)),
        "div")


def neg(a) -> Tensor:
    a = as_tensor(a)
    return make_result(-a.data, (a,), lambda g: (-g,), "neg")


def matmul(a, b) -> Tensor:
    """Matrix product with numpy broadcasting over leading axes.

    A 1-D left operand is treated as a single row, as in numpy.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim == 1 and b.ndim >= 2:
        return reshape(matmul(reshape(a, (1, -1)), b), b.shape[:-2] + (b.shape[-1],))
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(g):
        ga = g @ np.swapaxes(b.data, -1, -2)
        gb = np.swapaxes(a.data, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return make_result(a.data @ b.data, (a, b), backward, "matmul")


# -- nonlinearities --------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    s = _sigmoid(x.data)
    return make_result(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def tanh(x) -> Tensor:
    x = as_tensor(x)
    t = np.tanh(x.data)
    return make_result(t, (x,), lambda g: (g * (1.0 - t * t),), "tanh")


def relu(x) -> Tensor:
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def exp(x) -> Tensor:
    x = as_tensor(x)
    e = np.exp(x.data)
    return make_result(e, (x,), lambda g: (g * e,), "exp")


def softmax(v, axis: int = -1) -> Tensor:
    v = as_tensor(v)
    if v.shape[axis] < 1:
        raise ShapeError("softmax over an empty axis")
    z = v.data - v.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - (g * p).sum(axis=axis, keepdims=True)),)

    return make_result(p, (v,), backward, "softmax")


def norm(x, axis: int = -1) -> Tensor:
    """Euclidean norm along ``axis``; the subgradient at 0 is taken as 0."""
    x = as_tensor(x)
    n = np.sqrt((x.data ** 2).sum(axis=axis))

    def backward(g):
        nk = np.expand_dims(n, axis)
        safe = np.where(nk > 0, nk, 1.0)
        return (np.where(nk > 0, x.data / safe, 0.0) * np.expand_dims(g, axis),)

    return make_result(n, (x,), backward, "norm")


# -- reductions and shape ops ----------------------------------------------

def sum(x, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    x = as_tensor(x)
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(np.asarray(out, dtype=np.float64), (x,), backward, "sum")


def mean(x, axis=None, keepdims: bool = False) -> Tensor:
    x = as_tensor(x)
    if axis is None:
        count = x.data.size
    else:
        axes = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([x.shape[a] for a in axes]))
    if count == 0:
        raise ShapeError("mean over an empty axis")
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / count)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(x.shape),), "reshape")


def swapaxes(x, a: int, b: int) -> Tensor:
    x = as_tensor(x)
    return make_result(np.swapaxes(x.data, a, b), (x,), lambda g: (np.swapaxes(g, a, b),),
                       "swapaxes")


def index(x, idx) -> Tensor:
    x = as_tensor(x)

    basic = all(isinstance(i, (int, slice)) or i is Ellipsis
                for i in (idx if isinstance(idx, tuple) else (idx,)))

    def backward(g):
        full = np.zeros_like(x.data)
        if basic:
            full[idx] = g
        else:
            np.add.at(full, idx, g)
        return (full,)

    return make_result(x.data[idx], (x,), backward, "index")


def concat(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    sizes = [x.shape[axis] for x in xs]
    cuts = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, cuts, axis=axis))

    return make_result(np.concatenate([x.data for x in xs], axis=axis), xs, backward, "concat")


def stack(xs: Sequence[Tensor], axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return make_result(np.stack([x.data for x in xs], axis=axis), xs, backward, "stack")


def split(x, sections: int, axis: int) -> list[Tensor]:
    """Even, order-preserving split into ``sections`` contiguous pieces."""
    x = as_tensor(x)
    n = x.shape[axis]
    if n % sections:
        raise ShapeError(f"cannot split axis of length {n} into {sections} equal parts")
    step = n // sections
    ax = axis % x.ndim
    out = []
    for i in range(sections):
        sl = [slice(None)] * x.ndim
        sl[ax] = slice(i * step, (i + 1) * step)
        out.append(index(x, tuple(sl)))
    return out


# -- temporal layers -------------------------------------------------------

def global_avg_pool_time(x) -> Tensor:
    """Mean over the time axis: ``(..., T, C) -> (..., C)``."""
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[-2] == 0:
        raise ShapeError(f"global_avg_pool_time needs T >= 1, got shape {x.shape}")
    return mean(x, axis=-2)


def diff_time(x) -> Tensor:
    """Forward first difference along time: ``D(t) = X(t+1) - X(t)``."""
    x = as_tensor(x)
    if x.ndim < 2 or x.shape[-2] < 2:
        raise ShapeError(f"diff_time needs T >= 2, got shape {x.shape}")

    def backward(g):
        full = np.zeros_like(x.data)
        full[..., 1:, :] += g
        full[..., :-1, :] -= g
        return (full,)

    return make_result(x.data[..., 1:, :] - x.data[..., :-1, :], (x,), backward, "diff_time")


def tile_time(x, reps: int) -> Tensor:
    """Repeat the whole sequence ``reps`` times along time."""
    x = as_tensor(x)
    t = x.shape[-2]

    def backward(g):
        shape = g.shape[:-2] + (reps, t, g.shape[-1])
        return (g.reshape(shape).sum(axis=-3),)

    reps_shape = (1,) * (x.ndim - 2) + (reps, 1)
    return make_result(np.tile(x.data, reps_shape), (x,), backward, "tile_time")


def conv1d_same(x, kernels, bias) -> Tensor:
    """Temporal convolution with zero padding that preserves ``T``.

    ``x`` is ``(..., T, C_in)``, ``kernels`` is ``(W, C_in, C_out)`` with odd
    ``W`` and ``bias`` is ``(C_out,)``. Output frame ``t`` is
    ``sum_k x[t + k - W//2] @ kernels[k] + bias``.
    """
    x, kernels, bias = as_tensor(x), as_tensor(kernels), as_tensor(bias)
    width, c_in, c_out = kernels.shape
    if width % 2 == 0:
        raise ShapeError(f"conv1d_same needs an odd kernel width, got {width}")
    if x.shape[-1] != c_in:
        raise ShapeError(f"conv1d_same: input channels {x.shape[-1]} != kernel channels {c_in}")
    half = width // 2
    t = x.shape[-2]
    pad = [(0, 0)] * (x.ndim - 2) + [(half, half), (0, 0)]
    xp = np.pad(x.data, pad)
    # cols[..., t, k, c] = xp[..., t + k, c]
    cols = np.stack([xp[..., k:k + t, :] for k in range(width)], axis=-2)
    flat_cols = cols.reshape(cols.shape[:-2] + (width * c_in,))
    flat_k = kernels.data.reshape(width * c_in, c_out)
    out = flat_cols @ flat_k + bias.data

    def backward(g):
        gk = np.tensordot(flat_cols, g, axes=(tuple(range(g.ndim - 1)), tuple(range(g.ndim - 1))))
        gb = g.reshape(-1, c_out).sum(axis=0)
        gcols = (g @ flat_k.T).reshape(cols.shape)
        gxp = np.zeros_like(xp)
        for k in range(width):
            gxp[..., k:k + t, :] += gcols[..., k, :]
        return gxp[..., half:half + t, :], gk.reshape(kernels.shape), gb

    return make_result(out, (x, kernels, bias), backward, "conv1d_same")


def linear(x, weight, bias) -> Tensor:
    """``x @ weight + bias`` with ``weight`` shaped ``(in, out)``."""
    return add(matmul(x, weight), bias)
