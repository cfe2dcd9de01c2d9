"""Gated recurrent unit as a fused primitive with hand-written BPTT.

Cell (reset applied before the recurrent candidate projection)::

    z = sigmoid(x W_z + h U_z + b_z)
    r = sigmoid(x W_r + h U_r + b_r)
    n = tanh(x W_n + (r * h) U_n + b_n)
    h' = (1 - z) * n + z * h
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .module import Module
from .tensor import ShapeError, Tensor, as_tensor, make_result

GATE_NAMES = ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_n", "u_n", "b_n")


def uniform_init(rng: np.random.Generator, fan_in: int, shape) -> np.ndarray:
    bound = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass(eq=False)
class GruParams(Module):
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_n: Tensor
    u_n: Tensor
    b_n: Tensor

    @property
    def input_size(self) -> int:
        return self.w_z.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.u_z.shape[0]

    def __post_init__(self):
        c, h = self.w_z.shape
        for name in ("w_z", "w_r", "w_n"):
            if getattr(self, name).shape != (c, h):
                raise ShapeError(f"GRU {name} has shape {getattr(self, name).shape}, expected {(c, h)}")
        for name in ("u_z", "u_r", "u_n"):
            if getattr(self, name).shape != (h, h):
                raise ShapeError(f"GRU {name} has shape {getattr(self, name).shape}, expected {(h, h)}")
        for name in ("b_z", "b_r", "b_n"):
            if getattr(self, name).shape != (h,):
                raise ShapeError(f"GRU {name} has shape {getattr(self, name).shape}, expected {(h,)}")

    @classmethod
    def init(cls, input_size: int, hidden_size: int, rng: np.random.Generator) -> "GruParams":
        vals = {}
        for gate in "zrn":
            vals[f"w_{gate}"] = uniform_init(rng, input_size, (input_size, hidden_size))
            vals[f"u_{gate}"] = uniform_init(rng, hidden_size, (hidden_size, hidden_size))
            vals[f"b_{gate}"] = np.zeros(hidden_size)
        return cls(**{k: Tensor(vals[k], requires_grad=True) for k in GATE_NAMES})

    @classmethod
    def zeros(cls, input_size: int, hidden_size: int) -> "GruParams":
        shapes = {"w": (input_size, hidden_size), "u": (hidden_size, hidden_size), "b": (hidden_size,)}
        return cls(**{k: Tensor(np.zeros(shapes[k[0]]), requires_grad=True) for k in GATE_NAMES})


def gru_cell(x, h, p: GruParams) -> Tensor:
    """One step built from elementary ops (reference path, also differentiable)."""
    z = ops.sigmoid(x @ p.w_z + h @ p.u_z + p.b_z)
    r = ops.sigmoid(x @ p.w_r + h @ p.u_r + p.b_r)
    n = ops.tanh(x @ p.w_n + (r * h) @ p.u_n + p.b_n)
    return (1.0 - z) * n + z * h


def _sig(a: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def gru_forward(seq, p: GruParams, h0=None) -> Tensor:
    """Run the recurrence over ``seq`` shaped ``(..., T, C)``; returns ``(..., T, H)``."""
    seq = as_tensor(seq)
    if seq.ndim < 2:
        raise ShapeError(f"gru_forward expects (..., T, C), got {seq.shape}")
    lead, (T, C) = seq.shape[:-2], seq.shape[-2:]
    H = p.hidden_size
    if C != p.input_size:
        raise ShapeError(f"gru_forward: input channels {C} != GRU input_size {p.input_size}")
    if h0 is None:
        h0 = Tensor(np.zeros(lead + (H,)))
    h0 = as_tensor(h0)
    if h0.shape != lead + (H,):
        raise ShapeError(f"gru_forward: h0 shape {h0.shape} != {lead + (H,)}")

    B = int(np.prod(lead)) if lead else 1
    x = seq.data.reshape(B, T, C)
    Wz, Uz, bz = p.w_z.data, p.u_z.data, p.b_z.data
    Wr, Ur, br = p.w_r.data, p.u_r.data, p.b_r.data
    Wn, Un, bn = p.w_n.data, p.u_n.data, p.b_n.data
    xz = x @ Wz + bz
    xr = x @ Wr + br
    xn = x @ Wn + bn

    hs = np.empty((T + 1, B, H))
    zs = np.empty((T, B, H))
    rs = np.empty((T, B, H))
    ns = np.empty((T, B, H))
    hs[0] = h0.data.reshape(B, H)
    for t in range(T):
        h = hs[t]
        z = _sig(xz[:, t] + h @ Uz)
        r = _sig(xr[:, t] + h @ Ur)
        n = np.tanh(xn[:, t] + (r * h) @ Un)
        hs[t + 1] = (1.0 - z) * n + z * h
        zs[t], rs[t], ns[t] = z, r, n

    out = np.ascontiguousarray(hs[1:].transpose(1, 0, 2)).reshape(lead + (T, H))

    def backward(g):
        g = g.reshape(B, T, H)
        gUz, gUr, gUn = np.zeros_like(Uz), np.zeros_like(Ur), np.zeros_like(Un)
        gaz = np.empty((T, B, H))
        gar = np.empty((T, B, H))
        gan = np.empty((T, B, H))
        dh = np.zeros((B, H))
        for t in range(T - 1, -1, -1):
            h, z, r, n = hs[t], zs[t], rs[t], ns[t]
            dh = dh + g[:, t]
            dn = dh * (1.0 - z)
            dz = dh * (h - n)
            dh_prev = dh * z
            da_n = dn * (1.0 - n * n)
            dq = da_n @ Un.T
            gUn += (r * h).T @ da_n
            dr = dq * h
            dh_prev += dq * r
            da_r = dr * r * (1.0 - r)
            da_z = dz * z * (1.0 - z)
            dh_prev += da_z @ Uz.T + da_r @ Ur.T
            gUz += h.T @ da_z
            gUr += h.T @ da_r
            gaz[t], gar[t], gan[t] = da_z, da_r, da_n
            dh = dh_prev
        gaz_b, gar_b, gan_b = (a.transpose(1, 0, 2) for a in (gaz, gar, gan))
        xf = x.reshape(B * T, C)
        gWz = xf.T @ gaz_b.reshape(B * T, H)
        gWr = xf.T @ gar_b.reshape(B * T, H)
        gWn = xf.T @ gan_b.reshape(B * T, H)
        gx = gaz_b @ Wz.T + gar_b @ Wr.T + gan_b @ Wn.T
        gbz = gaz.sum(axis=(0, 1))
        gbr = gar.sum(axis=(0, 1))
        gbn = gan.sum(axis=(0, 1))
        return (gx.reshape(seq.shape), dh.reshape(h0.shape),
                gWz, gUz, gbz, gWr, gUr, gbr, gWn, gUn, gbn)

    parents = (seq, h0, p.w_z, p.u_z, p.b_z, p.w_r, p.u_r, p.b_r, p.w_n, p.u_n, p.b_n)
    return make_result(out, parents, backward, "gru")
