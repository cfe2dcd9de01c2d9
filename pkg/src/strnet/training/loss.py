from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import Tensor, as_tensor, ops


@dataclass
class LossWeights:
    w_3d: float = 300.0
    w_2d: float = 300.0
    w_shape: float = 0.06
    w_pose: float = 60.0

    def __post_init__(self):
        for k, v in vars(self).items():
            if v < 0:
                raise ValueError(f"loss weight {k} must be nonnegative, got {v}")


def _residual_norms(pred, gt, batched: bool) -> Tensor:
    """Sum of Euclidean norms over the last axis, kept per window when batched."""
    n = ops.norm(as_tensor(pred) - gt, axis=-1)
    if batched:
        return n.sum(axis=tuple(range(1, n.ndim))) if n.ndim > 1 else n
    return n.sum()


def loss_lg(pred, gt: dict[str, np.ndarray], w: LossWeights):
    """Weighted sum of unsquared L2 residual norms.

    ``pred`` exposes ``joints3d``, ``joints2d``, ``theta`` (all ``(..., J, k)``)
    and ``beta`` (``(..., 10)``), with an optional leading window axis. ``gt``
    holds arrays under the same names. If ``gt`` carries one more axis than the
    prediction (frames), the prediction is repeated over every frame.

    Joint and pose terms add one norm per joint (and frame); the shape term is
    the norm of the coefficient residual. Returns ``(total, terms)`` where the
    total is averaged over windows.
    """
    batched = pred.beta.ndim == 2
    out = {}
    for key, term in (("joints3d", "3d"), ("joints2d", "2d"), ("theta", "pose"), ("beta", "shape")):
        p, g = as_tensor(getattr(pred, key)), np.asarray(gt[key])
        if g.ndim == p.ndim + 1:
            axis = 1 if batched else 0
            p = ops.stack([p] * g.shape[axis], axis=axis)
        out[term] = _residual_norms(p, g, batched)
    total = (out["3d"] * w.w_3d + out["2d"] * w.w_2d + out["shape"] * w.w_shape
             + out["pose"] * w.w_pose)
    if batched:
        total = total.mean()
    return total, {k: float(v.data.mean()) for k, v in out.items()}
