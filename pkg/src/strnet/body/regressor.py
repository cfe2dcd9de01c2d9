"""Iterative error-feedback regressor from a pooled feature to body parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..numerics import MLP, Module, Tensor, as_tensor, ops
from ..numerics.tensor import NumericError
from .model import NUM_BETAS

OUTPUT_GAIN = 0.01


@dataclass
class BodyParams:
    theta: Tensor   # (..., J, 3) axis-angle, radians
    beta: Tensor    # (..., 10)
    cam: Tensor     # (..., 3) weak perspective (s, t_x, t_y)

    @classmethod
    def rest(cls, num_joints: int, batch: tuple[int, ...] = ()) -> "BodyParams":
        cam = np.zeros(batch + (3,))
        cam[..., 0] = 1.0
        return cls(Tensor(np.zeros(batch + (num_joints, 3))), Tensor(np.zeros(batch + (NUM_BETAS,))),
                   Tensor(cam))


def _flatten(p: BodyParams) -> Tensor:
    """Internal vector (theta, beta, log s, t_x, t_y); the log keeps s positive.

    The initial estimate is treated as a constant.
    """
    theta, beta, cam = as_tensor(p.theta), as_tensor(p.beta), as_tensor(p.cam)
    if np.any(cam.data[..., 0] <= 0):
        raise ValueError("initial camera scale must be positive")
    lead = beta.shape[:-1]
    log_s = Tensor(np.log(cam.data[..., 0:1]))
    return ops.concat([theta.reshape(lead + (-1,)), beta, log_s, cam[..., 1:3]], axis=-1)


def _unflatten(vec: Tensor, num_joints: int) -> BodyParams:
    lead = vec.shape[:-1]
    nt = 3 * num_joints
    theta = vec[..., :nt].reshape(lead + (num_joints, 3))
    beta = vec[..., nt:nt + NUM_BETAS]
    scale = ops.exp(vec[..., nt + NUM_BETAS:nt + NUM_BETAS + 1])
    cam = ops.concat([scale, vec[..., nt + NUM_BETAS + 1:]], axis=-1)
    return BodyParams(theta, beta, cam)


class Regressor(Module):
    def __init__(self, feature_dim: int, num_joints: int, hidden: int | None = None,
                 iterations: int = 3, rng: np.random.Generator | None = None):
        self.num_joints = num_joints
        self.iterations = iterations
        self.param_dim = 3 * num_joints + NUM_BETAS + 3
        hidden = 2 * feature_dim if hidden is None else hidden
        self.mlp = MLP(feature_dim + self.param_dim, [hidden, hidden], self.param_dim, rng)
        # small output layer so the first estimates stay near the rest pose
        for t in self.mlp.layers[-1].parameters():
            t.data = t.data * OUTPUT_GAIN

    def named_parameters(self, prefix: str = ""):
        for i, layer in enumerate(self.mlp.layers):
            yield from layer.named_parameters(f"{prefix}fc{i}.")

    def __call__(self, z, init: BodyParams | None = None) -> BodyParams:
        return regress_params(z, init, self)


def regress_params(z, init: BodyParams | None, reg: Regressor) -> BodyParams:
    """``reg.iterations`` rounds of ``params += MLP([z, params])``."""
    z = as_tensor(z)
    if init is None:
        init = BodyParams.rest(reg.num_joints, z.shape[:-1])
    current = _flatten(init)
    for _ in range(reg.iterations):
        delta = reg.mlp(ops.concat([z, current], axis=-1))
        if not np.all(np.isfinite(delta.data)):
            raise NumericError("regressor produced a non-finite update")
        current = current + delta
    return _unflatten(current, reg.num_joints)
