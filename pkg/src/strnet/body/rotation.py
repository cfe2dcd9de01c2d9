"""Axis-angle to rotation matrix (Rodrigues) as differentiable ops.

``R = I + a(s) K + b(s) K^2`` with ``K = skew(theta)``, ``s = |theta|^2``,
``a = sin(phi)/phi`` and ``b = (1 - cos(phi))/phi^2``. Writing the
coefficients as functions of ``s`` keeps the map smooth at ``theta = 0``;
below ``_TAYLOR_PHI`` both coefficients and their derivatives come from
their power series.
"""

from __future__ import annotations

import numpy as np

from ..numerics import Tensor, as_tensor, ops
from ..numerics.tensor import make_result

_TAYLOR_PHI = 1e-3

# K = theta @ _SKEW reshaped to 3x3
_SKEW = np.zeros((3, 9))
_SKEW[0, 5], _SKEW[0, 7] = -1.0, 1.0   # theta_x: K[1,2] = -x, K[2,1] = x
_SKEW[1, 2], _SKEW[1, 6] = 1.0, -1.0   # theta_y: K[0,2] = y, K[2,0] = -y
_SKEW[2, 1], _SKEW[2, 3] = -1.0, 1.0   # theta_z: K[0,1] = -z, K[1,0] = z


def _coeffs(s: np.ndarray):
    """a, b and their derivatives with respect to s = phi^2."""
    small = s < _TAYLOR_PHI ** 2
    phi = np.sqrt(np.where(small, 1.0, s))
    sin, cos = np.sin(phi), np.cos(phi)
    one_minus_cos = 2.0 * np.sin(0.5 * phi) ** 2
    a = np.where(small, 1.0 - s / 6.0 + s * s / 120.0, sin / phi)
    b = np.where(small, 0.5 - s / 24.0 + s * s / 720.0, one_minus_cos / phi ** 2)
    da = np.where(small, -1.0 / 6.0 + s / 60.0, (phi * cos - sin) / (2.0 * phi ** 3))
    db = np.where(small, -1.0 / 24.0 + s / 360.0,
                  (phi * sin - 2.0 * one_minus_cos) / (2.0 * phi ** 4))
    return a, b, da, db


def _coeff_op(s: Tensor, which: int) -> Tensor:
    a, b, da, db = _coeffs(s.data)
    val, der = (a, da) if which == 0 else (b, db)
    return make_result(val, (s,), lambda g: (g * der,), "rodrigues_coeff")


def skew(theta) -> Tensor:
    theta = as_tensor(theta)
    return ops.matmul(theta.reshape(theta.shape[:-1] + (1, 3)), Tensor(_SKEW)).reshape(
        theta.shape[:-1] + (3, 3))


def axis_angle_to_matrix(theta) -> Tensor:
    """``(..., 3)`` axis-angle vectors to ``(..., 3, 3)`` rotation matrices."""
    theta = as_tensor(theta)
    K = skew(theta)
    s = ops.sum(theta * theta, axis=-1)
    a = _coeff_op(s, 0).reshape(s.shape + (1, 1))
    b = _coeff_op(s, 1).reshape(s.shape + (1, 1))
    return Tensor(np.eye(3)) + a * K + b * ops.matmul(K, K)
