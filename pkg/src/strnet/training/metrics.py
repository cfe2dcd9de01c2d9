"""Pose and mesh error metrics (plain numpy, no gradients)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class MetricsReport:
    mpjpe: float
    pa_mpjpe: float
    mpvpe: float
    accel_err: float
    n: int

    FIELDS = ("mpjpe", "pa_mpjpe", "mpvpe", "accel_err", "n")

    def row(self) -> list[str]:
        return [repr(float(getattr(self, k))) for k in self.FIELDS[:-1]] + [str(self.n)]


def _check(pred: np.ndarray, gt: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    pred, gt = np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"prediction shape {pred.shape} != ground truth shape {gt.shape}")
    return pred, gt


def mpjpe(pred, gt, root: int = 0) -> float:
    """Mean joint distance after moving both roots to the origin."""
    pred, gt = _check(pred, gt)
    p = pred - pred[..., root:root + 1, :]
    g = gt - gt[..., root:root + 1, :]
    return float(np.linalg.norm(p - g, axis=-1).mean())


def similarity_align(pred: np.ndarray, gt: np.ndarray) -> np.ndarray:
    """Least-squares similarity transform of ``pred`` (J x 3) onto ``gt`` (Umeyama)."""
    mu_p, mu_g = pred.mean(axis=0), gt.mean(axis=0)
    p0, g0 = pred - mu_p, gt - mu_g
    var_p = (p0 ** 2).sum()
    if var_p == 0:
        return np.broadcast_to(mu_g, pred.shape).copy()
    U, S, Vt = np.linalg.svd(g0.T @ p0)
    d = np.ones(pred.shape[1])
    d[-1] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    R = U @ np.diag(d) @ Vt
    scale = (S * d).sum() / var_p
    return scale * p0 @ R.T + mu_g


def pa_mpjpe(pred, gt) -> float:
    pred, gt = _check(pred, gt)
    p = pred.reshape((-1,) + pred.shape[-2:])
    g = gt.reshape((-1,) + gt.shape[-2:])
    # identical poses align exactly; skip the solve so roundoff cannot leak in
    aligned = np.stack([b if np.array_equal(a, b) else similarity_align(a, b) for a, b in zip(p, g)])
    return float(np.linalg.norm(aligned - g, axis=-1).mean())


def mpvpe(pred_verts, gt_verts) -> float:
    pred, gt = _check(pred_verts, gt_verts)
    return float(np.linalg.norm(pred - gt, axis=-1).mean())


def second_difference(seq: np.ndarray) -> np.ndarray:
    """``p(t+1) - 2 p(t) + p(t-1)`` over the leading (time) axis, endpoints excluded."""
    if seq.shape[0] < 3:
        raise ValueError(f"acceleration needs at least 3 frames, got {seq.shape[0]}")
    return seq[2:] - 2.0 * seq[1:-1] + seq[:-2]


def accel_per_frame(pred_seq, gt_seq) -> np.ndarray:
    """Per-frame mean joint distance between predicted and true accelerations."""
    pred, gt = _check(pred_seq, gt_seq)
    return np.linalg.norm(second_difference(pred) - second_difference(gt), axis=-1).mean(axis=-1)


def accel_error(pred_seq, gt_seq) -> float:
    return float(accel_per_frame(pred_seq, gt_seq).mean())
