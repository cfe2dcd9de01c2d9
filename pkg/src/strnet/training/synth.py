"""Synthetic motion windows standing in for pre-computed video features.

Each sequence is a smooth second-order random walk in pose and (slowly) in
shape, pushed through the toy body model. Frame features are a fixed random
linear code of the 3D joints, 2D joints and joint velocity, plus Gaussian
noise. Illumination dropout zeroes the signal part of the features on one
contiguous span of a window while the ground truth stays intact.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..body import NUM_BETAS, ToyBodyModel, body_forward, joints_from_mesh
from ..numerics import container, no_grad

DATASET_KIND = "str-dataset"


@dataclass
class SynthConfig:
    num_sequences: int = 16
    frames_per_seq: int = 64
    window: int = 16
    stride: int = 1
    channels: int = 64
    noise_std: float = 0.05
    dropout_prob: float = 0.5
    dropout_len: int = 4
    embed_seed: int = 0
    pose_step_std: float = 0.03
    shape_step_std: float = 0.002

    def validate(self) -> None:
        if self.num_sequences < 0:
            raise ValueError("num_sequences must be >= 0")
        if self.frames_per_seq < self.window:
            raise ValueError(f"frames_per_seq ({self.frames_per_seq}) must be >= the window length "
                             f"T ({self.window})")
        if self.stride < 1 or self.window < 1 or self.channels < 1:
            raise ValueError("stride, window and channels must be positive")
        if not 0 <= self.dropout_prob <= 1:
            raise ValueError("dropout_prob must be in [0, 1]")
        if self.dropout_prob > 0 and not 1 <= self.dropout_len <= self.window:
            raise ValueError("dropout_len must be in [1, window]")
        if self.noise_std < 0:
            raise ValueError("noise_std must be >= 0")


@dataclass
class Dataset:
    features: np.ndarray    # (N, T, C)
    joints3d: np.ndarray    # (N, T, J, 3) every frame of the window
    joints2d: np.ndarray    # (N, T, J, 2)
    theta: np.ndarray       # (N, T, J, 3)
    beta: np.ndarray        # (N, T, 10)
    verts: np.ndarray       # (N, Nv, 3) mid frame only
    cam: np.ndarray         # (N, 3)
    seq_id: np.ndarray      # (N,)
    frame: np.ndarray       # (N,) index of the mid (target) frame within its sequence
    dropout: np.ndarray     # (N, T) 1 where the signal was zeroed
    meta: dict

    ARRAYS = ("features", "joints3d", "joints2d", "theta", "beta", "verts", "cam", "seq_id",
              "frame", "dropout")

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def window(self) -> int:
        return self.features.shape[1]

    @property
    def mid(self) -> int:
        return self.window // 2

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.int64)
        return Dataset(**{k: getattr(self, k)[idx] for k in self.ARRAYS}, meta=dict(self.meta))

    def targets(self, idx=None, all_frames: bool = False) -> dict[str, np.ndarray]:
        """Ground truth for the mid frame (or every frame) of the selected windows."""
        sel = slice(None) if idx is None else np.asarray(idx)
        pick = (lambda a: a[sel]) if all_frames else (lambda a: a[sel][:, self.mid])
        return {"joints3d": pick(self.joints3d), "joints2d": pick(self.joints2d),
                "theta": pick(self.theta), "beta": pick(self.beta)}

    def save(self, path) -> None:
        container.save(path, DATASET_KIND, {k: getattr(self, k) for k in self.ARRAYS}, self.meta)

    @classmethod
    def load(cls, path) -> "Dataset":
        arrays, meta = container.load(path, DATASET_KIND)
        return cls(**{k: arrays[k] for k in cls.ARRAYS}, meta=meta)


def feature_embedding(num_joints: int, channels: int, seed: int) -> np.ndarray:
    """Fixed random linear code, ``(8 J, C)``: 3D joints, 2D joints, velocity."""
    d = 8 * num_joints
    return np.random.default_rng(seed).normal(0.0, 1.0 / np.sqrt(d), (d, channels))


def _smooth_walk(rng: np.random.Generator, frames: int, dims: int, step_std: float,
                 start_std: float) -> np.ndarray:
    """Damped second-order random walk: velocity is an AR(1) with weak mean reversion."""
    x = np.empty((frames, dims))
    x[0] = rng.normal(0.0, start_std, dims)
    v = np.zeros(dims)
    for t in range(1, frames):
        v = 0.9 * v - 0.01 * x[t - 1] + rng.normal(0.0, step_std, dims)
        x[t] = x[t - 1] + v
    return x


def _sequence(rng: np.random.Generator, body: ToyBodyModel, cfg: SynthConfig):
    n, J = cfg.frames_per_seq, body.num_joints
    theta = _smooth_walk(rng, n, 3 * J, cfg.pose_step_std, 0.3).reshape(n, J, 3)
    beta = _smooth_walk(rng, n, NUM_BETAS, cfg.shape_step_std, 0.5)
    cam = np.array([rng.uniform(0.8, 1.2), rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1)])
    with no_grad():
        verts = body_forward(body, theta, beta).data
        j3d = joints_from_mesh(body, verts).data
    j2d = cam[0] * j3d[..., :2] + cam[1:]
    vel = np.diff(j3d, axis=0, prepend=j3d[:1])
    vel[0] = vel[1] if n > 1 else 0.0
    signal = np.concatenate([j3d.reshape(n, -1), j2d.reshape(n, -1), vel.reshape(n, -1)], axis=1)
    return theta, beta, cam, verts, j3d, j2d, signal


def gen_synthetic_dataset(seed: int, body: ToyBodyModel, cfg: SynthConfig) -> Dataset:
    cfg.validate()
    rng = np.random.default_rng(seed)
    E = feature_embedding(body.num_joints, cfg.channels, cfg.embed_seed)
    T, J, nv = cfg.window, body.num_joints, body.num_vertices
    cols: dict[str, list] = {k: [] for k in Dataset.ARRAYS}
    for s in range(cfg.num_sequences):
        theta, beta, cam, verts, j3d, j2d, signal = _sequence(rng, body, cfg)
        clean = signal @ E
        for start in range(0, cfg.frames_per_seq - T + 1, cfg.stride):
            sl = slice(start, start + T)
            noise = rng.normal(0.0, cfg.noise_std, (T, cfg.channels)) if cfg.noise_std > 0 \
                else np.zeros((T, cfg.channels))
            drop = np.zeros(T)
            if cfg.dropout_prob > 0 and rng.uniform() < cfg.dropout_prob:
                d0 = rng.integers(0, T - cfg.dropout_len + 1)
                drop[d0:d0 + cfg.dropout_len] = 1.0
            cols["features"].append(clean[sl] * (1.0 - drop[:, None]) + noise)
            cols["joints3d"].append(j3d[sl])
            cols["joints2d"].append(j2d[sl])
            cols["theta"].append(theta[sl])
            cols["beta"].append(beta[sl])
            cols["verts"].append(verts[start + T // 2])
            cols["cam"].append(cam)
            cols["seq_id"].append(s)
            cols["frame"].append(start + T // 2)
            cols["dropout"].append(drop)
    empty = {"features": (0, T, cfg.channels), "joints3d": (0, T, J, 3), "joints2d": (0, T, J, 2),
             "theta": (0, T, J, 3), "beta": (0, T, NUM_BETAS), "verts": (0, nv, 3), "cam": (0, 3),
             "seq_id": (0,), "frame": (0,), "dropout": (0, T)}
    arrays = {k: np.stack(v) if v else np.zeros(empty[k]) for k, v in cols.items()}
    arrays["seq_id"] = arrays["seq_id"].astype(np.int64)
    arrays["frame"] = arrays["frame"].astype(np.int64)
    meta = {"seed": seed, "joints": J, "vertices": nv, "synth": asdict(cfg)}
    return Dataset(**arrays, meta=meta)
