"""A small procedurally generated linear-blend-skinned body model.

It mirrors the structure of SMPL at toy scale: a template mesh, a linear
shape basis, a kinematic tree, skinning weights and a joint regressor ``W``
with ``joints = W @ vertices``. Rest joints are regressed from the shaped
template, exactly like SMPL, so shape changes move the skeleton too.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from ..numerics import Tensor, as_tensor, ops
from ..numerics import container
from ..numerics.tensor import ShapeError
from .rotation import axis_angle_to_matrix

NUM_BETAS = 10
ASSET_KIND = "toy-body"
DEFAULT_SEED = 1234
DEFAULT_JOINTS = 6
DEFAULT_VERTICES = 30
DEFAULT_ASSET = "toy_body_j6_v30.bin"


@dataclass(frozen=True, eq=False)
class ToyBodyModel:
    template: np.ndarray       # (Nv, 3)
    shape_basis: np.ndarray    # (10, Nv, 3)
    parents: np.ndarray        # (J,), parents[0] == -1, parents[j] < j
    offsets: np.ndarray        # (J, 3) rest offsets of each joint from its parent
    skin_weights: np.ndarray   # (Nv, J), rows on the simplex
    joint_regressor: np.ndarray  # (J, Nv), rows on the simplex

    def __post_init__(self):
        nv, j = self.skin_weights.shape
        if self.template.shape != (nv, 3):
            raise ShapeError(f"template shape {self.template.shape} != {(nv, 3)}")
        if self.shape_basis.shape != (NUM_BETAS, nv, 3):
            raise ShapeError(f"shape basis shape {self.shape_basis.shape} != {(NUM_BETAS, nv, 3)}")
        if self.joint_regressor.shape != (j, nv):
            raise ShapeError(f"joint regressor shape {self.joint_regressor.shape} != {(j, nv)}")
        if self.parents.shape != (j,) or self.parents[0] != -1:
            raise ValueError("kinematic tree must have a single root at index 0")
        if any(not 0 <= self.parents[k] < k for k in range(1, j)):
            raise ValueError("kinematic tree parents must precede their children")
        for name, m in (("skin weights", self.skin_weights), ("joint regressor", self.joint_regressor)):
            if np.any(m < 0) or not np.allclose(m.sum(axis=1), 1.0, atol=1e-12):
                raise ValueError(f"{name} rows must lie on the simplex")

    @property
    def num_joints(self) -> int:
        return self.parents.shape[0]

    @property
    def num_vertices(self) -> int:
        return self.template.shape[0]

    # -- persistence -----------------------------------------------------------
    def to_arrays(self) -> dict[str, np.ndarray]:
        return {"template": self.template, "basis": self.shape_basis, "parents": self.parents,
                "offsets": self.offsets, "skin_weights": self.skin_weights, "W": self.joint_regressor}

    def save(self, path) -> None:
        container.save(path, ASSET_KIND, self.to_arrays(),
                       {"joints": self.num_joints, "vertices": self.num_vertices})

    @classmethod
    def load(cls, path) -> "ToyBodyModel":
        a, _ = container.load(path, ASSET_KIND)
        return cls(a["template"], a["basis"], a["parents"].astype(np.int64), a["offsets"],
                   a["skin_weights"], a["W"])


def generate_toy_body(seed: int = DEFAULT_SEED, num_joints: int = DEFAULT_JOINTS,
                      num_vertices: int = DEFAULT_VERTICES) -> ToyBodyModel:
    """Build a random tree, hang vertices along its bones, derive weights."""
    if num_joints < 2 or num_vertices < num_joints:
        raise ValueError("need at least 2 joints and as many vertices as joints")
    rng = np.random.default_rng(seed)
    parents = np.full(num_joints, -1, dtype=np.int64)
    joints = np.zeros((num_joints, 3))
    for j in range(1, num_joints):
        parents[j] = rng.integers(0, j)
        d = rng.normal(size=3)
        joints[j] = joints[parents[j]] + rng.uniform(0.2, 0.4) * d / np.linalg.norm(d)

    # every bone gets vertices, spread along it with a small radial jitter
    bones = np.arange(1, num_joints)
    owner = np.concatenate([bones, rng.choice(bones, num_vertices - bones.size)])
    u = rng.uniform(0.0, 1.0, num_vertices)
    start, end = joints[parents[owner]], joints[owner]
    template = start + u[:, None] * (end - start) + rng.normal(0.0, 0.03, (num_vertices, 3))

    d2 = ((template[:, None, :] - joints[None, :, :]) ** 2).sum(-1)
    skin = np.exp(-d2 / (2 * 0.1 ** 2))
    skin /= skin.sum(axis=1, keepdims=True)
    reg = np.exp(-d2.T / (2 * 0.08 ** 2))
    reg /= reg.sum(axis=1, keepdims=True)

    basis = rng.normal(0.0, 0.02, (NUM_BETAS, num_vertices, 3))
    rest = reg @ template
    offsets = rest - np.where(parents[:, None] >= 0, rest[np.maximum(parents, 0)], 0.0)
    return ToyBodyModel(template, basis, parents, offsets, skin, reg)


def default_asset_path() -> Path:
    return Path(str(resources.files("strnet.body") / "assets" / DEFAULT_ASSET))


def load_body_model(seed: int = DEFAULT_SEED, num_joints: int = DEFAULT_JOINTS,
                    num_vertices: int = DEFAULT_VERTICES) -> ToyBodyModel:
    """The shipped asset for the default settings, a fresh generation otherwise."""
    if (seed, num_joints, num_vertices) == (DEFAULT_SEED, DEFAULT_JOINTS, DEFAULT_VERTICES):
        path = default_asset_path()
        if path.exists():
            return ToyBodyModel.load(path)
    return generate_toy_body(seed, num_joints, num_vertices)


# -- differentiable forward --------------------------------------------------

def shaped_vertices(model: ToyBodyModel, beta) -> Tensor:
    beta = as_tensor(beta)
    nv = model.num_vertices
    blend = ops.matmul(beta.reshape(beta.shape[:-1] + (1, NUM_BETAS)),
                       Tensor(model.shape_basis.reshape(NUM_BETAS, nv * 3)))
    return Tensor(model.template) + blend.reshape(beta.shape[:-1] + (nv, 3))


def body_forward(model: ToyBodyModel, theta, beta) -> Tensor:
    """Skinned mesh ``(..., Nv, 3)`` from pose ``(..., J, 3)`` and shape ``(..., 10)``."""
    theta, beta = as_tensor(theta), as_tensor(beta)
    J = model.num_joints
    if theta.shape[-2:] != (J, 3) or beta.shape[-1] != NUM_BETAS:
        raise ShapeError(f"expected theta (..., {J}, 3) and beta (..., {NUM_BETAS}), "
                         f"got {theta.shape} and {beta.shape}")
    v = shaped_vertices(model, beta)
    rest = joints_from_mesh(model, v)                   # (..., J, 3)
    R = axis_angle_to_matrix(theta)                     # (..., J, 3, 3)

    col = lambda x: x.reshape(x.shape[:-1] + (3, 1))    # noqa: E731
    g_rot = [R[..., 0, :, :]]
    g_tr = [col(rest[..., 0, :])]
    for j in range(1, J):
        p = int(model.parents[j])
        bone = col(rest[..., j, :] - rest[..., p, :])
        g_rot.append(ops.matmul(g_rot[p], R[..., j, :, :]))
        g_tr.append(ops.matmul(g_rot[p], bone) + g_tr[p])
    # subtract the transformed rest position so the transforms act on rest-pose vertices
    rots = ops.stack(g_rot, axis=-3)                                   # (..., J, 3, 3)
    trans = ops.stack(g_tr, axis=-3) - ops.matmul(rots, col(rest))      # (..., J, 3, 1)

    lead = rots.shape[:-3]
    skin = Tensor(model.skin_weights)
    A = ops.matmul(skin, rots.reshape(lead + (J, 9))).reshape(lead + (model.num_vertices, 3, 3))
    t = ops.matmul(skin, trans.reshape(lead + (J, 3)))
    posed = ops.matmul(A, col(v)).reshape(v.shape)
    return posed + t


def joints_from_mesh(model: ToyBodyModel, mesh) -> Tensor:
    mesh = as_tensor(mesh)
    if mesh.shape[-2:] != (model.num_vertices, 3):
        raise ShapeError(f"mesh shape {mesh.shape} does not match {model.num_vertices} vertices")
    return ops.matmul(Tensor(model.joint_regressor), mesh)


def project_weak_perspective(joints3d, cam) -> Tensor:
    """Scaled orthographic projection: ``s * (x, y) + (t_x, t_y)``."""
    joints3d, cam = as_tensor(joints3d), as_tensor(cam)
    if np.any(cam.data[..., 0] <= 0):
        raise ValueError("weak-perspective scale must be positive")
    s = cam[..., 0:1].reshape(cam.shape[:-1] + (1, 1))
    t = cam[..., 1:3].reshape(cam.shape[:-1] + (1, 2))
    return joints3d[..., :2] * s + t
