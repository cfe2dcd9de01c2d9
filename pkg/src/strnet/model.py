"""End-to-end STR network: TTR + STE + integration strategies + body regressor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .body import BodyParams, Regressor, ToyBodyModel, body_forward, joints_from_mesh
from .body import project_weak_perspective
from .integration import IntegrationNet, Strategies, fuse_final, fuse_str, integration_strategies
from .numerics import Module, Tensor, as_tensor, global_avg_pool_time
from .numerics.tensor import ShapeError
from .ste import STE, freq_domain_enhance, time_domain_enhance
from .ttr import TTR


@dataclass(frozen=True)
class Variant:
    ttr: bool = True
    ste_time: bool = True
    ste_freq: bool = True
    self_integration: bool = True
    cross_integration: bool = True


# Table-2 style ablations: a removed TTR passes its input through, removed STE
# branches and the removed cross-integration contribute zeros to their fusion,
# removed self-integration skips the refinement loop.
VARIANTS: dict[str, Variant] = {
    "full": Variant(),
    "no_ttr": Variant(ttr=False),
    "no_ste": Variant(ste_time=False, ste_freq=False),
    "no_ste_time": Variant(ste_time=False),
    "no_ste_freq": Variant(ste_freq=False),
    "no_self_integration": Variant(self_integration=False),
    "no_cross_integration": Variant(cross_integration=False),
}


@dataclass
class Prediction:
    theta: Tensor
    beta: Tensor
    cam: Tensor
    verts: Tensor
    joints3d: Tensor
    joints2d: Tensor


class STRNet(Module):
    def __init__(self, body: ToyBodyModel, channels: int, rng: np.random.Generator | None = None, *,
                 fragments: int = 4, iterations: int = 3, literal: bool = False,
                 mask_mode: str = "off", mask_q: float = 0.5, share_ttr_weights: bool = False,
                 share_ste_gru: bool = False, kernel_width: int = 3, fusion_hidden=None,
                 regressor_hidden: int | None = None, regressor_iterations: int = 3,
                 variant: str | Variant = "full"):
        self._body = body
        self.channels = channels
        self.variant = VARIANTS[variant] if isinstance(variant, str) else variant
        self.ttr = TTR(channels, rng, fragments, share_ttr_weights)
        self.ste = STE(channels, rng, kernel_width, mask_mode, mask_q, share_ste_gru)
        self.strategies = Strategies(channels, rng, iterations, literal, fusion_hidden)
        self.net_str = IntegrationNet(3, channels, fusion_hidden, rng)
        self.net_final = IntegrationNet(3, channels, fusion_hidden, rng)
        self.reg = Regressor(channels, body.num_joints, regressor_hidden, regressor_iterations, rng)

    @property
    def body(self) -> ToyBodyModel:
        return self._body

    def named_parameters(self, prefix: str = ""):
        yield from self.ttr.named_parameters(prefix + "ttr.")
        yield from self.ste.named_parameters(prefix + "ste.")
        yield from self.net_str.named_parameters(prefix + "int.net_str.")
        yield from self.net_final.named_parameters(prefix + "int.net_final.")
        yield from self.strategies.named_parameters(prefix + "int.")
        yield from self.reg.named_parameters(prefix + "reg.")

    def features(self, F) -> Tensor:
        """Fused spatio-temporal feature ``Z`` with the input's shape."""
        F = as_tensor(F)
        if F.shape[-1] != self.channels:
            raise ShapeError(f"model expects {self.channels} channels, got {F.shape[-1]}")
        v = self.variant
        zeros = Tensor(np.zeros(F.shape))
        f_ttr = self.ttr(F) if v.ttr else F
        stef1 = time_domain_enhance(F, self.ste) if v.ste_time else zeros
        stef2 = freq_domain_enhance(F, self.ste) if v.ste_freq else zeros
        f_str = fuse_str(f_ttr, stef1, stef2, self.net_str)
        f_sf, f_cf = integration_strategies(F, self.strategies, skip_self=not v.self_integration)
        if not v.cross_integration:
            f_cf = zeros
        return fuse_final(f_sf, f_str, f_cf, self.net_final)

    def regress(self, F) -> BodyParams:
        return self.reg(global_avg_pool_time(self.features(F)))

    def __call__(self, F) -> Prediction:
        params = self.regress(F)
        return decode_params(self.body, params)


def decode_params(body: ToyBodyModel, params: BodyParams) -> Prediction:
    verts = body_forward(body, params.theta, params.beta)
    j3d = joints_from_mesh(body, verts)
    j2d = project_weak_perspective(j3d, params.cam)
    return Prediction(as_tensor(params.theta), as_tensor(params.beta), as_tensor(params.cam),
                      verts, j3d, j2d)
