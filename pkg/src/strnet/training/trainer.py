"""Model construction, the training loop, evaluation and checkpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..body import ToyBodyModel, load_body_model
from ..config import ConfigError, RunConfig, config_from_dict
from ..model import VARIANTS, STRNet
from ..numerics import container, no_grad
from .loss import LossWeights, loss_lg
from .metrics import MetricsReport, accel_per_frame, mpjpe, mpvpe, pa_mpjpe
from .optim import Adam, AdamState, PlateauScheduler
from .synth import Dataset, SynthConfig

log = logging.getLogger(__name__)

CHECKPOINT_KIND = "str-checkpoint"
PREDICTIONS_KIND = "str-predictions"


def body_from_config(cfg: RunConfig) -> ToyBodyModel:
    return load_body_model(cfg.body.seed, cfg.body.joints, cfg.body.vertices)


def synth_config(cfg: RunConfig) -> SynthConfig:
    d = cfg.data
    return SynthConfig(num_sequences=d.num_sequences, frames_per_seq=d.frames_per_seq, window=cfg.T,
                       stride=d.stride, channels=cfg.C, noise_std=d.noise_std,
                       dropout_prob=d.dropout_prob, dropout_len=d.dropout_len,
                       embed_seed=d.embed_seed)


def build_model(cfg: RunConfig, body: ToyBodyModel | None = None, variant: str = "full",
                seed: int | None = None) -> STRNet:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; choose from {', '.join(VARIANTS)}")
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    return STRNet(body or body_from_config(cfg), cfg.C, rng, fragments=cfg.fragments,
                  iterations=cfg.strategy.N, literal=cfg.strategy.literal,
                  mask_mode=cfg.ste.mask.mode, mask_q=cfg.ste.mask.q,
                  share_ttr_weights=cfg.ttr.share_weights, share_ste_gru=cfg.ste.share_gru,
                  kernel_width=cfg.ste.kernel_width, fusion_hidden=cfg.model.fusion_hidden,
                  regressor_hidden=cfg.model.regressor_hidden,
                  regressor_iterations=cfg.model.regressor_iterations, variant=variant)


def check_compatible(cfg: RunConfig, ds: Dataset) -> None:
    if len(ds) and (ds.window != cfg.T or ds.features.shape[2] != cfg.C):
        raise ConfigError(f"dataset windows are {ds.window}x{ds.features.shape[2]}, "
                          f"config expects T={cfg.T}, C={cfg.C}")
    if ds.joints3d.shape[2] != cfg.body.joints or ds.verts.shape[1] != cfg.body.vertices:
        raise ConfigError("dataset body model does not match the config")


# -- evaluation ----------------------------------------------------------------

def predict(model: STRNet, ds: Dataset, batch_size: int = 64) -> dict[str, np.ndarray]:
    out: dict[str, list] = {k: [] for k in ("theta", "beta", "cam", "verts", "joints3d", "joints2d")}
    with no_grad():
        for start in range(0, len(ds), batch_size):
            p = model(ds.features[start:start + batch_size])
            for k in out:
                out[k].append(getattr(p, k).data)
    return {k: np.concatenate(v) for k, v in out.items()}


def oracle_predictions(ds: Dataset) -> dict[str, np.ndarray]:
    """Ground truth laid out like :func:`predict` output (debugging aid)."""
    gt = ds.targets()
    return {"theta": gt["theta"], "beta": gt["beta"], "cam": ds.cam, "verts": ds.verts,
            "joints3d": gt["joints3d"], "joints2d": gt["joints2d"]}


def sequence_runs(ds: Dataset) -> list[np.ndarray]:
    """Window indices grouped into runs of consecutive target frames per sequence."""
    runs = []
    order = np.lexsort((ds.frame, ds.seq_id))
    current: list[int] = []
    for i in order:
        if current and (ds.seq_id[i] != ds.seq_id[current[-1]] or ds.frame[i] != ds.frame[current[-1]] + 1):
            runs.append(np.array(current))
            current = []
        current.append(int(i))
    if current:
        runs.append(np.array(current))
    return runs


def evaluate_predictions(pred: dict[str, np.ndarray], ds: Dataset) -> MetricsReport:
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    gt = ds.targets()
    accel = [accel_per_frame(pred["joints3d"][r], gt["joints3d"][r]) for r in sequence_runs(ds)
             if len(r) >= 3]
    accel_err = float(np.concatenate(accel).mean()) if accel else float("nan")
    return MetricsReport(mpjpe=mpjpe(pred["joints3d"], gt["joints3d"]),
                         pa_mpjpe=pa_mpjpe(pred["joints3d"], gt["joints3d"]),
                         mpvpe=mpvpe(pred["verts"], ds.verts), accel_err=accel_err, n=len(ds))


def evaluate(model: STRNet, ds: Dataset) -> MetricsReport:
    return evaluate_predictions(predict(model, ds), ds)


def save_predictions(path, pred: dict[str, np.ndarray], ds: Dataset) -> None:
    container.save(path, PREDICTIONS_KIND,
                   {"pred_joints3d": pred["joints3d"], "gt_joints3d": ds.targets()["joints3d"],
                    "seq_id": ds.seq_id, "frame": ds.frame}, {"n": len(ds)})


def load_predictions(path) -> dict[str, np.ndarray]:
    arrays, _ = container.load(path, PREDICTIONS_KIND)
    return arrays


# -- training ------------------------------------------------------------------

@dataclass
class EpochLog:
    epoch: int
    loss: float
    loss_3d: float
    loss_2d: float
    loss_shape: float
    loss_pose: float
    lr: float
    val: MetricsReport | None

    HEADER = ("epoch", "loss", "loss_3d", "loss_2d", "loss_shape", "loss_pose", "lr",
              "val_mpjpe", "val_pa_mpjpe", "val_mpvpe", "val_accel_err")

    def row(self) -> list[str]:
        vals = [self.loss, self.loss_3d, self.loss_2d, self.loss_shape, self.loss_pose, self.lr]
        if self.val is not None:
            vals += [self.val.mpjpe, self.val.pa_mpjpe, self.val.mpvpe, self.val.accel_err]
        else:
            vals += [float("nan")] * 4
        return [str(self.epoch)] + [repr(float(v)) for v in vals]


class Trainer:
    def __init__(self, model: STRNet, cfg: RunConfig, seed: int | None = None):
        self.model = model
        self.cfg = cfg
        self.seed = cfg.seed if seed is None else seed
        self.weights = LossWeights(cfg.loss.w_3d, cfg.loss.w_2d, cfg.loss.w_shape, cfg.loss.w_pose)
        o = cfg.optim
        self.optimizer = Adam(model.parameters(), o.lr, o.beta1, o.beta2, o.eps)
        self.scheduler = PlateauScheduler(o.lr, o.patience, o.factor)
        self.epoch = 0

    def loss(self, ds: Dataset, idx):
        pred = self.model(ds.features[idx])
        return loss_lg(pred, ds.targets(idx, all_frames=self.cfg.loss.supervise_all), self.weights)

    def step(self, ds: Dataset, idx) -> tuple[float, dict[str, float]]:
        self.optimizer.zero_grad()
        total, terms = self.loss(ds, idx)
        total.backward()
        self.optimizer.lr = self.scheduler.lr
        self.optimizer.step()
        return total.item(), terms

    def run_epoch(self, ds: Dataset) -> dict[str, float]:
        rng = np.random.default_rng([self.seed, self.epoch])
        order = rng.permutation(len(ds))
        bs = self.cfg.optim.batch_size
        sums = {"loss": 0.0, "3d": 0.0, "2d": 0.0, "shape": 0.0, "pose": 0.0}
        count = 0
        for start in range(0, len(ds), bs):
            idx = np.sort(order[start:start + bs])
            loss, terms = self.step(ds, idx)
            n = len(idx)
            sums["loss"] += loss * n
            for k, v in terms.items():
                sums[k] += v * n
            count += n
        return {k: v / max(count, 1) for k, v in sums.items()}

    def fit(self, ds: Dataset, epochs: int, val: Dataset | None = None,
            on_epoch: Callable[[EpochLog], None] | None = None) -> list[EpochLog]:
        if len(ds) == 0 and epochs > 0:
            raise ValueError("cannot train on an empty dataset")
        logs = []
        for _ in range(epochs):
            lr = self.scheduler.lr
            stats = self.run_epoch(ds)
            self.epoch += 1
            report = evaluate(self.model, val if val is not None else ds)
            self.scheduler.update(report.pa_mpjpe)
            entry = EpochLog(self.epoch, stats["loss"], stats["3d"], stats["2d"], stats["shape"],
                             stats["pose"], lr, report)
            log.info("epoch %d loss %.5f pa_mpjpe %.5f lr %.2e", entry.epoch, entry.loss,
                     report.pa_mpjpe, lr)
            logs.append(entry)
            if on_epoch:
                on_epoch(entry)
        return logs

    # -- checkpoints --------------------------------------------------------
    def save(self, path, variant: str = "full") -> None:
        arrays = {f"param/{k}": v for k, v in self.model.state_dict().items()}
        names = [k for k, _ in self.model.named_parameters()]
        st = self.optimizer.state
        if st.m:
            for k, m, v in zip(names, st.m, st.v):
                arrays[f"adam.m/{k}"] = m
                arrays[f"adam.v/{k}"] = v
        meta = {"config": self.cfg.to_dict(), "epoch": self.epoch, "adam_step": st.step,
                "scheduler": self.scheduler.state(), "seed": self.seed, "variant": variant}
        container.save(path, CHECKPOINT_KIND, arrays, meta)

    @classmethod
    def load(cls, path) -> tuple["Trainer", str]:
        arrays, meta = container.load(path, CHECKPOINT_KIND)
        cfg = config_from_dict(meta["config"])
        variant = meta.get("variant", "full")
        model = build_model(cfg, variant=variant, seed=meta["seed"])
        model.load_state_dict({k[len("param/"):]: v for k, v in arrays.items() if k.startswith("param/")})
        trainer = cls(model, cfg, seed=meta["seed"])
        trainer.epoch = meta["epoch"]
        trainer.scheduler.load(meta["scheduler"])
        names = [k for k, _ in model.named_parameters()]
        if meta["adam_step"]:
            trainer.optimizer.state = AdamState(meta["adam_step"],
                                                [arrays[f"adam.m/{k}"] for k in names],
                                                [arrays[f"adam.v/{k}"] for k in names])
        return trainer, variant


# -- ablations -------------------------------------------------------------------

@dataclass
class AblationRow:
    variant: str
    pa_mpjpe: float
    accel_err: float
    mpjpe: float

    HEADER = ("variant", "pa_mpjpe", "accel_err", "mpjpe")

    def row(self) -> list[str]:
        return [self.variant] + [repr(float(v)) for v in (self.pa_mpjpe, self.accel_err, self.mpjpe)]


def run_ablation(cfg: RunConfig, train: Dataset, val: Dataset, variants=None,
                 seed: int | None = None, epochs: int | None = None) -> list[AblationRow]:
    """Train each variant from the same seed on the same data order, score on ``val``."""
    check_compatible(cfg, train)
    check_compatible(cfg, val)
    body = body_from_config(cfg)
    rows = []
    for name in variants or list(VARIANTS):
        model = build_model(cfg, body, variant=name, seed=seed)
        trainer = Trainer(model, cfg, seed=seed)
        trainer.fit(train, cfg.optim.epochs if epochs is None else epochs, val)
        report = evaluate(model, val)
        log.info("ablation %s pa_mpjpe %.5f accel %.5f", name, report.pa_mpjpe, report.accel_err)
        rows.append(AblationRow(name, report.pa_mpjpe, report.accel_err, report.mpjpe))
    return rows
