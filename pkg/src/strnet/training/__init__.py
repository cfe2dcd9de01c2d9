from .loss import LossWeights, loss_lg
from .metrics import MetricsReport, accel_error, accel_per_frame, mpjpe, mpvpe, pa_mpjpe
from .optim import Adam, AdamState, PlateauScheduler, adam_step, lr_schedule
from .synth import Dataset, SynthConfig, gen_synthetic_dataset

__all__ = [
    "Adam", "AdamState", "Dataset", "LossWeights", "MetricsReport", "PlateauScheduler",
    "SynthConfig", "accel_error", "accel_per_frame", "adam_step", "gen_synthetic_dataset",
    "loss_lg", "lr_schedule", "mpjpe", "mpvpe", "pa_mpjpe",
]
