"""Spatio-temporal tendency reasoning (STR) for video human pose and shape, at desk scale."""

from .config import ConfigError, RunConfig, load_config
from .model import VARIANTS, Prediction, STRNet

__version__ = "0.1.0"

__all__ = ["VARIANTS", "ConfigError", "Prediction", "RunConfig", "STRNet", "load_config"]
