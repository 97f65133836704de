"""Residual CNN denoiser with hand-written forward and backward passes."""

from .gradcheck import GradCheckResult, check_gradients
from .model import (DenoiserConfig, DenoiserModel, adam_update, backward_and_step, forward,
                    gradients, loss)
from .train import EpochRecord, TrainingLog, denoise_image, train

__all__ = [
    "DenoiserConfig", "DenoiserModel", "forward", "loss", "gradients", "adam_update",
    "backward_and_step", "check_gradients", "GradCheckResult", "train", "TrainingLog",
    "EpochRecord", "denoise_image",
]
