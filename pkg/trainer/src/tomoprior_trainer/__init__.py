"""Adversarial trainer for the tomoprior generator prior.

Trains a self-attention generator against a small discriminator on paired
(degraded, reference) SART reconstructions and exports portable TPW1 weight
files that the reconstruction package executes at inference time.
"""

from .losses import discriminator_loss, generator_loss
from .model import Discriminator, TorchGenerator
from .train import TrainConfig, TrainingTrace, train
from .verify import export_and_verify, verify_against_primary

__version__ = "0.1.0"

__all__ = [
    "Discriminator",
    "TorchGenerator",
    "TrainConfig",
    "TrainingTrace",
    "discriminator_loss",
    "export_and_verify",
    "generator_loss",
    "train",
    "verify_against_primary",
]
