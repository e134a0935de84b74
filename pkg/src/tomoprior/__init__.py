"""SART-based CT reconstruction with interchangeable per-iteration priors."""

from .geometry import (
    ImageGrid,
    ParallelGeometry,
    Sinogram,
    SubsetPartition,
    default_num_detectors,
    partition_subsets,
)
from .projector import (
    BACKEND,
    NormalizationWeights,
    Projector,
    back_project,
    forward_project,
    normalization_weights,
)

__all__ = [
    "BACKEND",
    "ImageGrid",
    "NormalizationWeights",
    "ParallelGeometry",
    "Projector",
    "Sinogram",
    "SubsetPartition",
    "back_project",
    "default_num_detectors",
    "forward_project",
    "normalization_weights",
    "partition_subsets",
]

__version__ = "0.1.0"
