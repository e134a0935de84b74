"""Acquisition geometry and the core image/sinogram containers."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ParallelGeometry:
    """Parallel-beam acquisition: evenly spaced views over an angular arc.

    View angles are endpoint-exclusive: view i sits at
    ``angle_start + i * angular_range / num_views``, so a 180-degree scan
    never duplicates the 0-degree view.
    """

    num_views: int
    num_detectors: int
    angular_range: float = math.pi
    angle_start: float = 0.0
    detector_spacing: float = 1.0

    def __post_init__(self):
        if self.num_views < 1:
            raise ValueError(f"num_views must be >= 1, got {self.num_views}")
        if self.num_detectors < 1:
            raise ValueError(f"num_detectors must be >= 1, got {self.num_detectors}")
        # tolerance covers float32 roundtrip of pi in sinogram file headers
        if not (0.0 < self.angular_range <= math.pi * (1 + 1e-6)):
            raise ValueError(f"angular_range must lie in (0, pi], got {self.angular_range}")
        if not (self.detector_spacing > 0):
            raise ValueError("detector_spacing must be > 0")

    @property
    def angles(self) -> np.ndarray:
        step = self.angular_range / self.num_views
        return self.angle_start + step * np.arange(self.num_views)

    @property
    def detector_offsets(self) -> np.ndarray:
        """Signed detector positions (length units) measured from the center ray."""
        idx = np.arange(self.num_detectors) - (self.num_detectors - 1) / 2.0
        return idx * self.detector_spacing


def default_num_detectors(side: int) -> int:
    """Detector count covering the full image circle, ceil(1.5 * side)."""
    return int(math.ceil(1.5 * side))


@dataclass
class ImageGrid:
    """Square attenuation image. ``values`` has shape (side, side), row-major."""

    values: np.ndarray
    pixel_size: float = 1.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise ValueError(f"image must be square 2D, got shape {self.values.shape}")
        if not (self.pixel_size > 0):
            raise ValueError("pixel_size must be > 0")

    @property
    def side(self) -> int:
        return self.values.shape[0]

    @classmethod
    def zeros(cls, side: int, pixel_size: float = 1.0) -> "ImageGrid":
        return cls(np.zeros((side, side)), pixel_size)

    def copy(self) -> "ImageGrid":
        return ImageGrid(self.values.copy(), self.pixel_size)


@dataclass
class Sinogram:
    """Line-integral data, shape (num_views, num_detectors), row-major by view."""

    geometry: ParallelGeometry
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (self.geometry.num_views, self.geometry.num_detectors)
        if self.values.shape != expected:
            raise ValueError(
                f"sinogram shape {self.values.shape} does not match geometry {expected}"
            )

    def copy(self) -> "Sinogram":
        return Sinogram(self.geometry, self.values.copy())


@dataclass
class SubsetPartition:
    """Interleaved view subsets: subset w holds views {w, w+N, w+2N, ...}."""

    num_subsets: int
    subsets: list = field(default_factory=list)

    def __len__(self) -> int:
        return self.num_subsets


def partition_subsets(num_views: int, num_subsets: int) -> SubsetPartition:
    """Split view indices into interleaved subsets of near-equal size."""
    if not (1 <= num_subsets <= num_views):
        raise ValueError(
            f"num_subsets must lie in [1, {num_views}], got {num_subsets}"
        )
    subsets = [
        np.arange(w, num_views, num_subsets, dtype=np.intp)
        for w in range(num_subsets)
    ]
    return SubsetPartition(num_subsets=num_subsets, subsets=subsets)
