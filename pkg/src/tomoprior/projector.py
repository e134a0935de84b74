"""Matrix-free system-matrix application and normalization weights.

The compiled Cython kernel is used when available; set
``TOMOPRIOR_BACKEND=python`` (or ``cython``) to force a backend.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .geometry import ImageGrid, ParallelGeometry, Sinogram, SubsetPartition
from . import _kernels_py

_requested = os.environ.get("TOMOPRIOR_BACKEND", "auto").lower()
if _requested not in ("auto", "python", "cython"):
    raise ValueError(f"TOMOPRIOR_BACKEND must be auto/python/cython, got {_requested!r}")

if _requested == "python":
    _kernels = _kernels_py
else:
    try:
        from . import _kernels_cy as _kernels  # type: ignore[no-redef]
    except ImportError:
        if _requested == "cython":
            raise
        _kernels = _kernels_py

BACKEND = _kernels.BACKEND


def get_kernels(backend: str | None = None):
    """Return the kernel module for `backend` (None = the active default)."""
    if backend in (None, "auto"):
        return _kernels
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels_cy
        return _kernels_cy
    raise ValueError(f"unknown backend {backend!r}")


def _sample_offsets(side: int, pixel_size: float) -> np.ndarray:
    """Ray sample positions at pixel-size steps covering the image diagonal."""
    half_extent = 0.5 * math.sqrt(2.0) * side * pixel_size
    n = int(math.ceil(2.0 * half_extent / pixel_size)) + 1
    return (np.arange(n) - (n - 1) / 2.0) * pixel_size


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{what} contains non-finite values")


class Projector:
    """Forward/back projection bound to one (geometry, grid) pair."""

    def __init__(self, geom: ParallelGeometry, side: int, pixel_size: float = 1.0,
                 backend: str | None = None):
        self.geom = geom
        self.side = side
        self.pixel_size = float(pixel_size)
        self._kern = get_kernels(backend)
        self._angles = np.ascontiguousarray(geom.angles, dtype=np.float64)
        self._dets = np.ascontiguousarray(geom.detector_offsets, dtype=np.float64)
        self._samples = np.ascontiguousarray(
            _sample_offsets(side, self.pixel_size), dtype=np.float64)

    def fp(self, image: np.ndarray, views: np.ndarray | None = None) -> np.ndarray:
        """Apply A (or the subset rows A_w when `views` is given)."""
        image = np.ascontiguousarray(image, dtype=np.float64)
        angles = self._angles if views is None else np.ascontiguousarray(self._angles[views])
        return self._kern.forward(image, self.pixel_size, angles, self._dets, self._samples)

    def bp(self, sino: np.ndarray, views: np.ndarray | None = None) -> np.ndarray:
        """Apply the exact transpose of `fp` for the same view selection."""
        sino = np.ascontiguousarray(sino, dtype=np.float64)
        angles = self._angles if views is None else np.ascontiguousarray(self._angles[views])
        return self._kern.back(sino, self.side, self.pixel_size, angles,
                               self._dets, self._samples)


def forward_project(image: ImageGrid, geom: ParallelGeometry,
                    backend: str | None = None) -> Sinogram:
    """Discrete line integrals of `image` along every ray of `geom`."""
    _check_finite(image.values, "image")
    proj = Projector(geom, image.side, image.pixel_size, backend)
    return Sinogram(geom, proj.fp(image.values))


def back_project(sino: Sinogram, side: int, pixel_size: float = 1.0,
                 backend: str | None = None) -> ImageGrid:
    """Transpose of forward_project applied to `sino`."""
    _check_finite(sino.values, "sinogram")
    proj = Projector(sino.geometry, side, pixel_size, backend)
    return ImageGrid(proj.bp(sino.values), pixel_size)


@dataclass
class NormalizationWeights:
    """Per-subset SART scaling weights.

    ``col_weights[w]`` is the (side, side) array of reciprocal column sums of
    A_w; ``row_weights[w]`` has one reciprocal row sum per ray of subset w
    (shape (len(subset), num_detectors)). Zero sums carry weight 0 so the
    update is a no-op for rays missing the image and pixels outside the
    field of view.
    """

    col_weights: list
    row_weights: list


def _safe_reciprocal(arr: np.ndarray) -> np.ndarray:
    out = np.zeros_like(arr)
    mask = arr > 1e-12
    out[mask] = 1.0 / arr[mask]
    return out


def normalization_weights(geom: ParallelGeometry, side: int, pixel_size: float,
                          partition: SubsetPartition,
                          projector: Projector | None = None) -> NormalizationWeights:
    """Reciprocal row/column sums of each subset block A_w, computed matrix-free.

    Row sums are the forward projection of an all-ones image; column sums are
    the backprojection of an all-ones subset sinogram (valid because every
    system-matrix entry is nonnegative).
    """
    proj = projector or Projector(geom, side, pixel_size)
    ones_img = np.ones((side, side))
    col_weights = []
    row_weights = []
    for views in partition.subsets:
        row_sums = proj.fp(ones_img, views)
        ones_sino = np.ones((len(views), geom.num_detectors))
        col_sums = proj.bp(ones_sino, views)
        row_weights.append(_safe_reciprocal(row_sums))
        col_weights.append(_safe_reciprocal(col_sums))
    return NormalizationWeights(col_weights=col_weights, row_weights=row_weights)
