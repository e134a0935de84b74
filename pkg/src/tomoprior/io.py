"""Image and sinogram file formats (magics "TPI1" / "TPS1") and PNG export."""

from __future__ import annotations

import math
import struct

import numpy as np

from .geometry import ImageGrid, ParallelGeometry, Sinogram

IMAGE_MAGIC = b"TPI1"
SINO_MAGIC = b"TPS1"


class DataFileError(Exception):
    pass


def save_image(image: ImageGrid, path) -> None:
    with open(path, "wb") as fh:
        fh.write(IMAGE_MAGIC)
        fh.write(struct.pack("<If", image.side, image.pixel_size))
        fh.write(image.values.astype("<f4").tobytes(order="C"))


def load_image(path) -> ImageGrid:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != IMAGE_MAGIC:
        raise DataFileError(f"{path}: not a TPI1 image file")
    side, pixel_size = struct.unpack("<If", raw[4:12])
    expected = 12 + side * side * 4
    if len(raw) != expected:
        raise DataFileError(f"{path}: expected {expected} bytes, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", count=side * side, offset=12)
    return ImageGrid(values.reshape(side, side).astype(np.float64), float(pixel_size))


def save_sinogram(sino: Sinogram, path) -> None:
    g = sino.geometry
    with open(path, "wb") as fh:
        fh.write(SINO_MAGIC)
        fh.write(struct.pack("<IIfff", g.num_views, g.num_detectors,
                             g.detector_spacing, g.angle_start, g.angular_range))
        fh.write(sino.values.astype("<f4").tobytes(order="C"))


def load_sinogram(path) -> Sinogram:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:4] != SINO_MAGIC:
        raise DataFileError(f"{path}: not a TPS1 sinogram file")
    nv, nd, spacing, start, arange_ = struct.unpack("<IIfff", raw[4:24])
    expected = 24 + nv * nd * 4
    if len(raw) != expected:
        raise DataFileError(f"{path}: expected {expected} bytes, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", count=nv * nd, offset=24)
    geom = ParallelGeometry(num_views=nv, num_detectors=nd,
                            angular_range=float(arange_), angle_start=float(start),
                            detector_spacing=float(spacing))
    return Sinogram(geom, values.reshape(nv, nd).astype(np.float64))


def load_image_any(path) -> ImageGrid:
    """Raw-image loader: TPI1 or .npy files holding a square float array."""
    name = str(path)
    if name.endswith(".npy"):
        return ImageGrid(np.load(path).astype(np.float64))
    return load_image(path)


def export_png(image: ImageGrid, path, window: tuple | None = None) -> None:
    """16-bit grayscale PNG for viewing only (windowed to [lo, hi])."""
    from PIL import Image

    lo, hi = window if window else (float(image.values.min()), float(image.values.max()))
    if not math.isfinite(hi - lo) or hi <= lo:
        hi = lo + 1.0
    scaled = np.clip((image.values - lo) / (hi - lo), 0.0, 1.0)
    Image.fromarray((scaled * 65535).astype(np.uint16), mode="I;16").save(path)
