"""Procedural test phantoms: Shepp-Logan ellipses and randomized variants."""

from __future__ import annotations

import numpy as np

from .geometry import ImageGrid

# (x0, y0, a, b, angle_deg, additive value); coordinates in [-1, 1]
SHEPP_LOGAN_ELLIPSES = [
    (0.0, 0.0, 0.69, 0.92, 0.0, 1.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.2),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.2),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.1),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.1),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.1),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.1),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.1),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.1),
]


def _render_ellipses(side: int, ellipses, pixel_size: float = 1.0) -> ImageGrid:
    coords = (np.arange(side) - (side - 1) / 2.0) / (side / 2.0)
    X, Y = np.meshgrid(coords, coords)
    img = np.zeros((side, side))
    for x0, y0, a, b, angle_deg, value in ellipses:
        theta = np.deg2rad(angle_deg)
        xr = (X - x0) * np.cos(theta) + (Y - y0) * np.sin(theta)
        yr = -(X - x0) * np.sin(theta) + (Y - y0) * np.cos(theta)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += value
    return ImageGrid(np.clip(img, 0.0, None), pixel_size)


def shepp_logan(side: int, pixel_size: float = 1.0) -> ImageGrid:
    """Modified Shepp-Logan phantom (high-contrast interior values)."""
    return _render_ellipses(side, SHEPP_LOGAN_ELLIPSES, pixel_size)


def random_phantom(side: int, seed: int, num_ellipses: int = 6,
                   pixel_size: float = 1.0) -> ImageGrid:
    """Randomized skull-plus-inclusions ellipse phantom, values in [0, ~1]."""
    rng = np.random.default_rng(seed)
    ellipses = [(0.0, 0.0, 0.85, 0.9, 0.0, 0.5)]
    for _ in range(num_ellipses):
        a = rng.uniform(0.05, 0.35)
        b = rng.uniform(0.05, 0.35)
        r = rng.uniform(0.0, 0.55)
        phi = rng.uniform(0.0, 2 * np.pi)
        ellipses.append((
            r * np.cos(phi), r * np.sin(phi), a, b,
            rng.uniform(0.0, 180.0), rng.uniform(-0.3, 0.4),
        ))
    return _render_ellipses(side, ellipses, pixel_size)


def smooth_phantom(side: int, pixel_size: float = 1.0) -> ImageGrid:
    """Smooth two-blob Gaussian phantom (band-limited; fast SART convergence)."""
    coords = np.arange(side) - (side - 1) / 2.0
    X, Y = np.meshgrid(coords, coords)
    s = side / 64.0
    img = (np.exp(-(X ** 2 + Y ** 2) / (2 * (12 * s) ** 2))
           + 0.5 * np.exp(-((X - 8 * s) ** 2 + (Y + 5 * s) ** 2) / (2 * (6 * s) ** 2)))
    return ImageGrid(img, pixel_size)


def phantom_batch(count: int, side: int, seed: int) -> list[ImageGrid]:
    """`count` seed-deterministic random phantoms."""
    return [random_phantom(side, seed + k) for k in range(count)]
