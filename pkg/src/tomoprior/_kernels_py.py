"""Pure-numpy projection kernels (fallback backend).

Joseph-style interpolating ray tracing: each ray is sampled at pixel-size
steps, values are bilinearly interpolated, and the sum is scaled by the
step length. The backprojection kernel scatters through the exact same
weights, so it is the exact transpose of the forward kernel.
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"


def _sample_geometry(side, pixel_size, angle, det_offsets, sample_offsets):
    """Fractional (row, col) pixel coordinates for every (detector, sample)."""
    cos_a = np.cos(angle)
    sin_a = np.sin(angle)
    t = det_offsets[:, None]
    s = sample_offsets[None, :]
    px = t * cos_a - s * sin_a
    py = t * sin_a + s * cos_a
    half = (side - 1) / 2.0
    fx = px / pixel_size + half  # column coordinate
    fy = py / pixel_size + half  # row coordinate
    return fy, fx


def _corner_terms(fy, fx, side):
    """Yield (rows, cols, weight, valid) for the four bilinear corners."""
    j0 = np.floor(fx).astype(np.intp)
    i0 = np.floor(fy).astype(np.intp)
    dx = fx - j0
    dy = fy - i0
    for di, dj, w in (
        (0, 0, (1 - dx) * (1 - dy)),
        (0, 1, dx * (1 - dy)),
        (1, 0, (1 - dx) * dy),
        (1, 1, dx * dy),
    ):
        rr = i0 + di
        cc = j0 + dj
        valid = (rr >= 0) & (rr < side) & (cc >= 0) & (cc < side)
        yield rr, cc, w, valid


def forward(image, pixel_size, angles, det_offsets, sample_offsets):
    side = image.shape[0]
    step = sample_offsets[1] - sample_offsets[0] if len(sample_offsets) > 1 else pixel_size
    flat = image.ravel()
    sino = np.empty((len(angles), len(det_offsets)))
    for v, angle in enumerate(angles):
        fy, fx = _sample_geometry(side, pixel_size, angle, det_offsets, sample_offsets)
        acc = np.zeros(fy.shape)
        for rr, cc, w, valid in _corner_terms(fy, fx, side):
            idx = np.where(valid, rr * side + cc, 0)
            acc += np.where(valid, w * flat[idx], 0.0)
        sino[v] = acc.sum(axis=1) * step
    return sino


def back(sino, side, pixel_size, angles, det_offsets, sample_offsets):
    step = sample_offsets[1] - sample_offsets[0] if len(sample_offsets) > 1 else pixel_size
    out = np.zeros(side * side)
    for v, angle in enumerate(angles):
        fy, fx = _sample_geometry(side, pixel_size, angle, det_offsets, sample_offsets)
        ray_val = sino[v][:, None] * step
        for rr, cc, w, valid in _corner_terms(fy, fx, side):
            contrib = (w * ray_val)[valid]
            idx = (rr * side + cc)[valid]
            out += np.bincount(idx, weights=contrib, minlength=side * side)
    return out.reshape(side, side)
