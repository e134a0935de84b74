# cython: boundscheck=False, wraparound=False, cdivision=True
"""Cython projection kernels (default backend).

Same Joseph-style interpolating discretization as _kernels_py; the two
backends agree to floating-point roundoff and the backprojector is the
exact transpose of the forward projector.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin, floor

cnp.import_array()

BACKEND = "cython"


def forward(double[:, ::1] image, double pixel_size, double[::1] angles,
            double[::1] det_offsets, double[::1] sample_offsets):
    cdef Py_ssize_t side = image.shape[0]
    cdef Py_ssize_t nv = angles.shape[0]
    cdef Py_ssize_t nd = det_offsets.shape[0]
    cdef Py_ssize_t ns = sample_offsets.shape[0]
    cdef double step = pixel_size
    if ns > 1:
        step = sample_offsets[1] - sample_offsets[0]

    out = np.empty((nv, nd))
    cdef double[:, ::1] sino = out
    cdef Py_ssize_t v, d, k, i0, j0
    cdef double cos_a, sin_a, t, s, fx, fy, dx, dy, half, acc

    half = (side - 1) / 2.0
    for v in range(nv):
        cos_a = cos(angles[v])
        sin_a = sin(angles[v])
        for d in range(nd):
            t = det_offsets[d]
            acc = 0.0
            for k in range(ns):
                s = sample_offsets[k]
                fx = (t * cos_a - s * sin_a) / pixel_size + half
                fy = (t * sin_a + s * cos_a) / pixel_size + half
                j0 = <Py_ssize_t>floor(fx)
                i0 = <Py_ssize_t>floor(fy)
                dx = fx - j0
                dy = fy - i0
                if 0 <= i0 < side and 0 <= j0 < side:
                    acc += (1 - dx) * (1 - dy) * image[i0, j0]
                if 0 <= i0 < side and 0 <= j0 + 1 < side:
                    acc += dx * (1 - dy) * image[i0, j0 + 1]
                if 0 <= i0 + 1 < side and 0 <= j0 < side:
                    acc += (1 - dx) * dy * image[i0 + 1, j0]
                if 0 <= i0 + 1 < side and 0 <= j0 + 1 < side:
                    acc += dx * dy * image[i0 + 1, j0 + 1]
            sino[v, d] = acc * step
    return out


def back(double[:, ::1] sino, Py_ssize_t side, double pixel_size,
         double[::1] angles, double[::1] det_offsets, double[::1] sample_offsets):
    cdef Py_ssize_t nv = angles.shape[0]
    cdef Py_ssize_t nd = det_offsets.shape[0]
    cdef Py_ssize_t ns = sample_offsets.shape[0]
    cdef double step = pixel_size
    if ns > 1:
        step = sample_offsets[1] - sample_offsets[0]

    out = np.zeros((side, side))
    cdef double[:, ::1] image = out
    cdef Py_ssize_t v, d, k, i0, j0
    cdef double cos_a, sin_a, t, s, fx, fy, dx, dy, half, val

    half = (side - 1) / 2.0
    for v in range(nv):
        cos_a = cos(angles[v])
        sin_a = sin(angles[v])
        for d in range(nd):
            t = det_offsets[d]
            val = sino[v, d] * step
            if val == 0.0:
                continue
            for k in range(ns):
                s = sample_offsets[k]
                fx = (t * cos_a - s * sin_a) / pixel_size + half
                fy = (t * sin_a + s * cos_a) / pixel_size + half
                j0 = <Py_ssize_t>floor(fx)
                i0 = <Py_ssize_t>floor(fy)
                dx = fx - j0
                dy = fy - i0
                if 0 <= i0 < side and 0 <= j0 < side:
                    image[i0, j0] += (1 - dx) * (1 - dy) * val
                if 0 <= i0 < side and 0 <= j0 + 1 < side:
                    image[i0, j0 + 1] += dx * (1 - dy) * val
                if 0 <= i0 + 1 < side and 0 <= j0 < side:
                    image[i0 + 1, j0] += (1 - dx) * dy * val
                if 0 <= i0 + 1 < side and 0 <= j0 + 1 < side:
                    image[i0 + 1, j0 + 1] += dx * dy * val
    return out
