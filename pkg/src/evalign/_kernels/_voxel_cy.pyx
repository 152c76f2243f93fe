# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled event accumulation kernels (hot inner loops of the encoder)."""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def accumulate_bilinear(t, x, y, p, t_start, t_end, int bins, int height, int width):
    """Same contract as the numpy fallback, one typed pass over the events."""
    cdef cnp.ndarray[cnp.float64_t, ndim=3] grid = np.zeros(
        (bins, height, width), np.float64
    )
    cdef Py_ssize_t n = len(t)
    if n == 0:
        return grid

    cdef const cnp.uint64_t[:] tv = np.ascontiguousarray(t, np.uint64)
    cdef const cnp.uint16_t[:] xv = np.ascontiguousarray(x, np.uint16)
    cdef const cnp.uint16_t[:] yv = np.ascontiguousarray(y, np.uint16)
    cdef const cnp.int8_t[:] pv = np.ascontiguousarray(p, np.int8)
    cdef double[:, :, :] gv = grid

    cdef double t0 = <double> t_start
    cdef double span = (<double> t_end) - t0
    cdef double scale = (bins - 1) / span if span > 0 else 0.0

    cdef Py_ssize_t i
    cdef int xi, yi, b0, b1
    cdef double tstar, w_left, w_right, pf
    for i in range(n):
        xi = xv[i]
        yi = yv[i]
        if xi >= width or yi >= height:
            continue
        tstar = ((<double> tv[i]) - t0) * scale
        b0 = <int> floor(tstar)
        w_left = 1.0 - (tstar - b0)
        w_right = 1.0 - w_left
        pf = <double> pv[i]
        if 0 <= b0 < bins:
            gv[b0, yi, xi] += pf * w_left
        b1 = b0 + 1
        if 0 <= b1 < bins:
            gv[b1, yi, xi] += pf * w_right
    return grid


def occupancy_grid(x, y, int height, int width):
    cdef cnp.ndarray[cnp.uint8_t, ndim=2] occ = np.zeros((height, width), np.uint8)
    cdef Py_ssize_t n = len(x)
    if n == 0:
        return occ

    cdef const cnp.uint16_t[:] xv = np.ascontiguousarray(x, np.uint16)
    cdef const cnp.uint16_t[:] yv = np.ascontiguousarray(y, np.uint16)
    cdef cnp.uint8_t[:, :] ov = occ

    cdef Py_ssize_t i
    cdef int xi, yi
    for i in range(n):
        xi = xv[i]
        yi = yv[i]
        if xi < width and yi < height:
            ov[yi, xi] = 1
    return occ
