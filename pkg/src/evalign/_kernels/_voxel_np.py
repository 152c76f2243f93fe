"""Pure-numpy event accumulation kernels (fallback for the compiled core)."""

import numpy as np


def accumulate_bilinear(t, x, y, p, t_start, t_end, bins, height, width):
    """Scatter events into a bins*height*width grid with a temporal tent kernel.

    Each in-bounds event deposits p * (1 - frac) into bin floor(t*) and the
    complementary p * frac into the next bin, where t* spreads the window's
    timestamps over [0, bins - 1]. The two weights are exact complements so
    every interior event deposits total mass p exactly.
    """
    grid = np.zeros((bins, height, width), np.float64)
    if len(t) == 0:
        return grid
    inb = (np.asarray(x) < width) & (np.asarray(y) < height)
    if not inb.any():
        return grid
    tf = np.asarray(t)[inb].astype(np.float64)
    xi = np.asarray(x)[inb].astype(np.int64)
    yi = np.asarray(y)[inb].astype(np.int64)
    pf = np.asarray(p)[inb].astype(np.float64)

    # same operation order as the compiled kernel, for bit-identical grids
    span = float(t_end) - float(t_start)
    scale = (bins - 1) / span if span > 0 else 0.0
    tstar = (tf - float(t_start)) * scale

    b0 = np.floor(tstar).astype(np.int64)
    w_left = 1.0 - (tstar - b0)
    w_right = 1.0 - w_left

    flat = grid.reshape(-1)
    base = yi * width + xi
    plane = height * width
    b1 = b0 + 1
    ok0 = (b0 >= 0) & (b0 < bins)
    ok1 = (b1 >= 0) & (b1 < bins)
    # interleave the two deposits per event so the accumulation order (and
    # therefore every rounding step) matches the compiled kernel exactly;
    # out-of-range bins deposit 0.0 at slot 0, which leaves the sum unchanged
    idx = np.zeros((len(b0), 2), np.int64)
    val = np.zeros((len(b0), 2), np.float64)
    idx[ok0, 0] = b0[ok0] * plane + base[ok0]
    val[ok0, 0] = pf[ok0] * w_left[ok0]
    idx[ok1, 1] = b1[ok1] * plane + base[ok1]
    val[ok1, 1] = pf[ok1] * w_right[ok1]
    np.add.at(flat, idx.reshape(-1), val.reshape(-1))
    return grid


def occupancy_grid(x, y, height, width):
    """Binary map of pixels that received at least one in-bounds event."""
    occ = np.zeros((height, width), np.uint8)
    if len(x) == 0:
        return occ
    inb = (np.asarray(x) < width) & (np.asarray(y) < height)
    occ[np.asarray(y)[inb].astype(np.int64), np.asarray(x)[inb].astype(np.int64)] = 1
    return occ
