"""Event accumulation kernels: compiled core with a numpy fallback.

The compiled extension is selected at import when available; both
implementations share one contract and produce bit-identical grids
(same accumulation order, float64 throughout).
"""

from evalign._kernels import _voxel_np

try:
    from evalign._kernels import _voxel_cy as _impl

    HAVE_COMPILED = True
except ImportError:
    _impl = _voxel_np
    HAVE_COMPILED = False

accumulate_bilinear = _impl.accumulate_bilinear
occupancy_grid = _impl.occupancy_grid


def implementations() -> dict:
    """Available kernel backends by name, for tests and benchmarks."""
    impls = {"numpy": _voxel_np}
    if HAVE_COMPILED:
        impls["compiled"] = _impl
    return impls
