"""3x3 same-padding convolution kernels with backend selection.

The compiled extension (``mrdiff._convcore``) is preferred when it built;
a pure-numpy path based on sliding windows is the fallback. Set
``MRDIFF_PURE=1`` to force the numpy path. Both backends implement the
cross-correlation convention with zero padding of 1, so spatial extents
are preserved.
"""

import os

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

if os.environ.get("MRDIFF_PURE", "") not in ("", "0"):
    _core = None
else:
    try:
        from . import _convcore as _core
    except ImportError:
        _core = None

BACKEND = "compiled" if _core is not None else "numpy"


def _check(x, k):
    if x.ndim != 3 or k.ndim != 4 or k.shape[2:] != (3, 3):
        raise DimensionError(f"expected input (cin,h,w) and kernel (cout,cin,3,3), got {x.shape} and {k.shape}")
    if x.shape[0] != k.shape[1]:
        raise DimensionError(f"input channels {x.shape[0]} != kernel channels {k.shape[1]}")


def _as64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _windows(x):
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1)))
    return sliding_window_view(xp, (3, 3), axis=(1, 2))


def conv2d_forward(x, k):
    """Cross-correlate (cin,h,w) with (cout,cin,3,3), returning (cout,h,w)."""
    x, k = _as64(x), _as64(k)
    _check(x, k)
    if _core is not None:
        return _core.conv2d_forward(x, k)
    return np.einsum("mijab,vmab->vij", _windows(x), k, optimize=True)


def conv2d_grad_kernel(x, gout):
    """Gradient of the forward output w.r.t. the kernel; returns (cout,cin,3,3)."""
    x, gout = _as64(x), _as64(gout)
    if _core is not None:
        return _core.conv2d_grad_kernel(x, gout)
    return np.einsum("mijab,vij->vmab", _windows(x), gout, optimize=True)


def conv2d_grad_input(gout, k):
    """Gradient w.r.t. the input: correlate gout with the swapped, flipped kernel."""
    kT = np.ascontiguousarray(k.transpose(1, 0, 2, 3)[:, :, ::-1, ::-1])
    return conv2d_forward(_as64(gout), kT)
