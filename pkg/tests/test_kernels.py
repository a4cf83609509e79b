"""Convolution kernel backends against a direct-summation oracle."""

import numpy as np
import pytest

from mrdiff import kernels
from mrdiff.errors import DimensionError


def conv_oracle(x, k):
    """Direct six-loop cross-correlation with zero padding 1."""
    cin, h, w = x.shape
    cout = k.shape[0]
    out = np.zeros((cout, h, w))
    for v in range(cout):
        for m in range(cin):
            for i in range(h):
                for j in range(w):
                    for dy in range(3):
                        for dx in range(3):
                            ii, jj = i + dy - 1, j + dx - 1
                            if 0 <= ii < h and 0 <= jj < w:
                                out[v, i, j] += x[m, ii, jj] * k[v, m, dy, dx]
    return out


@pytest.fixture
def case(rng):
    x = rng.standard_normal((2, 6, 7))
    k = rng.standard_normal((3, 2, 3, 3))
    return x, k


def test_forward_matches_oracle(case):
    x, k = case
    assert np.abs(kernels.conv2d_forward(x, k) - conv_oracle(x, k)).max() < 1e-12


def test_grad_kernel_matches_oracle(case, rng):
    x, k = case
    gout = rng.standard_normal((3, 6, 7))
    # d out[v,i,j] / d k[v,m,dy,dx] summed against gout
    ref = np.zeros_like(k)
    for v in range(3):
        for m in range(2):
            for dy in range(3):
                for dx in range(3):
                    for i in range(6):
                        for j in range(7):
                            ii, jj = i + dy - 1, j + dx - 1
                            if 0 <= ii < 6 and 0 <= jj < 7:
                                ref[v, m, dy, dx] += gout[v, i, j] * x[m, ii, jj]
    assert np.abs(kernels.conv2d_grad_kernel(x, gout) - ref).max() < 1e-12


def test_grad_input_is_adjoint(case, rng):
    x, k = case
    gout = rng.standard_normal((3, 6, 7))
    gin = kernels.conv2d_grad_input(gout, k)
    # <conv(x), gout> == <x, conv^T(gout)>
    lhs = float((kernels.conv2d_forward(x, k) * gout).sum())
    rhs = float((x * gin).sum())
    assert abs(lhs - rhs) < 1e-10


def test_backends_agree(case):
    x, k = case
    from mrdiff.kernels import _core, _windows

    if _core is None:
        pytest.skip("compiled backend not built")
    ref = np.einsum("mijab,vmab->vij", _windows(x), k)
    assert np.abs(_core.conv2d_forward(x, k) - ref).max() < 1e-12
    gout = x.sum(axis=0, keepdims=True).repeat(3, axis=0)
    ref_gk = np.einsum("mijab,vij->vmab", _windows(x), gout)
    assert np.abs(_core.conv2d_grad_kernel(x, gout) - ref_gk).max() < 1e-12


def test_shape_validation():
    with pytest.raises(DimensionError):
        kernels.conv2d_forward(np.zeros((2, 4, 4)), np.zeros((3, 5, 3, 3)))
    with pytest.raises(DimensionError):
        kernels.conv2d_forward(np.zeros((2, 4, 4)), np.zeros((3, 2, 5, 5)))
