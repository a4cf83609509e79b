"""PSNR and SSIM against direct-formula and sliding-window oracles."""

import math

import numpy as np
import pytest

from mrdiff import psnr, ssim
from mrdiff.errors import DimensionError
from mrdiff.metrics import SSIM_K1, SSIM_K2, _gaussian_window


def ssim_oracle(x, ref):
    """Naive windowed SSIM: explicit loops over 11x11 positions."""
    win = _gaussian_window()
    L = ref.max()
    c1, c2 = (SSIM_K1 * L) ** 2, (SSIM_K2 * L) ** 2
    h, w = x.shape
    vals = []
    for i in range(h - 10):
        for j in range(w - 10):
            px = x[i : i + 11, j : j + 11]
            py = ref[i : i + 11, j : j + 11]
            mx = (win * px).sum()
            my = (win * py).sum()
            vx = (win * px * px).sum() - mx * mx
            vy = (win * py * py).sum() - my * my
            cxy = (win * px * py).sum() - mx * my
            vals.append(((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx**2 + my**2 + c1) * (vx + vy + c2)))
    return float(np.mean(vals))


class TestPSNR:
    def test_identical_images_give_inf(self, rng):
        x = rng.random((6, 6))
        assert psnr(x, x) == math.inf

    def test_analytic_offset(self):
        ref = np.ones((4, 4))
        assert psnr(ref + 0.1, ref) == pytest.approx(20.0, abs=1e-12)

    def test_matches_direct_formula(self, rng):
        x, ref = rng.random((8, 8)), rng.random((8, 8))
        ref_val = 10 * math.log10(ref.max() ** 2 / np.mean((x - ref) ** 2))
        assert abs(psnr(x, ref) - ref_val) < 1e-10

    def test_decreases_with_noise(self, rng):
        ref = rng.random((16, 16))
        noise = rng.standard_normal((16, 16))
        vals = [psnr(ref + a * noise, ref) for a in (0.01, 0.05, 0.2, 1.0)]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr(np.zeros((3, 3)), np.zeros((4, 4)))


class TestSSIM:
    def test_self_similarity_is_exactly_one(self, rng):
        x = rng.random((16, 16))
        assert ssim(x, x) == 1.0

    def test_anticorrelation_goes_negative(self):
        # checkerboard: local means vanish, so the structure term dominates
        i, j = np.meshgrid(np.arange(16), np.arange(16), indexing="ij")
        ref = ((-1.0) ** (i + j)).astype(np.float64)
        assert ssim(-ref, ref) < 0.0

    def test_matches_windowed_oracle(self, rng):
        x, ref = rng.random((16, 16)), rng.random((16, 16))
        assert abs(ssim(x, ref) - ssim_oracle(x, ref)) < 1e-8

    def test_bounded(self, rng):
        for _ in range(5):
            x, ref = rng.random((12, 12)), rng.random((12, 12))
            assert -1.0 <= ssim(x, ref) <= 1.0

    def test_image_smaller_than_window_rejected(self):
        with pytest.raises(DimensionError):
            ssim(np.zeros((10, 10)), np.zeros((10, 10)))
