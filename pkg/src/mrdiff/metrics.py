"""PSNR and SSIM between magnitude images."""

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(x, ref):
    """Peak signal-to-noise ratio in dB with peak = max(ref).

    Returns ``inf`` when the images coincide exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {ref.shape}")
    mse = np.mean((x - ref) ** 2)
    if mse == 0.0:
        return math.inf
    peak = ref.max()
    return 10.0 * math.log10(peak * peak / mse)


def _gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def _local_means(img, win):
    k = win.shape[0]
    wins = sliding_window_view(img, (k, k))
    return np.einsum("ijab,ab->ij", wins, win)


def ssim(x, ref):
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5).

    Uses K1=0.01, K2=0.03 and dynamic range max(ref); symmetric in its
    arguments when the dynamic ranges coincide.
    """
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise DimensionError(f"shape mismatch: {x.shape} vs {ref.shape}")
    if min(x.shape) < SSIM_WINDOW:
        raise DimensionError(f"image {x.shape} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window")
    win = _gaussian_window()
    mu_x = _local_means(x, win)
    mu_y = _local_means(ref, win)
    var_x = _local_means(x * x, win) - mu_x * mu_x
    var_y = _local_means(ref * ref, win) - mu_y * mu_y
    cov = _local_means(x * ref, win) - mu_x * mu_y
    L = ref.max()
    c1 = (SSIM_K1 * L) ** 2
    c2 = (SSIM_K2 * L) ** 2
    num = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))
