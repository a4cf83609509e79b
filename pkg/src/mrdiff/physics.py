"""Complex-image k-space physics.

Centered, orthonormal 2-D Fourier transforms, multi-coil encoding with
sensitivity maps, variable-density Gaussian mask generation, the
zero-filled adjoint reconstruction, and the k-space data-consistency
projection. Images and k-space live in plain complex128 arrays; coil
stacks carry a leading coil axis.
"""

import numpy as np

from .errors import ConfigError, DimensionError

CALIB_SIZE = 4


def fft2c(x):
    """Centered orthonormal 2-D DFT over the trailing two axes."""
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(x, axes=(-2, -1)), norm="ortho"), axes=(-2, -1))


def ifft2c(y):
    """Inverse of :func:`fft2c`; exact roundtrip up to float rounding."""
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(y, axes=(-2, -1)), norm="ortho"), axes=(-2, -1))


def _radius_sq(h, w):
    iy = np.arange(h) - h // 2
    ix = np.arange(w) - w // 2
    return iy[:, None] ** 2.0 + ix[None, :] ** 2.0


def _calib_region(h, w):
    r0, c0 = h // 2 - CALIB_SIZE // 2, w // 2 - CALIB_SIZE // 2
    return slice(r0, r0 + CALIB_SIZE), slice(c0, c0 + CALIB_SIZE)


def gen_gaussian_mask(h, w, accel, seed):
    """Variable-density binary mask with exactly ``round(h*w/accel)`` samples.

    The sampling density is a centered 2-D Gaussian whose variance is found
    by bisection so that the density integrates to the target count; the
    mask itself is a weighted draw without replacement (top-k exponential
    keys), which pins the sample count exactly. A central 4x4 calibration
    block is always fully sampled. Deterministic for a given seed.
    """
    if accel < 1:
        raise ConfigError(f"acceleration must be >= 1, got {accel}")
    target = int(round(h * w / accel))
    if target >= h * w:
        return np.ones((h, w), dtype=np.uint8)
    if target < CALIB_SIZE * CALIB_SIZE:
        raise ConfigError(f"acceleration {accel} keeps {target} samples; calibration block needs {CALIB_SIZE**2}")

    r2 = _radius_sq(h, w)

    def density_sum(sigma):
        return np.exp(-r2 / (2.0 * sigma * sigma)).sum()

    lo, hi = 1e-2, float(max(h, w))
    while density_sum(hi) < target:
        hi *= 2.0
        if hi > 1e9:
            break
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if density_sum(mid) < target:
            lo = mid
        else:
            hi = mid
    weights = np.exp(-r2 / (2.0 * hi * hi))

    rng = np.random.default_rng(seed)
    # Efraimidis-Spirakis keys: top-k of log(u)/w is a weighted draw
    # without replacement, so the count is exact by construction.
    keys = np.log(rng.random((h, w))) / np.maximum(weights, 1e-300)

    mask = np.zeros((h, w), dtype=np.uint8)
    rows, cols = _calib_region(h, w)
    mask[rows, cols] = 1
    keys[rows, cols] = -np.inf  # forced on already, exclude from the draw
    remaining = target - CALIB_SIZE * CALIB_SIZE
    if remaining > 0:
        flat = keys.reshape(-1)
        take = np.argpartition(-flat, remaining - 1)[:remaining]
        mask.reshape(-1)[take] = 1
    return mask


def encode(image, coils, mask):
    """Partial Fourier encoding: per-coil k-space of the weighted image.

    Returns the coil stack ``mask * fft2c(coils * image)``.
    """
    if coils.shape[-2:] != image.shape or mask.shape != image.shape:
        raise DimensionError(f"shape mismatch: image {image.shape}, coils {coils.shape}, mask {mask.shape}")
    return mask * fft2c(coils * image[None])


def zero_filled(y, coils, mask=None):
    """Adjoint of :func:`encode`: conjugate-coil combination of ifft2c(y)."""
    return (np.conj(coils) * ifft2c(y)).sum(axis=0)


def data_consistency(x, x_ref, coils, mask):
    """Replace k-space of ``coils*x`` by k-space of ``coils*x_ref`` where sampled.

    Off-mask coefficients are kept; coils are recombined with the conjugate
    sum, which makes this an exact projection in the single-coil case.
    """
    if x.shape != x_ref.shape or coils.shape[-2:] != x.shape or mask.shape != x.shape:
        raise DimensionError(f"shape mismatch: x {x.shape}, x_ref {x_ref.shape}, coils {coils.shape}, mask {mask.shape}")
    k = fft2c(coils * x[None]) * (1 - mask) + fft2c(coils * x_ref[None]) * mask
    return (np.conj(coils) * ifft2c(k)).sum(axis=0)
