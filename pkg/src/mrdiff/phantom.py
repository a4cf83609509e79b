"""Synthetic data: Shepp-Logan phantoms and smooth coil sensitivity maps."""

from itertools import combinations

import numpy as np

from .errors import ConfigError

# (value, a, b, x0, y0, phi_deg) -- modified Shepp-Logan ellipse table.
# The first two ellipses (head and brain) stay fixed; contrast variants
# permute the intensities of the eight interior ellipses.
_ELLIPSES = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.605, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
]

_INNER = len(_ELLIPSES) - 2
_DARK_SLOTS = list(combinations(range(_INNER), 2))  # 28 distinct contrasts

N_VARIANTS = len(_DARK_SLOTS)


def variant_intensities(variant):
    """Interior-ellipse intensities for a contrast variant (two -0.2 slots)."""
    dark = _DARK_SLOTS[variant % N_VARIANTS]
    return [(-0.2 if i in dark else 0.1) for i in range(_INNER)]


def variant_ellipses(variant):
    """Full ellipse table for a variant; variant 0 is the classic phantom."""
    inner = variant_intensities(variant)
    table = list(_ELLIPSES[:2])
    for (_, a, b, x0, y0, phi), val in zip(_ELLIPSES[2:], inner):
        table.append((val, a, b, x0, y0, phi))
    return table


def shepp_logan(h, w, variant=0):
    """Additive Shepp-Logan phantom in [0, 1] as a complex image (zero imag).

    ``variant`` permutes interior ellipse intensities to mimic contrast
    differences; all variants share the same support.
    """
    if h < 16 or w < 16:
        raise ConfigError(f"phantom needs extents >= 16, got {h}x{w}")
    y = np.linspace(1.0, -1.0, h)[:, None]
    x = np.linspace(-1.0, 1.0, w)[None, :]
    img = np.zeros((h, w))
    for val, a, b, x0, y0, phi in variant_ellipses(variant):
        th = np.deg2rad(phi)
        xr = (x - x0) * np.cos(th) + (y - y0) * np.sin(th)
        yr = -(x - x0) * np.sin(th) + (y - y0) * np.cos(th)
        img[(xr / a) ** 2 + (yr / b) ** 2 <= 1.0] += val
    peak = img.max()
    if peak > 0:
        img /= peak
    np.clip(img, 0.0, 1.0, out=img)  # overlap sums cancel to ~-1e-17, not below
    return img.astype(np.complex128)


def synth_coils(h, w, n_coils, seed=0):
    """Smooth complex coil sensitivities normalized to unit RSS per pixel.

    Gaussian magnitude bumps centered at evenly spaced border positions
    with gentle seeded phase ramps; ``n_coils == 1`` yields an exact
    all-ones map.
    """
    if n_coils < 1:
        raise ConfigError(f"need at least one coil, got {n_coils}")
    if n_coils == 1:
        return np.ones((1, h, w), dtype=np.complex128)
    rng = np.random.default_rng(seed)
    yy = np.arange(h)[:, None]
    xx = np.arange(w)[None, :]
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    radius = 0.5 * min(h, w)
    width = 0.6 * min(h, w)
    maps = np.empty((n_coils, h, w), dtype=np.complex128)
    for c in range(n_coils):
        ang = 2.0 * np.pi * c / n_coils
        by, bx = cy + radius * np.sin(ang), cx + radius * np.cos(ang)
        mag = np.exp(-((yy - by) ** 2 + (xx - bx) ** 2) / (2.0 * width**2))
        # quarter-cycle phase ramp at most across the image keeps maps smooth
        fy, fx, f0 = rng.uniform(-0.25, 0.25, size=3)
        phase = 2.0 * np.pi * (fy * yy / h + fx * xx / w + f0)
        maps[c] = mag * np.exp(1j * phase)
    rss = np.sqrt((np.abs(maps) ** 2).sum(axis=0))
    return maps / rss
