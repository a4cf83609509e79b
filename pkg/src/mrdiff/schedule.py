"""Noise schedule tables and the forward / low-noise conditioning maps."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .physics import fft2c


@dataclass(frozen=True)
class NoiseSchedule:
    """Per-step beta/alpha/alpha_bar/sigma tables (arrays indexed by t-1)."""

    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    sigma: np.ndarray

    def a_bar(self, t):
        return self.alpha_bar[t - 1]

    def sig(self, t):
        return self.sigma[t - 1]


def build_schedule(T=1000, beta_start=1e-4, beta_end=0.02):
    """Linear beta schedule, endpoints inclusive, with derived tables.

    ``sigma[t]^2 = beta[t] * (1 - alpha_bar[t-1]) / (1 - alpha_bar[t])``
    with ``alpha_bar[0] := 1``, so ``sigma[1] == 0`` exactly.
    """
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_start < beta_end < 1.0:
        raise ConfigError(f"need 0 < beta_start < beta_end < 1, got ({beta_start}, {beta_end})")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    prev = np.concatenate(([1.0], alpha_bar[:-1]))
    sigma = np.sqrt((1.0 - prev) / (1.0 - alpha_bar) * beta)
    return NoiseSchedule(T=T, beta=beta, alpha=alpha, alpha_bar=alpha_bar, sigma=sigma)


def complex_noise(rng, shape, var=1.0):
    """Complex Gaussian draw; real and imaginary parts each have variance ``var``."""
    s = np.sqrt(var)
    return s * rng.standard_normal(shape) + 1j * s * rng.standard_normal(shape)


def forward_noise(x, t, eps, sched):
    """Forward noising: ``sqrt(a_bar_t) * x + sqrt(1 - a_bar_t) * eps``."""
    if not 1 <= t <= sched.T:
        raise ContractError(f"timestep {t} outside [1, {sched.T}]")
    ab = sched.a_bar(t)
    return np.sqrt(ab) * x + np.sqrt(1.0 - ab) * eps


def lownoise_kspace(x_u, ts, eps_low, sched, coils):
    """Per-coil k-space of the lightly noised zero-filled image.

    ``eps_low`` is expected to be drawn with variance 0.1 per component;
    the Fourier transform is applied after coil weighting, mirroring the
    encoding operator.
    """
    noised = forward_noise(x_u, ts, eps_low, sched)
    return fft2c(coils * noised[None])


def select_timesteps(T=1000, S=5):
    """Evenly spaced descending timesteps from T down to 1, S of them."""
    if not 1 <= S <= T:
        raise ConfigError(f"need 1 <= S <= T, got S={S}, T={T}")
    ts = np.rint(np.linspace(T, 1, S)).astype(int)
    return [int(t) for t in ts]
