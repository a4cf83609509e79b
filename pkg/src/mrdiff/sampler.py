"""Conditional few-step reconstruction.

Sampling starts from the zero-filled image rather than pure noise and
walks a descending timestep list; every denoiser pass conditions its DC
layers on lightly noised measured k-space, and reverse-process noise
sigma_t * z is added after every pass except the last.
"""

import time
from dataclasses import dataclass

import numpy as np

from .errors import CheckpointError
from .network import channels_to_complex, complex_to_channels, denoiser_forward
from .physics import fft2c, zero_filled
from .schedule import complex_noise, forward_noise, select_timesteps
from .tensor import no_grad

LOWNOISE_VAR = 0.1


@dataclass
class ReconResult:
    image: np.ndarray  # final complex reconstruction
    dc_reference: np.ndarray  # image whose k-space the final DC imposed
    timesteps: list
    seconds: float


def reconstruct(y, mask, coils, label, params, sched, S=5, seed=0):
    """Reconstruct one slice from undersampled k-space; deterministic per seed."""
    if params.config.contrasts != label.n_contrasts:
        raise CheckpointError(
            f"checkpoint expects {params.config.contrasts} contrasts, label has {label.n_contrasts}"
        )
    rng = np.random.default_rng(seed)
    t0 = time.perf_counter()
    x_u = zero_filled(y, coils)
    x = complex_to_channels(x_u)
    steps = select_timesteps(sched.T, S)
    x_ref = x_u
    with no_grad():
        for i, ts in enumerate(steps):
            eps_low = complex_noise(rng, x_u.shape, var=LOWNOISE_VAR)
            x_ref = forward_noise(x_u, ts, eps_low, sched)
            y_cond = fft2c(coils * x_ref[None])
            out = denoiser_forward(x, y_cond, mask, coils, ts, label, params)
            x = out.data
            if i + 1 < len(steps):
                z = complex_noise(rng, x_u.shape)
                x = x + sched.sig(ts) * complex_to_channels(z)
    return ReconResult(
        image=channels_to_complex(x),
        dc_reference=x_ref,
        timesteps=steps,
        seconds=time.perf_counter() - t0,
    )
