"""Self-supervised unrolled diffusion reconstruction for undersampled MRI."""

from .kernels import BACKEND
from .metrics import psnr, ssim
from .network import (
    Label,
    NetConfig,
    attn_instance_norm,
    cross_attention,
    denoiser_forward,
    denoising_block,
    init_denoiser,
    mapper_forward,
    modulated_conv,
    parameter_count,
)
from .phantom import shepp_logan, synth_coils
from .physics import data_consistency, encode, fft2c, gen_gaussian_mask, ifft2c, zero_filled
from .sampler import ReconResult, reconstruct
from .schedule import NoiseSchedule, build_schedule, complex_noise, forward_noise, lownoise_kspace, select_timesteps
from .selfsup import SliceData, TrainConfig, TrainSample, restore_checkpoint, split_mask, ss_loss, train_loop, train_step
from .storage import load_array, load_checkpoint, save_array, save_checkpoint
from .tensor import AdamState, Tensor, adam_step, backward, conv2d, finite_diff_check, matmul, no_grad, softmax_rows

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "BACKEND",
    "Label",
    "NetConfig",
    "NoiseSchedule",
    "ReconResult",
    "SliceData",
    "Tensor",
    "TrainConfig",
    "TrainSample",
    "adam_step",
    "attn_instance_norm",
    "backward",
    "build_schedule",
    "complex_noise",
    "conv2d",
    "cross_attention",
    "data_consistency",
    "denoiser_forward",
    "denoising_block",
    "encode",
    "fft2c",
    "finite_diff_check",
    "forward_noise",
    "gen_gaussian_mask",
    "ifft2c",
    "init_denoiser",
    "load_array",
    "load_checkpoint",
    "lownoise_kspace",
    "mapper_forward",
    "matmul",
    "modulated_conv",
    "no_grad",
    "parameter_count",
    "psnr",
    "reconstruct",
    "restore_checkpoint",
    "save_array",
    "save_checkpoint",
    "select_timesteps",
    "shepp_logan",
    "softmax_rows",
    "split_mask",
    "ss_loss",
    "ssim",
    "synth_coils",
    "train_loop",
    "train_step",
    "zero_filled",
]
