"""Self-supervised training: mask splitting, masked k-space L1, train loop.

Each step withholds a random 5% of the acquired k-space points (M_r) as
the loss target and conditions the network on the remainder (M_p); the
split, the timestep, and the noise draw are all derived from
``(seed, step)`` so training is bit-reproducible and resumable.
"""

import os
from dataclasses import dataclass

import numpy as np

from . import tensor as tc
from .errors import CheckpointError, ConfigError, ContractError
from .network import Label, channels_to_complex, complex_to_channels, denoiser_forward, init_denoiser
from .physics import fft2c, ifft2c, zero_filled
from .schedule import build_schedule, complex_noise, forward_noise
from .storage import save_checkpoint
from .tensor import AdamState, Tensor, adam_step, backward, zero_grads


@dataclass
class TrainConfig:
    steps: int = 2000
    lr: float = 0.002
    betas: tuple = (0.9, 0.999)
    rho: float = 0.05  # withheld fraction of acquired points
    T: int = 1000
    channels: int = 32
    blocks: int = 4
    tokens: int = 16
    seed: int = 0
    ckpt_every: int = 0  # 0 disables periodic checkpoints

    def __post_init__(self):
        if not 0.0 < self.rho < 1.0:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")


@dataclass
class SliceData:
    """One acquisition: measured k-space, mask, coils, label, optional truth."""

    y: np.ndarray  # (n_coils, h, w) complex, zero off-support
    mask: np.ndarray  # (h, w) 0/1
    coils: np.ndarray  # (n_coils, h, w) complex
    label: Label
    truth: np.ndarray = None


@dataclass
class TrainSample:
    """Per-step instance with the loss/conditioning mask split applied."""

    x_u: np.ndarray  # zero-filled from the full mask M
    y_p: np.ndarray  # k-space restricted to M_p
    mask: np.ndarray  # M
    m_r: np.ndarray  # withheld loss positions
    m_p: np.ndarray  # conditioning positions
    coils: np.ndarray
    label: Label
    x_up: np.ndarray  # zero-filled from y_p


def split_mask(mask, rho=0.05, seed=0):
    """Split M into disjoint (M_r, M_p), |M_r| = round(rho * |M|) exactly."""
    on = np.flatnonzero(mask)
    if on.size < 20:
        raise ContractError(f"mask has {on.size} acquired points, need >= 20")
    k = int(round(rho * on.size))
    if k < 1 or k >= on.size:
        raise ContractError(f"rho={rho} keeps {k} of {on.size} points; need 1 <= k < |M|")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(on, size=k, replace=False)
    m_r = np.zeros_like(mask)
    m_r.reshape(-1)[chosen] = 1
    m_p = (mask - m_r).astype(mask.dtype)
    return m_r, m_p


def make_train_sample(sl, rho, seed):
    m_r, m_p = split_mask(sl.mask, rho, seed)
    y_p = sl.y * m_p
    return TrainSample(
        x_u=zero_filled(sl.y, sl.coils),
        y_p=y_p,
        mask=sl.mask,
        m_r=m_r,
        m_p=m_p,
        coils=sl.coils,
        label=sl.label,
        x_up=zero_filled(y_p, sl.coils),
    )


def ss_loss(x_hat, x_u, coils, m_r):
    """Masked k-space L1 between the prediction and the zero-filled target.

    L1 is taken over real and imaginary parts of the withheld coefficients,
    summed over coils, normalized by ``|M_r| * n_coils``. ``x_hat`` may be a
    2-channel Tensor (gradients flow) or a complex array.
    """
    if not isinstance(x_hat, Tensor):
        x_hat = Tensor(complex_to_channels(np.asarray(x_hat, dtype=np.complex128)))
    n_coils = coils.shape[0]
    count = int(m_r.sum())
    scale = 1.0 / (max(count, 1) * n_coils)
    target = fft2c(coils * np.asarray(x_u)[None]) * m_r

    resid = fft2c(coils * channels_to_complex(x_hat.data)[None]) * m_r - target
    value = np.array(scale * (np.abs(resid.real) + np.abs(resid.imag)).sum())

    def grad(g):
        s = (np.sign(resid.real) + 1j * np.sign(resid.imag)) * m_r
        gimg = (np.conj(coils) * ifft2c(s)).sum(axis=0)
        return float(g) * scale * complex_to_channels(gimg)

    return tc.from_linear_op(value, [x_hat], [grad])


def train_step(sample, t, eps, params, state, sched, lr=0.002, betas=(0.9, 0.999)):
    """One self-supervised update; returns the scalar loss."""
    x_t = forward_noise(sample.x_up, t, eps, sched)
    y_cond = fft2c(sample.coils * sample.x_up[None])
    named = params.as_dict()
    zero_grads(named.values())
    x_hat = denoiser_forward(Tensor(complex_to_channels(x_t)), y_cond, sample.m_p, sample.coils, t, sample.label, params)
    loss = ss_loss(x_hat, sample.x_u, sample.coils, sample.m_r)
    loss_val = loss.item()
    if not np.isfinite(loss_val):
        raise ContractError(f"non-finite loss {loss_val}")
    backward(loss, named.values())
    grads = {name: p.grad for name, p in named.items()}
    adam_step(named, grads, state, lr=lr, betas=betas)
    return loss_val


def _step_rng(seed, step):
    return np.random.default_rng([seed, step])


def checkpoint_payload(params, state):
    tensors = {name: p.data for name, p in params.named()}
    tensors.update({f"adam.m.{k}": v for k, v in state.m.items()})
    tensors.update({f"adam.v.{k}": v for k, v in state.v.items()})
    return tensors


def config_payload(cfg, n_contrasts):
    return {
        "channels": cfg.channels,
        "blocks": cfg.blocks,
        "tokens": cfg.tokens,
        "contrasts": n_contrasts,
        "T": cfg.T,
        "lr": cfg.lr,
        "rho": cfg.rho,
        "seed": cfg.seed,
    }


def train_loop(dataset, cfg, params=None, state=None, start_step=0, ckpt_dir=None, trace_path=None):
    """Run ``cfg.steps`` training steps over the dataset (round-robin).

    Per-step randomness comes from ``(cfg.seed, step)``, so resuming from a
    checkpoint at any step reproduces the continuation exactly. Returns
    ``(params, state, trace)`` where trace lists per-step losses.
    """
    if not dataset:
        raise ConfigError("training dataset is empty")
    from .network import NetConfig

    n_contrasts = dataset[0].label.n_contrasts
    if params is None:
        params = init_denoiser(
            NetConfig(channels=cfg.channels, blocks=cfg.blocks, tokens=cfg.tokens, contrasts=n_contrasts),
            seed=cfg.seed,
        )
    if state is None:
        state = AdamState.for_params(params.as_dict())
    sched = build_schedule(cfg.T)

    trace = []
    trace_fh = None
    if trace_path is not None:
        try:
            trace_fh = open(trace_path, "a" if start_step else "w")
        except OSError as exc:
            raise ConfigError(f"cannot open loss trace {trace_path}: {exc}") from exc
    try:
        for step in range(start_step, cfg.steps):
            rng = _step_rng(cfg.seed, step)
            sl = dataset[step % len(dataset)]
            sample = make_train_sample(sl, cfg.rho, int(rng.integers(2**63)))
            t = int(rng.integers(1, cfg.T + 1))
            eps = complex_noise(rng, sample.x_up.shape)
            try:
                loss = train_step(sample, t, eps, params, state, sched, lr=cfg.lr, betas=cfg.betas)
            except ContractError as exc:
                raise ContractError(f"step {step}: {exc}") from exc
            trace.append(loss)
            if trace_fh is not None:
                trace_fh.write(f"{step}\t{loss!r}\n")
            if ckpt_dir is not None and cfg.ckpt_every and (step + 1) % cfg.ckpt_every == 0:
                _write_ckpt(ckpt_dir, params, state, cfg, n_contrasts, step + 1)
        if ckpt_dir is not None:
            _write_ckpt(ckpt_dir, params, state, cfg, n_contrasts, cfg.steps, final=True)
    finally:
        if trace_fh is not None:
            trace_fh.close()
    return params, state, trace


def _write_ckpt(ckpt_dir, params, state, cfg, n_contrasts, step, final=False):
    name = "ckpt_final.ckpt" if final else f"ckpt_step{step:06d}.ckpt"
    path = os.path.join(ckpt_dir, name)
    save_checkpoint(path, checkpoint_payload(params, state), config_payload(cfg, n_contrasts), step)
    return path


def restore_checkpoint(path, expect_config=None):
    """Rebuild parameters and optimizer state from a checkpoint file.

    ``expect_config`` (a NetConfig) lets callers demand a specific
    architecture; mismatching tensors are reported by name. Returns
    ``(params, state, config_dict, step)``.
    """
    from .network import NetConfig
    from .storage import load_checkpoint

    tensors, config, step = load_checkpoint(path)
    try:
        net_cfg = NetConfig(
            channels=int(config["channels"]),
            blocks=int(config["blocks"]),
            tokens=int(config["tokens"]),
            contrasts=int(config["contrasts"]),
        )
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing config key {exc}") from exc
    if expect_config is not None:
        net_cfg = expect_config

    params = init_denoiser(net_cfg, seed=0)
    named = dict(params.named())
    missing = [n for n in named if n not in tensors]
    for n, p in named.items():
        if n in tensors and tensors[n].shape != p.data.shape:
            missing.append(f"{n} (shape {tensors[n].shape} != {p.data.shape})")
    if missing:
        raise CheckpointError(f"{path}: checkpoint does not match config: {sorted(missing)}")
    for n, p in named.items():
        p.data[...] = tensors[n]

    state = AdamState.for_params(named)
    for n in named:
        mk, vk = f"adam.m.{n}", f"adam.v.{n}"
        if mk in tensors:
            state.m[n][...] = tensors[mk]
        if vk in tensors:
            state.v[n][...] = tensors[vk]
    state.step = step
    return params, state, config, step
