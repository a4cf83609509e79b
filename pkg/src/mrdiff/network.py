"""Unrolled denoising network: mapper plus cross-attention/DC blocks.

The mapper turns (timestep, acquisition label) into a global latent w_g
and L local latent tokens w_l. Each denoising block runs two transformer
layers (modulated convolution, cross-attention against w_l, attention-
scaled instance norm) and ends with a k-space data-consistency projection;
blocks other than the last expand the 2-channel DC output back to n
feature channels. The final block's DC output *is* the network output, so
every prediction is hard-consistent with the conditioning k-space at
sampled positions.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import tensor as tc
from .errors import ConfigError, DimensionError
from .physics import fft2c, ifft2c
from .tensor import Tensor

MAPPER_DEPTH = 12
MAPPER_WIDTH = 32
LATENT_DIM = 32
TIME_EMB_DIM = 32
NORM_EPS = 1e-8
DEMOD_EPS = 1e-8
LRELU_SLOPE = 0.2


@dataclass(frozen=True)
class NetConfig:
    channels: int = 32  # feature channels n
    blocks: int = 4  # unrolled blocks J
    tokens: int = 16  # local latent tokens L
    contrasts: int = 1  # one-hot label length

    def __post_init__(self):
        if self.channels < 2 or self.channels % 2:
            raise ConfigError(f"channels must be even and >= 2, got {self.channels}")
        if self.blocks < 1 or self.tokens < 1 or self.contrasts < 1:
            raise ConfigError(f"blocks/tokens/contrasts must be >= 1, got {self}")


@dataclass(frozen=True)
class Label:
    """Acquisition conditioning: acceleration rate and contrast one-hot."""

    accel: float
    contrast: int
    n_contrasts: int

    def vector(self):
        if not 0 <= self.contrast < self.n_contrasts:
            raise ConfigError(f"contrast {self.contrast} outside [0, {self.n_contrasts})")
        v = np.zeros(1 + self.n_contrasts)
        v[0] = self.accel / 8.0
        v[1 + self.contrast] = 1.0
        return v


@dataclass
class Dense:
    w: Tensor  # (out, in)
    b: Tensor = None  # (out,); None for bias-free layers

    def __call__(self, x):
        out = tc.matmul(x, tc.transpose(self.w))
        return out if self.b is None else out + self.b


@dataclass
class MapperParams:
    layers: list  # MAPPER_DEPTH Dense layers
    head_g: Dense
    head_l: Dense


@dataclass
class AttnLayer:
    affine: Dense  # w_g -> per-input-channel scales
    kernels: Tensor  # (n, n, 3, 3)
    query: Dense
    key: Dense
    value: Dense
    scale: Dense  # attention -> per-channel norm scale


@dataclass
class BlockParams:
    layers: list  # two AttnLayer instances
    pe_lat: Tensor  # (L, 32), learned
    reduce_k: Tensor  # (2, n, 3, 3)
    reduce_b: Tensor
    expand_k: Tensor = None  # (n, 2, 3, 3); absent on the last block
    expand_b: Tensor = None


@dataclass
class DenoiserParams:
    config: NetConfig
    mapper: MapperParams
    blocks: list
    lift_k: Tensor  # (n, 2, 3, 3)
    lift_b: Tensor

    def named(self):
        """Ordered (name, Tensor) pairs over every trainable tensor."""
        out = []
        for i, lyr in enumerate(self.mapper.layers):
            out += [(f"mapper.fc{i}.w", lyr.w), (f"mapper.fc{i}.b", lyr.b)]
        out += [("mapper.head_g.w", self.mapper.head_g.w), ("mapper.head_g.b", self.mapper.head_g.b)]
        out += [("mapper.head_l.w", self.mapper.head_l.w), ("mapper.head_l.b", self.mapper.head_l.b)]
        out += [("lift.k", self.lift_k), ("lift.b", self.lift_b)]
        for j, blk in enumerate(self.blocks):
            for r, lyr in enumerate(blk.layers):
                pre = f"block{j}.layer{r}"
                out += [
                    (f"{pre}.affine.w", lyr.affine.w),
                    (f"{pre}.affine.b", lyr.affine.b),
                    (f"{pre}.kernels", lyr.kernels),
                    (f"{pre}.query.w", lyr.query.w),
                    (f"{pre}.query.b", lyr.query.b),
                    (f"{pre}.key.w", lyr.key.w),
                    (f"{pre}.value.w", lyr.value.w),
                    (f"{pre}.value.b", lyr.value.b),
                    (f"{pre}.scale.w", lyr.scale.w),
                    (f"{pre}.scale.b", lyr.scale.b),
                ]
            out += [(f"block{j}.pe_lat", blk.pe_lat)]
            out += [(f"block{j}.reduce.k", blk.reduce_k), (f"block{j}.reduce.b", blk.reduce_b)]
            if blk.expand_k is not None:
                out += [(f"block{j}.expand.k", blk.expand_k), (f"block{j}.expand.b", blk.expand_b)]
        return out

    def as_dict(self):
        return dict(self.named())


def parameter_count(cfg):
    """Closed-form trainable parameter count; guards against wiring drift."""
    n, j, l, c = cfg.channels, cfg.blocks, cfg.tokens, cfg.contrasts
    in_dim = TIME_EMB_DIM + 1 + c
    mapper = (MAPPER_WIDTH * in_dim + MAPPER_WIDTH) + (MAPPER_DEPTH - 1) * (MAPPER_WIDTH**2 + MAPPER_WIDTH)
    mapper += LATENT_DIM * MAPPER_WIDTH + LATENT_DIM  # w_g head
    mapper += l * LATENT_DIM * MAPPER_WIDTH + l * LATENT_DIM  # w_l head
    lift = n * 2 * 9 + n
    attn_layer = (
        (n * LATENT_DIM + n)  # modulation affine
        + n * n * 9  # conv kernels
        + (n * n + n)  # query
        + n * LATENT_DIM  # key (bias-free: a key bias cannot move the softmax)
        + (n * LATENT_DIM + n)  # value
        + (n * n + n)  # attention scale
    )
    block = 2 * attn_layer + l * LATENT_DIM + (2 * n * 9 + 2)
    expand = n * 2 * 9 + n
    return mapper + lift + j * block + (j - 1) * expand


def _dense(rng, out_dim, in_dim, bias_fill=0.0, bias=True):
    w = Tensor(rng.standard_normal((out_dim, in_dim)) / np.sqrt(in_dim), requires_grad=True)
    if not bias:
        return Dense(w)
    b = Tensor(np.full(out_dim, bias_fill), requires_grad=True)
    return Dense(w, b)


def _conv(rng, out_ch, in_ch):
    k = Tensor(rng.standard_normal((out_ch, in_ch, 3, 3)) / np.sqrt(in_ch * 9), requires_grad=True)
    b = Tensor(np.zeros(out_ch), requires_grad=True)
    return k, b


def init_denoiser(cfg, seed=0):
    """Fresh parameters, deterministic per seed."""
    rng = np.random.default_rng(seed)
    n, in_dim = cfg.channels, TIME_EMB_DIM + 1 + cfg.contrasts
    layers = [_dense(rng, MAPPER_WIDTH, in_dim)]
    layers += [_dense(rng, MAPPER_WIDTH, MAPPER_WIDTH) for _ in range(MAPPER_DEPTH - 1)]
    mapper = MapperParams(
        layers=layers,
        head_g=_dense(rng, LATENT_DIM, MAPPER_WIDTH),
        head_l=_dense(rng, cfg.tokens * LATENT_DIM, MAPPER_WIDTH),
    )
    lift_k, lift_b = _conv(rng, n, 2)
    blocks = []
    for j in range(cfg.blocks):
        attn = []
        for _ in range(2):
            kern = Tensor(rng.standard_normal((n, n, 3, 3)) / np.sqrt(n * 9), requires_grad=True)
            attn.append(
                AttnLayer(
                    affine=_dense(rng, n, LATENT_DIM, bias_fill=1.0),
                    kernels=kern,
                    query=_dense(rng, n, n),
                    key=_dense(rng, n, LATENT_DIM, bias=False),
                    value=_dense(rng, n, LATENT_DIM),
                    scale=_dense(rng, n, n),
                )
            )
        pe_lat = Tensor(0.1 * rng.standard_normal((cfg.tokens, LATENT_DIM)), requires_grad=True)
        reduce_k, reduce_b = _conv(rng, 2, n)
        if j < cfg.blocks - 1:
            expand_k, expand_b = _conv(rng, n, 2)
        else:
            expand_k = expand_b = None
        blocks.append(
            BlockParams(
                layers=attn,
                pe_lat=pe_lat,
                reduce_k=reduce_k,
                reduce_b=reduce_b,
                expand_k=expand_k,
                expand_b=expand_b,
            )
        )
    return DenoiserParams(config=cfg, mapper=mapper, blocks=blocks, lift_k=lift_k, lift_b=lift_b)


# -- embeddings -----------------------------------------------------------

def sinusoid(pos, dim):
    """Standard sin/cos embedding of a scalar position."""
    half = (dim + 1) // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    ang = pos * freqs
    emb = np.empty(2 * half)
    emb[0::2] = np.sin(ang)
    emb[1::2] = np.cos(ang)
    return emb[:dim]


def time_embedding(t, dim=TIME_EMB_DIM):
    return sinusoid(float(t), dim)


@lru_cache(maxsize=8)
def image_pe(h, w, n):
    """Fixed 2-D positional encoding: row/col sinusoids concatenated to n dims."""
    dr = n - n // 2
    dc = n // 2
    rows = np.stack([sinusoid(r, dr) for r in range(h)])
    cols = np.stack([sinusoid(c, dc) for c in range(w)])
    pe = np.concatenate(
        [np.repeat(rows, w, axis=0), np.tile(cols, (h, 1))],
        axis=1,
    )
    pe.setflags(write=False)
    return pe


# -- forward pieces --------------------------------------------------------

def mapper_forward(t, label, mapper):
    """Latents from timestep and label: w_g (1, 32) and w_l (L, 32)."""
    vec = np.concatenate([time_embedding(t), label.vector()])
    h = Tensor(vec[None, :])
    for lyr in mapper.layers:
        h = tc.leaky_relu(lyr(h), LRELU_SLOPE)
    w_g = mapper.head_g(h)
    w_l = mapper.head_l(h)
    return w_g, tc.reshape(w_l, (-1, LATENT_DIM))


def modulated_conv(x, w_g, layer, demodulate=True):
    """Convolution with kernels scaled per input channel by affine(w_g).

    With demodulation each output kernel is rescaled to unit L2 norm
    (plus eps), which cancels any uniform modulation scale.
    """
    cin = x.shape[0]
    s = layer.affine(w_g)  # (1, cin)
    scaled = layer.kernels * tc.reshape(s, (1, cin, 1, 1))
    if demodulate:
        norm2 = (scaled * scaled).sum(axis=(1, 2, 3), keepdims=True) + DEMOD_EPS
        scaled = scaled * tc.power(norm2, -0.5)
    return tc.conv2d(x, scaled)


def cross_attention(x_tokens, w_l, layer, pe_img, pe_lat):
    """Eq.-style attention: image tokens query latent tokens for keys/values."""
    n = x_tokens.shape[1]
    q = layer.query(x_tokens + pe_img)
    k = layer.key(w_l + pe_lat)
    v = layer.value(w_l)
    logits = tc.matmul(q, tc.transpose(k)) * (1.0 / np.sqrt(n))
    return tc.matmul(tc.softmax_rows(logits), v)


def attn_instance_norm(x, att, layer):
    """Zero-mean unit-variance per channel, rescaled by a projection of att."""
    n, h, w = x.shape
    mu = x.mean(axis=(1, 2), keepdims=True)
    centered = x - mu
    var = (centered * centered).mean(axis=(1, 2), keepdims=True)
    normed = centered / tc.sqrt(var + NORM_EPS)
    gain = layer.scale(att)  # (h*w, n)
    gain = tc.reshape(tc.transpose(gain), (n, h, w))
    return gain * normed


def channels_to_complex(z):
    return z[0] + 1j * z[1]


def complex_to_channels(x):
    return np.stack([x.real, x.imag])


def dc_project(z, y_cond, mask, coils):
    """Data consistency on a 2-channel tensor against conditioning k-space.

    Sampled coefficients of fft2c(coils * x) are replaced by ``y_cond``;
    the operator is linear and self-adjoint, so the backward pass reapplies
    the kept-coefficient part to the cotangent.
    """
    if z.shape[0] != 2:
        raise DimensionError(f"DC expects a 2-channel tensor, got {z.shape}")
    keep = 1 - mask

    def apply_keep(arr2ch):
        xc = arr2ch[0] + 1j * arr2ch[1]
        k = fft2c(coils * xc[None]) * keep
        out = (np.conj(coils) * ifft2c(k)).sum(axis=0)
        return complex_to_channels(out)

    measured = (np.conj(coils) * ifft2c(y_cond * mask)).sum(axis=0)
    value = apply_keep(z.data) + complex_to_channels(measured)
    return tc.from_linear_op(value, [z], [apply_keep])


def denoising_block(x, w_g, w_l, y_cond, mask, coils, block):
    """Two transformer layers, channel reduction, DC, optional re-expansion.

    Returns n channels when the block has an expansion convolution and the
    raw 2-channel DC output otherwise (the network head).
    """
    n, h, w = x.shape
    pe_img = image_pe(h, w, n)
    for layer in block.layers:
        x = tc.leaky_relu(modulated_conv(x, w_g, layer), LRELU_SLOPE)
        tokens = tc.transpose(tc.reshape(x, (n, h * w)))
        att = cross_attention(tokens, w_l, layer, Tensor(pe_img), block.pe_lat)
        x = attn_instance_norm(x, att, layer)
    z = tc.conv2d(x, block.reduce_k) + tc.reshape(block.reduce_b, (2, 1, 1))
    z = dc_project(z, y_cond, mask, coils)
    if block.expand_k is None:
        return z
    z = tc.conv2d(z, block.expand_k) + tc.reshape(block.expand_b, (n, 1, 1))
    return tc.leaky_relu(z, LRELU_SLOPE)


def denoiser_forward(x_t, y_cond, mask, coils, t, label, params):
    """Full unrolled forward pass; returns the 2-channel clean-image estimate.

    ``x_t`` is the noised 2-channel input, ``y_cond`` the per-coil
    conditioning k-space used by every DC layer.
    """
    x = x_t if isinstance(x_t, Tensor) else Tensor(x_t)
    if x.shape[0] != 2:
        raise DimensionError(f"expected 2-channel input, got {x.shape}")
    w_g, w_l = mapper_forward(t, label, params.mapper)
    h = tc.leaky_relu(tc.conv2d(x, params.lift_k) + tc.reshape(params.lift_b, (-1, 1, 1)), LRELU_SLOPE)
    for block in params.blocks:
        h = denoising_block(h, w_g, w_l, y_cond, mask, coils, block)
    return h
