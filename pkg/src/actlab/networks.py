"""Function approximators: MLP and small U-Net backbones plus time embeddings.

The generator backbone maps (x, t) to a same-shape tensor; the
discriminator trunk maps (x, t) to one scalar logit per sample. Both come
in a vector (MLP) and an image (small U-Net) flavor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import torch
import torch.nn as nn
import torch.nn.functional as F

DTYPE = torch.float64

__all__ = [
    "DTYPE",
    "TimeEmbedding",
    "BackboneSpec",
    "make_generator",
    "make_discriminator_trunk",
    "silu",
    "leaky_relu",
]


def silu(x):
    return x * torch.sigmoid(x)


def leaky_relu(x, slope: float = 0.2):
    return F.leaky_relu(x, slope)


_ACTIVATIONS = {"silu": silu, "leakyrelu": leaky_relu}


class TimeEmbedding(nn.Module):
    """Sinusoidal embedding of a scalar time value.

    Frequencies are log-spaced with base ``scale``; the embedding is
    smooth in t and injective at grid resolution.
    """

    def __init__(self, dim: int = 64, scale: float = 10000.0):
        super().__init__()
        if dim <= 0 or dim % 2 != 0:
            raise ValueError(f"dim must be a positive even integer, got {dim}")
        if scale <= 0:
            raise ValueError(f"scale must be positive, got {scale}")
        self.dim = dim
        self.scale = scale
        half = dim // 2
        freqs = torch.exp(
            -math.log(scale) * torch.arange(half, dtype=DTYPE) / (half - 1)
        )
        self.register_buffer("freqs", freqs)

    def forward(self, t: torch.Tensor) -> torch.Tensor:
        t = torch.as_tensor(t, dtype=DTYPE).reshape(-1, 1)
        args = t * self.freqs[None, :]
        return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


@dataclass(frozen=True)
class BackboneSpec:
    """Architecture description, serialized into checkpoints.

    ``widths`` are hidden sizes for MLPs and per-level channel counts for
    the U-Net. ``residual_downsampling`` adds an average-pool skip around
    each strided downsampling conv in the discriminator trunk.
    """

    kind: str  # "mlp" | "unet-small"
    widths: tuple
    activation: str = "silu"
    input_shape: tuple = (2,)
    residual_downsampling: bool = False
    time_embed_dim: int = 64
    use_time: bool = True
    cond_channels: int = 0  # extra input channels for conditional discriminators

    def __post_init__(self):
        if self.kind not in ("mlp", "unet-small"):
            raise ValueError(f"unknown backbone kind {self.kind!r}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        object.__setattr__(self, "widths", tuple(int(w) for w in self.widths))
        object.__setattr__(self, "input_shape", tuple(int(s) for s in self.input_shape))


def _init_linear(layer: nn.Linear, zero: bool = False):
    if zero:
        nn.init.zeros_(layer.weight)
        nn.init.zeros_(layer.bias)
    else:
        fan_in = layer.weight.shape[1]
        nn.init.normal_(layer.weight, std=1.0 / math.sqrt(fan_in))
        nn.init.zeros_(layer.bias)


class MLPBackbone(nn.Module):
    """MLP over flat vectors with the time embedding concatenated once."""

    def __init__(self, spec: BackboneSpec, out_dim: int, zero_final: bool):
        super().__init__()
        self.spec = spec
        in_dim = spec.input_shape[0] + spec.cond_channels
        self.act = _ACTIVATIONS[spec.activation]
        self.temb = TimeEmbedding(spec.time_embed_dim) if spec.use_time else None
        first_in = in_dim + (spec.time_embed_dim if spec.use_time else 0)
        dims = [first_in, *spec.widths]
        self.hidden = nn.ModuleList(
            nn.Linear(dims[i], dims[i + 1]) for i in range(len(dims) - 1)
        )
        self.final = nn.Linear(dims[-1], out_dim)
        for layer in self.hidden:
            _init_linear(layer)
        _init_linear(self.final, zero=zero_final)
        self.to(DTYPE)

    def forward(self, x: torch.Tensor, t) -> torch.Tensor:
        if x.shape[1:] != (self.spec.input_shape[0] + self.spec.cond_channels,):
            raise ValueError(
                f"expected trailing shape "
                f"({self.spec.input_shape[0] + self.spec.cond_channels},), "
                f"got {tuple(x.shape[1:])}"
            )
        h = x
        if self.temb is not None:
            t = torch.as_tensor(t, dtype=DTYPE, device=x.device).reshape(-1)
            if t.numel() == 1:
                t = t.expand(x.shape[0])
            h = torch.cat([h, self.temb(t)], dim=-1)
        for layer in self.hidden:
            h = self.act(layer(h))
        return self.final(h)


class _ConvBlock(nn.Module):
    """Two 3x3 convs with group norm and additive time conditioning."""

    def __init__(self, c_in, c_out, temb_dim, act):
        super().__init__()
        self.act = act
        groups = math.gcd(8, c_in)
        self.norm1 = nn.GroupNorm(groups, c_in)
        self.conv1 = nn.Conv2d(c_in, c_out, 3, padding=1)
        self.norm2 = nn.GroupNorm(math.gcd(8, c_out), c_out)
        self.conv2 = nn.Conv2d(c_out, c_out, 3, padding=1)
        self.t_proj = nn.Linear(temb_dim, c_out) if temb_dim else None
        self.skip = nn.Conv2d(c_in, c_out, 1) if c_in != c_out else nn.Identity()

    def forward(self, x, temb):
        h = self.conv1(self.act(self.norm1(x)))
        if self.t_proj is not None:
            h = h + self.t_proj(temb)[:, :, None, None]
        h = self.conv2(self.act(self.norm2(h)))
        return h + self.skip(x)


class UNetBackbone(nn.Module):
    """Three-level encoder/decoder for images up to 32x32.

    Mirrors the DDPM downsampling structure in miniature: conv blocks with
    additive time conditioning, strided-conv downsampling, a mid block,
    and a skip-connected up path.
    """

    def __init__(self, spec: BackboneSpec, zero_final: bool):
        super().__init__()
        self.spec = spec
        c_img = spec.input_shape[0] + spec.cond_channels
        widths = spec.widths
        self.act = _ACTIVATIONS[spec.activation]
        tdim = spec.time_embed_dim if spec.use_time else 0
        self.temb = TimeEmbedding(spec.time_embed_dim) if spec.use_time else None
        self.stem = nn.Conv2d(c_img, widths[0], 3, padding=1)
        self.down_blocks = nn.ModuleList()
        self.downs = nn.ModuleList()
        for i, w in enumerate(widths):
            c_prev = widths[max(i - 1, 0)]
            self.down_blocks.append(_ConvBlock(c_prev if i else widths[0], w, tdim, self.act))
            if i < len(widths) - 1:
                self.downs.append(nn.Conv2d(w, w, 3, stride=2, padding=1))
        self.mid = _ConvBlock(widths[-1], widths[-1], tdim, self.act)
        self.up_blocks = nn.ModuleList()
        for i in reversed(range(len(widths) - 1)):
            self.up_blocks.append(
                _ConvBlock(widths[i + 1] + widths[i], widths[i], tdim, self.act)
            )
        self.head = nn.Conv2d(widths[0], spec.input_shape[0], 3, padding=1)
        if zero_final:
            nn.init.zeros_(self.head.weight)
            nn.init.zeros_(self.head.bias)
        self.to(DTYPE)

    def _embed(self, t, batch, device):
        if self.temb is None:
            return None
        t = torch.as_tensor(t, dtype=DTYPE, device=device).reshape(-1)
        if t.numel() == 1:
            t = t.expand(batch)
        return self.temb(t)

    def forward(self, x, t):
        temb = self._embed(t, x.shape[0], x.device)
        h = self.stem(x)
        skips = []
        for i, block in enumerate(self.down_blocks):
            h = block(h, temb)
            if i < len(self.downs):
                skips.append(h)
                h = self.downs[i](h)
        h = self.mid(h, temb)
        for block in self.up_blocks:
            skip = skips.pop()
            h = F.interpolate(h, size=skip.shape[-2:], mode="nearest")
            h = block(torch.cat([h, skip], dim=1), temb)
        return self.head(h)


class UNetTrunk(nn.Module):
    """Discriminator trunk: U-Net down path + mid block + linear head."""

    def __init__(self, spec: BackboneSpec):
        super().__init__()
        self.spec = spec
        c_img = spec.input_shape[0] + spec.cond_channels
        widths = spec.widths
        self.act = _ACTIVATIONS[spec.activation]
        tdim = spec.time_embed_dim if spec.use_time else 0
        self.temb = TimeEmbedding(spec.time_embed_dim) if spec.use_time else None
        self.stem = nn.Conv2d(c_img, widths[0], 3, padding=1)
        self.blocks = nn.ModuleList()
        self.downs = nn.ModuleList()
        for i, w in enumerate(widths):
            c_prev = widths[max(i - 1, 0)]
            self.blocks.append(_ConvBlock(c_prev if i else widths[0], w, tdim, self.act))
            if i < len(widths) - 1:
                self.downs.append(nn.Conv2d(w, w, 3, stride=2, padding=1))
        self.mid = _ConvBlock(widths[-1], widths[-1], tdim, self.act)
        self.head = nn.Linear(widths[-1], 1)
        _init_linear(self.head)
        self.to(DTYPE)

    def forward(self, x, t):
        temb = None
        if self.temb is not None:
            tt = torch.as_tensor(t, dtype=DTYPE, device=x.device).reshape(-1)
            if tt.numel() == 1:
                tt = tt.expand(x.shape[0])
            temb = self.temb(tt)
        h = self.stem(x)
        for i, block in enumerate(self.blocks):
            h = block(h, temb)
            if i < len(self.downs):
                down = self.downs[i](h)
                if self.spec.residual_downsampling:
                    down = down + F.avg_pool2d(h, 2, ceil_mode=True)
                h = down
        h = self.mid(h, temb)
        h = h.mean(dim=(-2, -1))
        return self.head(h).squeeze(-1)


class MLPTrunk(nn.Module):
    """Discriminator trunk for vector data: MLP to a scalar logit."""

    def __init__(self, spec: BackboneSpec):
        super().__init__()
        self.spec = spec
        self.net = MLPBackbone(spec, out_dim=1, zero_final=False)

    def forward(self, x, t):
        return self.net(x, t).squeeze(-1)

    def zero_head_(self):
        nn.init.zeros_(self.net.final.weight)
        nn.init.zeros_(self.net.final.bias)


def make_generator(spec: BackboneSpec) -> nn.Module:
    """Generator backbone F_theta; final layer zero-initialized so the
    wrapped model starts at f(x, t) ~= c_skip * x."""
    if spec.cond_channels:
        raise ValueError("generator backbones take no conditioning channels")
    if spec.kind == "mlp":
        return MLPBackbone(spec, out_dim=spec.input_shape[0], zero_final=True)
    return UNetBackbone(spec, zero_final=True)


def make_discriminator_trunk(spec: BackboneSpec) -> nn.Module:
    """Trunk mapping (x, t) to one scalar logit per sample."""
    if spec.kind == "mlp":
        return MLPTrunk(spec)
    return UNetTrunk(spec)


def parameter_count(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())
