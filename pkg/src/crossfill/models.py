"""Completion generator and critic networks.

The generator takes the masked image with the mask concatenated as an extra
input channel (no margin/expansion machinery, so input and output resolutions
are equal and any mask shape works): stride-2 conv encoder, dilated residual
bottleneck, feature renormalization against visible-region statistics, then a
nearest-neighbor-upsampling decoder with a sigmoid output in [0, 1].
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError
from .masks import Mask

__all__ = [
    "GeneratorConfig",
    "CriticConfig",
    "Generator",
    "Critic",
    "ContextNorm",
    "context_normalize",
    "composite_output",
]


@dataclass(frozen=True)
class GeneratorConfig:
    base_channels: int = 32
    downsample_stages: int = 3
    dilated_blocks: int = 4
    use_context_normalization: bool = True
    image_channels: int = 3

    def __post_init__(self):
        if self.base_channels < 8:
            raise ConfigError(f"base_channels must be >= 8, got {self.base_channels}")
        if self.downsample_stages < 1:
            raise ConfigError(f"downsample_stages must be >= 1, got {self.downsample_stages}")
        if self.dilated_blocks < 0:
            raise ConfigError(f"dilated_blocks must be >= 0, got {self.dilated_blocks}")

    @property
    def input_channels(self) -> int:
        # image channels + 1 mask channel
        return self.image_channels + 1


@dataclass(frozen=True)
class CriticConfig:
    base_channels: int = 32
    downsample_stages: int = 3
    image_channels: int = 3

    def __post_init__(self):
        if self.base_channels < 8:
            raise ConfigError(f"base_channels must be >= 8, got {self.base_channels}")
        if self.downsample_stages < 1:
            raise ConfigError(f"downsample_stages must be >= 1, got {self.downsample_stages}")


def context_normalize(
    features: torch.Tensor, visibility: torch.Tensor, rho: torch.Tensor | float
) -> torch.Tensor:
    """Shift hidden-cell feature statistics toward the visible-cell ones.

    visibility is the mask area-averaged down to feature resolution, values in
    [0, 1]; cells > 0.5 count as visible. Per item and channel the hidden
    cells are renormalized as (f - mu_h)/sigma_h * sigma_v + mu_v and blended
    with the input by rho in [0, 1]; visible cells pass through untouched.
    Items whose downsampled mask is all-visible or all-hidden pass through
    with a warning.
    """
    if features.dim() != 4:
        raise ValueError(f"expected (B, C, h, w) features, got {features.shape}")
    if visibility.dim() == 3:
        visibility = visibility.unsqueeze(1)
    if visibility.shape[0] != features.shape[0] or visibility.shape[2:] != features.shape[2:]:
        raise ValueError(
            f"visibility {visibility.shape} does not match features {features.shape}"
        )
    rho = torch.as_tensor(rho, dtype=features.dtype, device=features.device).clamp(0.0, 1.0)
    eps = 1e-8
    visible = visibility > 0.5  # (B, 1, h, w)
    out = features.clone()
    for b in range(features.shape[0]):
        vis = visible[b, 0]
        if vis.all() or not vis.any():
            warnings.warn("degenerate feature-level mask; context normalization is a no-op")
            continue
        feats = features[b]  # (C, h, w)
        vis_cells = feats[:, vis]  # (C, Nv)
        hid_cells = feats[:, ~vis]  # (C, Nh)
        mu_v = vis_cells.mean(dim=1, keepdim=True)
        sd_v = vis_cells.std(dim=1, unbiased=False, keepdim=True)
        mu_h = hid_cells.mean(dim=1, keepdim=True)
        sd_h = hid_cells.std(dim=1, unbiased=False, keepdim=True)
        renorm = (hid_cells - mu_h) / (sd_h + eps) * sd_v + mu_v
        out[b][:, ~vis] = rho * renorm + (1.0 - rho) * hid_cells
    return out


class ContextNorm(nn.Module):
    """context_normalize with a learnable blend factor (clamped to [0, 1])."""

    def __init__(self, init: float = 0.5):
        super().__init__()
        self.rho = nn.Parameter(torch.tensor(float(init)))

    def forward(self, features: torch.Tensor, visibility: torch.Tensor) -> torch.Tensor:
        return context_normalize(features, visibility, self.rho)


class DilatedBlock(nn.Module):
    def __init__(self, channels: int, dilation: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=dilation, dilation=dilation)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=dilation, dilation=dilation)

    def forward(self, x):
        h = F.leaky_relu(self.conv1(x), 0.2)
        return x + self.conv2(h)


class Generator(nn.Module):
    def __init__(self, config: GeneratorConfig | None = None):
        super().__init__()
        self.config = config or GeneratorConfig()
        cfg = self.config
        ch = cfg.base_channels

        self.stem = nn.Conv2d(cfg.input_channels, ch, 5, padding=2)
        downs, chans = [], [ch]
        for _ in range(cfg.downsample_stages):
            downs.append(nn.Conv2d(chans[-1], chans[-1] * 2, 3, stride=2, padding=1))
            chans.append(chans[-1] * 2)
        self.downs = nn.ModuleList(downs)

        dilations = [2, 4, 8]
        self.blocks = nn.ModuleList(
            DilatedBlock(chans[-1], dilations[i % 3]) for i in range(cfg.dilated_blocks)
        )
        self.context_norm = ContextNorm() if cfg.use_context_normalization else None

        ups = []
        for i in range(cfg.downsample_stages):
            ups.append(nn.Conv2d(chans[-1 - i], chans[-2 - i], 3, padding=1))
        self.ups = nn.ModuleList(ups)
        self.head = nn.Conv2d(ch, cfg.image_channels, 3, padding=1)

    def forward(self, masked_image: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        cfg = self.config
        if masked_image.dim() != 4 or masked_image.shape[1] != cfg.image_channels:
            raise ValueError(
                f"expected (B, {cfg.image_channels}, H, W) images, got {tuple(masked_image.shape)}"
            )
        if mask.dim() == 3:
            mask = mask.unsqueeze(1)
        if mask.shape[0] != masked_image.shape[0] or mask.shape[2:] != masked_image.shape[2:]:
            raise ValueError(f"mask {tuple(mask.shape)} does not match image")
        factor = 2**cfg.downsample_stages
        h, w = masked_image.shape[2:]
        if h % factor or w % factor:
            raise ValueError(
                f"spatial dims ({h}, {w}) must be divisible by 2^{cfg.downsample_stages}"
            )
        mask = mask.to(masked_image.dtype)

        x = F.leaky_relu(self.stem(torch.cat([masked_image, mask], dim=1)), 0.2)
        for down in self.downs:
            x = F.leaky_relu(down(x), 0.2)
        for block in self.blocks:
            x = block(x)
        if self.context_norm is not None:
            # area-average the mask down to feature resolution
            visibility = F.avg_pool2d(mask, kernel_size=factor)
            x = self.context_norm(x, visibility)
        for up in self.ups:
            x = F.interpolate(x, scale_factor=2, mode="nearest")
            x = F.leaky_relu(up(x), 0.2)
        return torch.sigmoid(self.head(x))


class Critic(nn.Module):
    """Patch-style Wasserstein critic: unbounded scalar score per image,
    the spatial mean of a score map. No normalization layers."""

    def __init__(self, config: CriticConfig | None = None):
        super().__init__()
        self.config = config or CriticConfig()
        cfg = self.config
        layers = [nn.Conv2d(cfg.image_channels, cfg.base_channels, 5, stride=2, padding=2)]
        ch = cfg.base_channels
        for _ in range(cfg.downsample_stages - 1):
            layers.append(nn.LeakyReLU(0.2))
            layers.append(nn.Conv2d(ch, ch * 2, 5, stride=2, padding=2))
            ch *= 2
        layers.append(nn.LeakyReLU(0.2))
        layers.append(nn.Conv2d(ch, 1, 3, padding=1))
        self.net = nn.Sequential(*layers)

    def forward(self, image: torch.Tensor) -> torch.Tensor:
        if image.dim() != 4 or image.shape[1] != self.config.image_channels:
            raise ValueError(
                f"expected (B, {self.config.image_channels}, H, W) images, got {tuple(image.shape)}"
            )
        return self.net(image).mean(dim=(1, 2, 3))


def composite_output(predicted, original, mask):
    """Visible pixels from the original, hidden pixels from the prediction.

    Works on numpy arrays and torch tensors alike; the mask must be binary and
    either broadcast against the images or match their spatial prefix
    ((H, W) against (H, W, C) gets a channel axis appended).
    """
    if predicted.shape != original.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {original.shape}")
    keep = mask.grid if isinstance(mask, Mask) else mask
    if isinstance(predicted, torch.Tensor) and not isinstance(keep, torch.Tensor):
        keep = torch.as_tensor(np.asarray(keep), device=predicted.device)
    if keep.ndim == predicted.ndim - 1 and tuple(keep.shape) == tuple(predicted.shape[:-1]):
        keep = keep[..., None]
    if isinstance(predicted, torch.Tensor):
        keep = keep.to(predicted.dtype)
    else:
        keep = np.asarray(keep, dtype=predicted.dtype)
    return keep * original + (1 - keep) * predicted
