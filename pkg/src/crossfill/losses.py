"""Training losses: weighted reconstruction, Wasserstein critic with gradient
penalty, and relative-similarity patch matching over frozen conv features.

The pretraining stage uses reconstruction only; the adversarial and
patch-matching terms join in the fine-tuning stage.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from scipy.ndimage import distance_transform_cdt

from .errors import ConfigError, TrainingAbort
from .masks import Mask

__all__ = [
    "Stage",
    "LossBundle",
    "spatial_weight_map",
    "reconstruction_loss",
    "critic_losses",
    "idmrf_loss",
    "total_loss",
    "FrozenConvFeatures",
]

RS_EPS = 1e-5


class Stage(Enum):
    PRETRAIN = "pretrain"
    FINETUNE = "finetune"


@dataclass(frozen=True)
class LossBundle:
    """Weights of the loss terms active in one training stage."""

    stage: Stage
    recon_weight: float = 1.0
    adv_weight: float = 0.0
    mrf_weight: float = 0.0

    def __post_init__(self):
        if min(self.recon_weight, self.adv_weight, self.mrf_weight) < 0:
            raise ConfigError(f"loss weights must be non-negative: {self}")
        if self.stage is Stage.PRETRAIN and (self.adv_weight != 0 or self.mrf_weight != 0):
            raise ConfigError(
                "pretraining is reconstruction-only; adversarial/patch-matching "
                f"weights must be 0, got adv={self.adv_weight} mrf={self.mrf_weight}"
            )


def spatial_weight_map(m: Mask, decay: float = 0.9) -> np.ndarray:
    """Reconstruction weights that fall off with distance from visible pixels.

    weight(p) = decay^(d(p) - 1) on hidden pixels, where d(p) is the Chebyshev
    distance to the nearest visible pixel; 0 on visible pixels. Pixels right at
    the boundary (d = 1) get weight 1.
    """
    if not (0.0 < decay < 1.0):
        raise ValueError(f"decay must be in (0, 1), got {decay}")
    hidden = m.grid == 0
    if not hidden.any():
        return np.zeros(m.shape, dtype=np.float64)
    if hidden.all():
        raise ValueError("weight map needs at least one visible pixel")
    dist = distance_transform_cdt(hidden, metric="chessboard").astype(np.float64)
    weights = np.where(hidden, decay ** (dist - 1.0), 0.0)
    return weights


def _per_pixel_l1(predicted: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    # (B, C, H, W) -> (B, H, W), channel-mean absolute error
    return (predicted - target).abs().mean(dim=1)


def reconstruction_loss(
    predicted: torch.Tensor, target: torch.Tensor, weight_map: torch.Tensor
) -> torch.Tensor:
    """Weighted L1 over hidden pixels plus plain L1 over visible pixels.

    The hidden term is sum_p w(p) * |err|(p) / sum_p w(p) with the channel
    mean taken inside the sum; visible pixels are exactly those with zero
    weight and contribute an unweighted mean with coefficient 1.
    """
    if predicted.shape != target.shape:
        raise ValueError(f"shape mismatch: {predicted.shape} vs {target.shape}")
    if predicted.dim() != 4:
        raise ValueError(f"expected (B, C, H, W) tensors, got {predicted.shape}")
    w = weight_map.to(predicted.dtype)
    if w.dim() == 2:
        w = w.unsqueeze(0)
    w = w.expand(predicted.shape[0], *predicted.shape[2:])
    if not torch.isfinite(w).all():
        raise ValueError("weight map contains non-finite values")

    err = _per_pixel_l1(predicted, target)
    total_w = w.sum()
    visible = w == 0
    visible_term = err[visible].mean() if visible.any() else err.sum() * 0.0
    if total_w == 0:
        warnings.warn("zero total weight; returning visible-only reconstruction term")
        return visible_term
    hidden_term = (w * err).sum() / total_w
    return hidden_term + visible_term


def critic_losses(
    critic: nn.Module,
    real: torch.Tensor,
    fake: torch.Tensor,
    gp_weight: float,
    rng: np.random.Generator,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Wasserstein critic loss with gradient penalty, and the generator's
    adversarial loss.

        critic_loss = E[score(fake)] - E[score(real)]
                      + gp_weight * E[(||grad score(x_hat)||_2 - 1)^2]
        gen_adv     = -E[score(fake)]

    x_hat interpolates real and detached fake with a per-item uniform factor.
    """
    if real.shape != fake.shape:
        raise ValueError(f"shape mismatch: {real.shape} vs {fake.shape}")
    fake_detached = fake.detach()
    score_real = critic(real)
    score_fake = critic(fake_detached)

    eps_shape = (real.shape[0],) + (1,) * (real.dim() - 1)
    eps = torch.as_tensor(
        rng.random(real.shape[0]), dtype=real.dtype, device=real.device
    ).view(eps_shape)
    x_hat = (eps * real + (1.0 - eps) * fake_detached).requires_grad_(True)
    score_hat = critic(x_hat)
    grads = torch.autograd.grad(
        outputs=score_hat,
        inputs=x_hat,
        grad_outputs=torch.ones_like(score_hat),
        create_graph=True,
        retain_graph=True,
        only_inputs=True,
    )[0]
    if not torch.isfinite(grads).all():
        raise TrainingAbort(
            f"non-finite critic gradients (grad norm stats: "
            f"min={grads.min().item():.3e}, max={grads.max().item():.3e})"
        )
    grad_norm = grads.flatten(1).norm(2, dim=1)
    penalty = ((grad_norm - 1.0) ** 2).mean()

    critic_loss = score_fake.mean() - score_real.mean() + gp_weight * penalty
    gen_adv_loss = -critic(fake).mean()
    if not (torch.isfinite(critic_loss) and torch.isfinite(gen_adv_loss)):
        raise TrainingAbort(
            f"non-finite adversarial loss (critic={critic_loss.item()}, gen={gen_adv_loss.item()})"
        )
    return critic_loss, gen_adv_loss


def _patches(features: torch.Tensor, patch: int) -> torch.Tensor:
    # (B, C, H, W) -> (B, P, C*patch*patch) rows of flattened patches
    return F.unfold(features, kernel_size=patch).transpose(1, 2)


def idmrf_loss(
    predicted_features: torch.Tensor,
    target_features: torch.Tensor,
    bandwidth: float = 0.5,
    patch: int = 1,
) -> torch.Tensor:
    """Relative-similarity patch matching between two feature maps.

    For every predicted patch v and target patch s, the relative similarity
    RS(v, s) = exp((cos(v, s) / (max_r cos(v, r) + eps)) / bandwidth) is
    normalized over the target patches; the loss is
    -log(mean over target patches of max over predicted patches of RS).
    A target patch that no predicted patch claims drags the mean down, which
    pushes the prediction to cover the target's patch statistics.
    """
    if predicted_features.shape != target_features.shape:
        raise ValueError(
            f"feature shape mismatch: {predicted_features.shape} vs {target_features.shape}"
        )
    if predicted_features.dim() != 4:
        raise ValueError(f"expected (B, C, H, W) features, got {predicted_features.shape}")
    if patch < 1 or patch > min(predicted_features.shape[2:]):
        raise ValueError(f"patch size {patch} invalid for {predicted_features.shape}")
    if predicted_features.abs().sum() == 0 or target_features.abs().sum() == 0:
        warnings.warn("all-zero feature map; patch-matching loss is 0")
        return predicted_features.sum() * 0.0

    v = _patches(predicted_features, patch)  # (B, Pv, D)
    s = _patches(target_features, patch)  # (B, Ps, D)
    v = v / v.norm(dim=2, keepdim=True).clamp_min(1e-12)
    s = s / s.norm(dim=2, keepdim=True).clamp_min(1e-12)
    cos = torch.bmm(v, s.transpose(1, 2))  # (B, Pv, Ps)

    best = cos.max(dim=2, keepdim=True).values
    rs = torch.exp((cos / (best + RS_EPS)) / bandwidth)
    rs = rs / rs.sum(dim=2, keepdim=True)
    claimed = rs.max(dim=1).values  # (B, Ps)
    return -torch.log(claimed.mean(dim=1)).mean()


def total_loss(
    bundle: LossBundle,
    recon: torch.Tensor | float,
    adv: torch.Tensor | float | None = None,
    mrf: torch.Tensor | float | None = None,
):
    """Weighted sum of the loss parts active under the bundle's stage."""
    out = bundle.recon_weight * recon
    if bundle.adv_weight != 0:
        if adv is None:
            raise ConfigError("adv_weight > 0 but no adversarial term supplied")
        out = out + bundle.adv_weight * adv
    if bundle.mrf_weight != 0:
        if mrf is None:
            raise ConfigError("mrf_weight > 0 but no patch-matching term supplied")
        out = out + bundle.mrf_weight * mrf
    return out


class FrozenConvFeatures(nn.Module):
    """Fixed, seeded random conv stack used as the patch-matching feature
    source so the loss is deterministic without pretrained weights.

    Weights are frozen at init; gradients still flow through to the input.
    Swap in any nn.Module with the same call signature for a pretrained
    perceptual extractor.
    """

    def __init__(self, in_channels: int = 3, hidden: int = 16, out_channels: int = 32, seed: int = 0):
        super().__init__()
        gen = torch.Generator().manual_seed(seed)
        self.conv1 = nn.Conv2d(in_channels, hidden, 3, stride=1, padding=1)
        self.conv2 = nn.Conv2d(hidden, out_channels, 3, stride=2, padding=1)
        with torch.no_grad():
            for conv in (self.conv1, self.conv2):
                fan_in = conv.in_channels * 9
                conv.weight.copy_(
                    torch.randn(conv.weight.shape, generator=gen) / fan_in**0.5
                )
                conv.bias.zero_()
        for p in self.parameters():
            p.requires_grad_(False)
        self.identity = f"frozen-conv-{out_channels}-seed{seed}"

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = F.leaky_relu(self.conv1(x), 0.2)
        return F.leaky_relu(self.conv2(x), 0.2)
