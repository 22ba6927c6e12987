"""Image quality metrics (PSNR, SSIM, FID) and difficulty-bucketed reports.

All metrics assume float images in [0, 1] unless a max_value says otherwise.
Absolute FID numbers depend on the feature extractor, so every report carries
the extractor identity; the default extractor is a small seeded random
convolutional embedding that needs no pretrained weights.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientSamplesError, NumericalInstabilityError
from .masks import DifficultyClass, Mask, classify_difficulty

__all__ = [
    "psnr",
    "ssim",
    "FeatureStats",
    "feature_stats",
    "frechet_distance",
    "fid",
    "RandomConvFeatures",
    "BucketFid",
    "EvalReport",
    "bucketed_report",
]


def psnr(a: np.ndarray, b: np.ndarray, max_value: float = 1.0) -> float:
    """Peak signal-to-noise ratio, 10*log10(max_value^2 / MSE) in dB.

    Identical images have zero MSE and return the +inf sentinel.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if max_value <= 0:
        raise ValueError(f"max_value must be positive, got {max_value}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    ax = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    g = np.exp(-(ax**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()

def _windowed_mean(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # valid-mode weighted local mean over all window positions
    win = sliding_window_view(x, kernel.shape)
    return np.tensordot(win, kernel, axes=([2, 3], [0, 1]))


def ssim(
    a: np.ndarray,
    b: np.ndarray,
    window: int = 11,
    k1: float = 0.01,
    k2: float = 0.03,
    max_value: float = 1.0,
    sigma: float = 1.5,
) -> float:
    """Mean local SSIM over all valid window positions, averaged over channels.

    Uses a Gaussian window (default 11x11, sigma 1.5) and the usual
    stabilizers C1 = (k1*max)^2, C2 = (k2*max)^2.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[:, :, None]
        b = b[:, :, None]
    if a.ndim != 3:
        raise ValueError(f"expected (H, W) or (H, W, C) images, got shape {a.shape}")
    if min(a.shape[:2]) < window:
        raise ValueError(f"image {a.shape[:2]} smaller than the {window}x{window} window")
    kernel = _gaussian_kernel(window, sigma)
    c1 = (k1 * max_value) ** 2
    c2 = (k2 * max_value) ** 2
    scores = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mu_x = _windowed_mean(x, kernel)
        mu_y = _windowed_mean(y, kernel)
        # Gaussian-weighted (uncorrected) second moments
        var_x = _windowed_mean(x * x, kernel) - mu_x * mu_x
        var_y = _windowed_mean(y * y, kernel) - mu_y * mu_y
        cov_xy = _windowed_mean(x * y, kernel) - mu_x * mu_y
        ssim_map = ((2.0 * mu_x * mu_y + c1) * (2.0 * cov_xy + c2)) / (
            (mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2)
        )
        scores.append(ssim_map.mean())
    return float(np.mean(scores))


@dataclass(frozen=True)
class FeatureStats:
    """Gaussian fit of a feature set: sample mean, unbiased covariance, count."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        if self.mean.ndim != 1 or self.cov.shape != (self.mean.size, self.mean.size):
            raise ValueError(
                f"inconsistent stats: mean {self.mean.shape}, cov {self.cov.shape}"
            )
        if self.count < 2:
            raise InsufficientSamplesError(f"need >= 2 samples, got {self.count}")
        if not np.allclose(self.cov, self.cov.T):
            raise ValueError("covariance must be symmetric")
        min_eig = float(np.linalg.eigvalsh(self.cov).min())
        if min_eig < -1e-8:
            raise ValueError(f"covariance not PSD (min eigenvalue {min_eig:.3e})")

    @property
    def dim(self) -> int:
        return self.mean.size


def feature_stats(features: np.ndarray) -> FeatureStats:
    """Sample mean and unbiased (n-1) covariance of an n x d feature matrix.

    The covariance is symmetrized as (S + S^T)/2 before any eigen work.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValueError(f"expected an n x d matrix, got shape {features.shape}")
    n = features.shape[0]
    if n < 2:
        raise InsufficientSamplesError(f"need >= 2 feature rows, got {n}")
    if not np.isfinite(features).all():
        raise ValueError("features contain non-finite entries")
    mean = features.mean(axis=0)
    cov = np.atleast_2d(np.cov(features, rowvar=False))
    cov = (cov + cov.T) / 2.0
    return FeatureStats(mean=mean, cov=cov, count=n)


def _sqrt_psd(mat: np.ndarray, rel_tol: float = 1e-3) -> np.ndarray:
    """Symmetric PSD square root by eigendecomposition.

    Negative eigenvalues (roundoff) are clipped at 0; if the squared root does
    not reproduce the input to rel_tol in Frobenius norm, the input was too
    far from PSD and we refuse to report a number.
    """
    vals, vecs = np.linalg.eigh(mat)
    root = (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T
    denom = max(float(np.linalg.norm(mat)), 1e-12)
    residual = float(np.linalg.norm(root @ root - mat)) / denom
    if residual > rel_tol:
        raise NumericalInstabilityError(
            f"matrix square root residual {residual:.3e} exceeds {rel_tol:.0e}"
        )
    return root


def frechet_distance(s1: FeatureStats, s2: FeatureStats) -> float:
    """Frechet distance between two Gaussian fits:

        ||mu1 - mu2||^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2))

    The trace of the matrix square root is computed from the symmetrized
    product sqrt(S1) S2 sqrt(S1), whose eigenvalues match those of S1 S2;
    each square root is eigendecomposition-based with negative eigenvalues
    clipped at 0 and a residual check. Tiny negative totals (> -1e-6, pure
    roundoff) are clamped to 0.
    """
    if s1.dim != s2.dim:
        raise ValueError(f"dimension mismatch: {s1.dim} vs {s2.dim}")
    root1 = _sqrt_psd(s1.cov)
    inner = root1 @ s2.cov @ root1
    inner = (inner + inner.T) / 2.0
    tr_sqrt = float(np.trace(_sqrt_psd(inner)))
    mean_term = float(np.sum((s1.mean - s2.mean) ** 2))
    dist = mean_term + float(np.trace(s1.cov) + np.trace(s2.cov)) - 2.0 * tr_sqrt
    if dist < 0.0:
        if dist < -1e-6:
            raise NumericalInstabilityError(f"Frechet distance {dist:.3e} below -1e-6")
        dist = 0.0
    return dist


class RandomConvFeatures:
    """Seeded random two-layer conv embedding to a d-dim feature vector.

    Deterministic and dependency-free; a stand-in for pretrained
    inception-style extractors at desk scale. Any object with
    extract(images) -> n x d and an identity string can replace it.
    """

    def __init__(self, dim: int = 64, channels: int = 3, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.dim = dim
        self.seed = seed
        hidden = 8
        self._k1 = rng.normal(scale=1.0 / math.sqrt(9 * channels), size=(3, 3, channels, hidden))
        self._k2 = rng.normal(scale=1.0 / math.sqrt(9 * hidden), size=(3, 3, hidden, dim))

    @property
    def identity(self) -> str:
        return f"random-conv-{self.dim}-seed{self.seed}"

    @staticmethod
    def _conv(x: np.ndarray, kernels: np.ndarray) -> np.ndarray:
        # valid conv, stride 2: (N, H, W, Cin) -> (N, H', W', Cout)
        win = sliding_window_view(x, (3, 3), axis=(1, 2))[:, ::2, ::2]
        return np.einsum("nhwcij,ijco->nhwo", win, kernels, optimize=True)

    def extract(self, images: np.ndarray, batch: int = 64) -> np.ndarray:
        images = np.asarray(images, dtype=np.float64)
        if images.ndim != 4:
            raise ValueError(f"expected (N, H, W, C) images, got shape {images.shape}")
        if min(images.shape[1:3]) < 8:
            raise ValueError("images must be at least 8x8 for the conv embedding")
        out = []
        for i in range(0, images.shape[0], batch):
            x = images[i : i + batch]
            x = np.maximum(self._conv(x, self._k1), 0.0)
            x = np.maximum(self._conv(x, self._k2), 0.0)
            out.append(x.mean(axis=(1, 2)))
        return np.concatenate(out, axis=0)


def fid(real_images: np.ndarray, generated_images: np.ndarray, extractor) -> float:
    """Frechet distance between extractor features of two image sets."""
    return frechet_distance(
        feature_stats(extractor.extract(np.asarray(real_images))),
        feature_stats(extractor.extract(np.asarray(generated_images))),
    )


@dataclass
class BucketFid:
    """Per-difficulty FID; value is None when the bucket is empty or has a
    single image (no covariance), small_sample flags counts below 2*d."""

    value: float | None
    count: int
    small_sample: bool


@dataclass
class EvalReport:
    per_image: list[tuple[str, float, float, DifficultyClass]]
    fid_overall: float | None  # None when the set has a single image
    fid_by_bucket: dict[DifficultyClass, BucketFid]
    extractor_id: str
    composited: bool = True

    @property
    def psnr_values(self) -> list[float]:
        return [row[1] for row in self.per_image]

    def summary(self) -> dict:
        psnrs = self.psnr_values
        finite = [p for p in psnrs if math.isfinite(p)]
        return {
            "n": len(self.per_image),
            "psnr_mean": float(np.mean(finite)) if finite else "inf",
            "psnr_inf_count": sum(1 for p in psnrs if math.isinf(p)),
            "ssim_mean": float(np.mean([row[2] for row in self.per_image])),
            "fid_overall": self.fid_overall,
            "fid_by_bucket": {
                cls.value: {
                    "fid": bucket.value,
                    "n": bucket.count,
                    "small_sample": bucket.small_sample,
                }
                for cls, bucket in self.fid_by_bucket.items()
            },
            "extractor_id": self.extractor_id,
            "composited": self.composited,
        }

    def to_json(self) -> str:
        def _enc(v):
            return "inf" if isinstance(v, float) and math.isinf(v) else v

        doc = {
            "summary": self.summary(),
            "per_image": [
                {"id": i, "psnr": _enc(p), "ssim": s, "difficulty": d.value}
                for i, p, s, d in self.per_image
            ],
        }
        return json.dumps(doc, indent=2)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json())


def bucketed_report(
    items: list[tuple[np.ndarray, np.ndarray, Mask]],
    extractor,
    ids: list[str] | None = None,
    max_value: float = 1.0,
    composite: bool = True,
) -> EvalReport:
    """Per-image PSNR/SSIM plus overall and per-difficulty FID.

    items are (real, generated, mask) triples; with composite=True the
    generated image first gets its visible pixels replaced by the real ones,
    matching what a completion model actually outputs to a user.
    """
    if not items:
        raise ValueError("bucketed_report needs at least one item")
    if ids is None:
        ids = [f"{i:05d}" for i in range(len(items))]
    if len(ids) != len(items):
        raise ValueError("ids length must match items")

    reals, outputs, rows = [], [], []
    for name, (real, generated, mask) in zip(ids, items):
        real = np.asarray(real, dtype=np.float64)
        generated = np.asarray(generated, dtype=np.float64)
        if composite:
            keep = mask.grid.astype(bool)
            if real.ndim == 3:
                keep = keep[:, :, None]
            generated = np.where(keep, real, generated)
        rows.append(
            (
                name,
                psnr(generated, real, max_value),
                ssim(generated, real, max_value=max_value),
                classify_difficulty(mask),
            )
        )
        reals.append(real)
        outputs.append(generated)

    reals_arr = np.stack(reals)
    outputs_arr = np.stack(outputs)
    overall = fid(reals_arr, outputs_arr, extractor) if len(items) >= 2 else None

    buckets: dict[DifficultyClass, BucketFid] = {}
    for cls in DifficultyClass:
        idx = [i for i, row in enumerate(rows) if row[3] is cls]
        if not idx:
            continue
        value = fid(reals_arr[idx], outputs_arr[idx], extractor) if len(idx) >= 2 else None
        small = len(idx) < 2 * extractor.dim
        buckets[cls] = BucketFid(value=value, count=len(idx), small_sample=small)

    return EvalReport(
        per_image=rows,
        fid_overall=overall,
        fid_by_bucket=buckets,
        extractor_id=extractor.identity,
        composited=composite,
    )
