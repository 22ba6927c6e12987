"""Binary visibility masks: generation, transforms, classification, application.

Convention everywhere: a mask grid holds 1 on visible (kept) pixels and 0 on
hidden (to-predict) pixels. On disk masks are single-channel 8-bit images with
255 = visible, 0 = hidden; reads threshold at 128.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.interpolate import make_interp_spline

__all__ = [
    "Mask",
    "TaskKind",
    "DifficultyClass",
    "FillMode",
    "UniformNoise",
    "ConstantFill",
    "make_center_rect_mask",
    "make_random_rect_mask",
    "make_irregular_mask",
    "make_bspline_panorama_mask",
    "invert_mask",
    "visible_fraction",
    "classify_difficulty",
    "apply_mask",
    "save_mask",
    "load_mask",
    "load_mask_directory",
]


class TaskKind(Enum):
    """Which side of an image a model must predict."""

    INPAINTING = "inpainting"
    OUTPAINTING = "outpainting"

    @property
    def opposite(self) -> "TaskKind":
        return TaskKind.OUTPAINTING if self is TaskKind.INPAINTING else TaskKind.INPAINTING


class DifficultyClass(Enum):
    """Difficulty bucket driven by visible area: less than 20% visible is
    extreme, less than 40% is difficult, the rest is easy. Both thresholds
    are strict ("less than")."""

    EASY = "easy"
    DIFFICULT = "difficult"
    EXTREME = "extreme"

    @staticmethod
    def from_fraction(visible: float) -> "DifficultyClass":
        if visible < 0.20:
            return DifficultyClass.EXTREME
        if visible < 0.40:
            return DifficultyClass.DIFFICULT
        return DifficultyClass.EASY


@dataclass(frozen=True)
class Mask:
    """Binary visibility raster. grid is (height, width) uint8 with values in {0, 1}.

    Degenerate (all-visible / all-hidden) grids are representable -- they are
    useful as identity cases when applying masks -- but every generator in this
    module refuses to produce one.
    """

    grid: np.ndarray = field(repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid)
        if grid.ndim != 2:
            raise ValueError(f"mask grid must be 2-d, got shape {grid.shape}")
        if grid.size == 0:
            raise ValueError("mask grid must be non-empty")
        if not np.isin(grid, (0, 1)).all():
            raise ValueError("mask grid values must be exactly 0 or 1")
        object.__setattr__(self, "grid", grid.astype(np.uint8))

    @property
    def height(self) -> int:
        return self.grid.shape[0]

    @property
    def width(self) -> int:
        return self.grid.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.grid.shape

    def __eq__(self, other) -> bool:
        return isinstance(other, Mask) and np.array_equal(self.grid, other.grid)


class FillMode:
    """How hidden pixels are filled when a mask is applied."""


@dataclass(frozen=True)
class UniformNoise(FillMode):
    """Each hidden pixel channel gets an independent draw over all possible
    color values: the full integer range for integer images, the 256 8-bit
    levels scaled to [0, 1] for float images."""


@dataclass(frozen=True)
class ConstantFill(FillMode):
    """Hidden pixels get a constant value, either scalar or per channel."""

    value: float | tuple[float, ...] = 0.0


def _reject_degenerate(grid: np.ndarray, what: str) -> None:
    if not grid.any():
        raise ValueError(f"{what} produced an all-hidden mask")
    if grid.all():
        raise ValueError(f"{what} produced an all-visible mask (no hidden pixels)")


def make_center_rect_mask(img_h: int, img_w: int, hole_h: int, hole_w: int) -> Mask:
    """Mask with a hidden hole_h x hole_w rectangle centered in the grid.

    Offsets are floored when image and hole parity differ, so the hole sits
    one pixel up/left of true center on odd differences.
    """
    if not (0 < hole_h < img_h and 0 < hole_w < img_w):
        raise ValueError(
            f"hole ({hole_h}x{hole_w}) must be strictly inside image ({img_h}x{img_w})"
        )
    top = (img_h - hole_h) // 2
    left = (img_w - hole_w) // 2
    grid = np.ones((img_h, img_w), dtype=np.uint8)
    grid[top : top + hole_h, left : left + hole_w] = 0
    return Mask(grid)


def make_random_rect_mask(
    img_h: int,
    img_w: int,
    crop_box: tuple[float, float, float, float] | None = None,
    rng: np.random.Generator | None = None,
) -> Mask:
    """Outpainting-style mask: a rectangle is visible, everything outside hidden.

    crop_box is (top, left, bottom, right) in normalized [0, 1] coordinates and
    is rescaled to the pixel grid by flooring. Without a crop_box one is
    sampled: side lengths uniform in [0.25, 0.9] of each dimension, position
    uniform over valid placements.
    """
    if crop_box is None:
        if rng is None:
            raise ValueError("rng is required when crop_box is not given")
        vis_h = max(1, int(round(rng.uniform(0.25, 0.9) * img_h)))
        vis_w = max(1, int(round(rng.uniform(0.25, 0.9) * img_w)))
        top = int(rng.integers(0, img_h - vis_h + 1))
        left = int(rng.integers(0, img_w - vis_w + 1))
        bottom, right = top + vis_h, left + vis_w
    else:
        t, l, b, r = crop_box
        if not (0.0 <= t < b <= 1.0 and 0.0 <= l < r <= 1.0):
            raise ValueError(f"crop_box {crop_box} must lie in the unit square with positive area")
        top, left = int(t * img_h), int(l * img_w)
        bottom, right = int(b * img_h), int(r * img_w)
        if bottom <= top or right <= left:
            raise ValueError(f"crop_box {crop_box} rescales to zero pixel area on {img_h}x{img_w}")
    grid = np.zeros((img_h, img_w), dtype=np.uint8)
    grid[top:bottom, left:right] = 1
    _reject_degenerate(grid, "random rect mask")
    return Mask(grid)


def _stamp_disc(hidden: np.ndarray, cy: float, cx: float, radius: float) -> None:
    h, w = hidden.shape
    y0, y1 = max(0, int(cy - radius)), min(h, int(cy + radius) + 1)
    x0, x1 = max(0, int(cx - radius)), min(w, int(cx + radius) + 1)
    if y1 <= y0 or x1 <= x0:
        return
    yy, xx = np.ogrid[y0:y1, x0:x1]
    hidden[y0:y1, x0:x1] |= (yy - cy) ** 2 + (xx - cx) ** 2 <= radius * radius


def make_irregular_mask(
    img_h: int,
    img_w: int,
    stroke_count: int,
    rng: np.random.Generator,
    *,
    max_resamples: int = 100,
) -> Mask:
    """Free-form mask: the hidden region is a union of random-walk brush strokes.

    Each stroke starts at a uniform point and walks a random number of
    segments with random direction increments; segments are stamped with a
    round brush of width uniform in [4, 32] px. The whole mask is resampled
    until the visible fraction lands in [0.3, 0.95].
    """
    if stroke_count < 1:
        raise ValueError(f"stroke_count must be >= 1, got {stroke_count}")
    if img_h < 2 or img_w < 2:
        raise ValueError(f"image too small for a non-degenerate mask: {img_h}x{img_w}")
    scale = min(img_h, img_w)
    for _ in range(max_resamples):
        hidden = np.zeros((img_h, img_w), dtype=bool)
        for _ in range(stroke_count):
            y = rng.uniform(0, img_h)
            x = rng.uniform(0, img_w)
            angle = rng.uniform(0, 2 * np.pi)
            width = rng.uniform(4.0, 32.0)
            for _ in range(int(rng.integers(4, 16))):
                angle += rng.uniform(-np.pi / 2, np.pi / 2)
                length = rng.uniform(scale / 16, scale / 4)
                ny = float(np.clip(y + length * np.sin(angle), 0, img_h - 1))
                nx = float(np.clip(x + length * np.cos(angle), 0, img_w - 1))
                n_stamps = max(2, int(np.hypot(ny - y, nx - x)))
                for t in np.linspace(0.0, 1.0, n_stamps):
                    _stamp_disc(hidden, y + (ny - y) * t, x + (nx - x) * t, width / 2.0)
                y, x = ny, nx
        visible = 1.0 - hidden.mean()
        if 0.3 <= visible <= 0.95 and hidden.any() and not hidden.all():
            return Mask((~hidden).astype(np.uint8))
    raise ValueError(
        f"could not sample an irregular mask with visible fraction in [0.3, 0.95] "
        f"on a {img_h}x{img_w} grid after {max_resamples} attempts"
    )


def make_bspline_panorama_mask(
    img_h: int, img_w: int, rng: np.random.Generator
) -> Mask:
    """Partial-panorama mask for equirectangular images (width = 2 x height).

    A cubic b-spline is drawn through 4 control points -- the image center
    plus 3 uniform points -- and sampled at 256 parameter values. The visible
    region is the union of 60-degree-FoV discs (angular radius 30 degrees,
    i.e. w/12 pixels at the equator) around the samples; the horizontal disc
    extent is stretched by 1/cos(latitude) and wraps around the x axis, both
    per the equirectangular projection.
    """
    if img_w != 2 * img_h:
        raise ValueError(
            f"panorama masks need width = 2*height (equirectangular), got {img_h}x{img_w}"
        )
    pts = np.stack([rng.uniform(0, img_h, size=3), rng.uniform(0, img_w, size=3)], axis=1)
    center = np.array([[img_h / 2.0, img_w / 2.0]])
    ctrl = np.insert(pts, int(rng.integers(0, 4)), center, axis=0)
    spline = make_interp_spline(np.arange(4.0), ctrl, k=3)
    # 256 samples over t in [0, 3] hit every control point exactly (255 = 3*85)
    samples = spline(np.linspace(0.0, 3.0, 256))

    grid = np.zeros((img_h, img_w), dtype=np.uint8)
    radius = (30.0 / 360.0) * img_w
    ys = np.arange(img_h) + 0.5
    coslat = np.cos((ys - img_h / 2.0) / img_h * np.pi)
    xs = np.arange(img_w) + 0.5
    for cy, cx in samples:
        y0 = max(0, int(np.floor(cy - radius - 1)))
        y1 = min(img_h, int(np.ceil(cy + radius + 1)))
        if y1 <= y0:
            continue
        dy = ys[y0:y1] - cy
        dx = np.abs(xs[None, :] - cx)
        dx = np.minimum(dx, img_w - dx)
        inside = (dx * coslat[y0:y1, None]) ** 2 + dy[:, None] ** 2 <= radius * radius
        grid[y0:y1][inside] = 1
    _reject_degenerate(grid, "b-spline panorama mask")
    return Mask(grid)


def invert_mask(m: Mask) -> Mask:
    """Swap visible and hidden regions (an involution)."""
    return Mask(1 - m.grid)


def visible_fraction(m: Mask) -> float:
    """Share of pixels marked visible, exact count over grid size."""
    return int(m.grid.sum()) / m.grid.size


def classify_difficulty(m: Mask) -> DifficultyClass:
    return DifficultyClass.from_fraction(visible_fraction(m))


def _fill_values(fill: FillMode, shape, dtype, rng: np.random.Generator | None):
    if isinstance(fill, ConstantFill):
        return np.broadcast_to(np.asarray(fill.value, dtype=dtype), shape)
    if isinstance(fill, UniformNoise):
        if rng is None:
            raise ValueError("UniformNoise fill requires an rng")
        if np.issubdtype(dtype, np.integer):
            info = np.iinfo(dtype)
            return rng.integers(info.min, info.max, size=shape, endpoint=True).astype(dtype)
        # float images: all 256 8-bit color levels, scaled to [0, 1]
        return (rng.integers(0, 256, size=shape) / 255.0).astype(dtype)
    raise TypeError(f"unknown fill mode: {fill!r}")


def apply_mask(
    image: np.ndarray,
    m: Mask,
    fill: FillMode,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Keep visible pixels bit-exactly, replace hidden pixels per the fill mode.

    image is (H, W) or (H, W, C) and must match the mask spatially.
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3) or image.shape[:2] != m.shape:
        raise ValueError(
            f"image spatial shape {image.shape} does not match mask {m.shape}"
        )
    keep = m.grid.astype(bool)
    if image.ndim == 3:
        keep = keep[:, :, None]
    keep = np.broadcast_to(keep, image.shape)
    out = np.where(keep, image, _fill_values(fill, image.shape, image.dtype, rng))
    return out.astype(image.dtype)


def save_mask(path: str | Path, m: Mask) -> None:
    """Write a mask as an 8-bit single-channel image, 255 = visible."""
    Image.fromarray(m.grid * np.uint8(255), mode="L").save(path)


def load_mask(path: str | Path) -> Mask:
    """Read an 8-bit mask image; values >= 128 count as visible."""
    raw = np.asarray(Image.open(path).convert("L"))
    return Mask((raw >= 128).astype(np.uint8))


def load_mask_directory(root: str | Path) -> list[tuple[str, Mask]]:
    """Load every mask image in a directory, sorted by filename.

    Lets externally published mask corpora stand in for the built-in
    irregular-mask sampler.
    """
    root = Path(root)
    out = []
    for p in sorted(root.iterdir()):
        if p.suffix.lower() in {".png", ".jpg", ".jpeg", ".bmp"}:
            try:
                out.append((p.name, load_mask(p)))
            except Exception as exc:  # noqa: BLE001 - corrupt file, skip
                warnings.warn(f"skipping unreadable mask {p}: {exc}")
    if not out:
        raise ValueError(f"no mask images found under {root}")
    return out
