"""Image ingestion: directory scanning, deterministic splits, augmentation,
and assembly of (image, mask, masked-image) batches for a task.

Determinism contract: every random choice routes through the caller-supplied
numpy Generator, so a (seed, iteration)-derived generator fully determines a
batch regardless of who loads it.
"""

from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import CrossfillError, DatasetEmptyError
from .masks import (
    FillMode,
    Mask,
    TaskKind,
    apply_mask,
    invert_mask,
    make_bspline_panorama_mask,
    make_center_rect_mask,
    make_irregular_mask,
    make_random_rect_mask,
)

__all__ = [
    "Split",
    "Augment",
    "DatasetSpec",
    "Manifest",
    "Batch",
    "MaskFamily",
    "mask_family",
    "MASK_FAMILY_NAMES",
    "scan_dataset",
    "load_and_augment",
    "make_batch",
    "ItemSkipped",
]

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp"}
TEST_PERCENT = 10  # 90/10 split when the dataset ships no official split files


class Split(Enum):
    TRAIN = "train"
    TEST = "test"


class Augment(Enum):
    CROP = "crop"
    FLIP = "flip"
    GRAYSCALE = "gray"


class ItemSkipped(CrossfillError):
    """A manifest entry failed to decode at load time."""


@dataclass(frozen=True)
class DatasetSpec:
    root: Path
    resize_to: tuple[int, int] = (256, 256)
    split: Split = Split.TRAIN
    split_seed: int = 0
    augmentations: frozenset[Augment] = frozenset()
    crop_area_min: float = 0.875
    gray_p: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "root", Path(self.root))
        h, w = self.resize_to
        if h <= 0 or w <= 0:
            raise ValueError(f"resize_to must be positive, got {self.resize_to}")


@dataclass(frozen=True)
class Manifest:
    root: Path
    split: Split
    entries: tuple[str, ...]  # filenames relative to root, lexicographic order
    skipped: int  # undecodable files dropped during the scan

    def paths(self) -> list[Path]:
        return [self.root / name for name in self.entries]


def _hash_is_test(name: str, split_seed: int) -> bool:
    digest = hashlib.sha256(f"{split_seed}:{name}".encode()).digest()
    return int.from_bytes(digest[:8], "big") % 100 < TEST_PERCENT


def _read_split_file(path: Path) -> set[str]:
    return {line.strip() for line in path.read_text().splitlines() if line.strip()}


def scan_dataset(spec: DatasetSpec) -> Manifest:
    """Deterministic sorted manifest of decodable images in spec.split.

    Official split files (train.txt / test.txt, one filename per line) win;
    otherwise files are assigned by hashing filename with the split seed.
    Undecodable files are skipped with a warning and counted.
    """
    root = spec.root
    if not root.is_dir():
        raise DatasetEmptyError(f"dataset root {root} is not a directory")
    names = sorted(
        p.name for p in root.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    decodable, skipped = [], 0
    for name in names:
        try:
            with Image.open(root / name) as img:
                img.verify()
            decodable.append(name)
        except (UnidentifiedImageError, OSError, SyntaxError) as exc:
            warnings.warn(f"skipping undecodable {name}: {exc}")
            skipped += 1
    if not decodable:
        raise DatasetEmptyError(f"no decodable images under {root}")

    train_file, test_file = root / "train.txt", root / "test.txt"
    if train_file.exists() or test_file.exists():
        wanted = _read_split_file(train_file if spec.split is Split.TRAIN else test_file)
        chosen = [n for n in decodable if n in wanted]
    else:
        want_test = spec.split is Split.TEST
        chosen = [n for n in decodable if _hash_is_test(n, spec.split_seed) == want_test]
    return Manifest(root=root, split=spec.split, entries=tuple(chosen), skipped=skipped)


def load_and_augment(
    entry: str | Path, spec: DatasetSpec, rng: np.random.Generator
) -> np.ndarray:
    """Load one image as float32 (H, W, 3) in [0, 1], with optional random
    crop (87.5-100% area, before the resize), horizontal flip (p = 0.5) and
    grayscale conversion (p = spec.gray_p, luminance replicated)."""
    path = Path(entry)
    if not path.is_absolute():
        path = spec.root / path
    try:
        img = Image.open(path).convert("RGB")
    except (UnidentifiedImageError, OSError) as exc:
        raise ItemSkipped(f"cannot decode {path}: {exc}") from exc

    if Augment.CROP in spec.augmentations:
        side = float(np.sqrt(rng.uniform(spec.crop_area_min, 1.0)))
        cw = max(1, int(round(img.width * side)))
        ch = max(1, int(round(img.height * side)))
        left = int(rng.integers(0, img.width - cw + 1))
        top = int(rng.integers(0, img.height - ch + 1))
        img = img.crop((left, top, left + cw, top + ch))

    h, w = spec.resize_to
    if img.size != (w, h):
        img = img.resize((w, h), Image.BILINEAR)

    arr = np.asarray(img, dtype=np.float32) / 255.0
    if Augment.FLIP in spec.augmentations and rng.random() < 0.5:
        arr = arr[:, ::-1].copy()
    if Augment.GRAYSCALE in spec.augmentations and rng.random() < spec.gray_p:
        lum = 0.299 * arr[:, :, 0] + 0.587 * arr[:, :, 1] + 0.114 * arr[:, :, 2]
        arr = np.repeat(lum[:, :, None], 3, axis=2)
    return arr


@dataclass(frozen=True)
class MaskFamily:
    """A named mask sampler plus the task its raw output is oriented for.

    sample_for_task inverts the raw mask when the requested task is the
    opposite of the native one (e.g. a center hole becomes a visible center
    block for outpainting).
    """

    name: str
    native_task: TaskKind
    sampler: Callable[[int, int, np.random.Generator], Mask] = field(repr=False)

    def sample_for_task(
        self, task: TaskKind, img_h: int, img_w: int, rng: np.random.Generator
    ) -> Mask:
        raw = self.sampler(img_h, img_w, rng)
        return raw if task is self.native_task else invert_mask(raw)


MASK_FAMILY_NAMES = ("center-rect", "random-rect", "irregular", "bspline-panorama")


def mask_family(name: str, **params) -> MaskFamily:
    """Build a mask family by name.

    center-rect takes hole_fraction (default 0.5 per side); irregular takes
    stroke_count (default 4); random-rect and bspline-panorama take none.
    """
    if name == "center-rect":
        frac = params.pop("hole_fraction", 0.5)
        sampler = lambda h, w, rng: make_center_rect_mask(  # noqa: E731
            h, w, max(1, int(round(h * frac))), max(1, int(round(w * frac)))
        )
        native = TaskKind.INPAINTING
    elif name == "random-rect":
        sampler = lambda h, w, rng: make_random_rect_mask(h, w, rng=rng)  # noqa: E731
        native = TaskKind.OUTPAINTING
    elif name == "irregular":
        strokes = params.pop("stroke_count", 4)
        sampler = lambda h, w, rng: make_irregular_mask(h, w, strokes, rng)  # noqa: E731
        native = TaskKind.INPAINTING
    elif name == "bspline-panorama":
        sampler = make_bspline_panorama_mask
        native = TaskKind.OUTPAINTING
    else:
        raise ValueError(f"unknown mask family {name!r}; choose from {MASK_FAMILY_NAMES}")
    if params:
        raise ValueError(f"unused mask family parameters: {sorted(params)}")
    return MaskFamily(name=name, native_task=native, sampler=sampler)


@dataclass
class Batch:
    images: np.ndarray  # (B, H, W, C) float32 in [0, 1]
    masks: np.ndarray  # (B, H, W) float32 in {0, 1}
    masked_images: np.ndarray  # (B, H, W, C) float32
    task: TaskKind

    def __post_init__(self):
        if not (
            np.isfinite(self.images).all()
            and np.isfinite(self.masked_images).all()
            and np.isfinite(self.masks).all()
        ):
            raise ValueError("batch contains non-finite entries")


def make_batch(
    entries: list[str | Path],
    spec: DatasetSpec,
    task: TaskKind,
    family: MaskFamily,
    fill: FillMode,
    rng: np.random.Generator,
) -> Batch:
    """Assemble a batch of (image, mask, masked-image) triples for a task."""
    if not entries:
        raise ValueError("make_batch needs at least one entry")
    h, w = spec.resize_to
    images, masks, masked = [], [], []
    for entry in entries:
        img = load_and_augment(entry, spec, rng)
        mask = family.sample_for_task(task, h, w, rng)
        images.append(img)
        masks.append(mask.grid.astype(np.float32))
        masked.append(apply_mask(img, mask, fill, rng))
    return Batch(
        images=np.stack(images),
        masks=np.stack(masks),
        masked_images=np.stack(masked),
        task=task,
    )
