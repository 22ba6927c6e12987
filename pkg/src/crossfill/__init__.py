"""crossfill: mask-fill (inpainting/outpainting) training with opposite-task
pretraining, mask geometry tools, and PSNR/SSIM/FID evaluation."""

__version__ = "0.1.0"

from .masks import (  # noqa: F401
    ConstantFill,
    DifficultyClass,
    FillMode,
    Mask,
    TaskKind,
    UniformNoise,
    apply_mask,
    classify_difficulty,
    invert_mask,
    load_mask,
    make_bspline_panorama_mask,
    make_center_rect_mask,
    make_irregular_mask,
    make_random_rect_mask,
    save_mask,
    visible_fraction,
)
from .losses import LossBundle, Stage  # noqa: F401
from .schedule import Schedule, Strategy  # noqa: F401
