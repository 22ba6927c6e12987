"""
Mask families tour
==================

Generates one mask from each family, shows how task orientation flips a mask,
classifies difficulty over a large sample of random rectangles, and renders
the distance-decayed reconstruction weight map. Figures land in demo_out/.
"""

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from pathlib import Path

from crossfill.data import mask_family
from crossfill.losses import spatial_weight_map
from crossfill.masks import (
    TaskKind,
    classify_difficulty,
    invert_mask,
    make_bspline_panorama_mask,
    make_center_rect_mask,
    make_irregular_mask,
    make_random_rect_mask,
    visible_fraction,
)

out = Path("demo_out")
out.mkdir(exist_ok=True)
rng = np.random.default_rng(7)

############################################################
# One mask per family (white = visible, black = hidden)

masks = {
    "center-rect (inpaint)": make_center_rect_mask(128, 128, 64, 64),
    "random-rect (outpaint)": make_random_rect_mask(128, 128, rng=rng),
    "irregular strokes": make_irregular_mask(128, 128, 4, rng),
    "b-spline panorama": make_bspline_panorama_mask(128, 256, rng),
}

fig, axes = plt.subplots(1, 4, figsize=(16, 4))
for ax, (name, mask) in zip(axes, masks.items()):
    ax.imshow(mask.grid, cmap="gray", vmin=0, vmax=1)
    ax.set_title(f"{name}\nvisible {visible_fraction(mask):.2f}, {classify_difficulty(mask).value}")
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out / "mask_families.png", dpi=120)
print("one sample per family ->", out / "mask_families.png")

############################################################
# The same family serves both tasks: invert swaps hole and surround

family = mask_family("center-rect")
inpaint = family.sample_for_task(TaskKind.INPAINTING, 128, 128, rng)
outpaint = family.sample_for_task(TaskKind.OUTPAINTING, 128, 128, rng)
assert invert_mask(inpaint) == outpaint

fig, axes = plt.subplots(1, 2, figsize=(8, 4))
for ax, (name, mask) in zip(axes, [("inpainting mask", inpaint), ("outpainting mask", outpaint)]):
    ax.imshow(mask.grid, cmap="gray", vmin=0, vmax=1)
    ax.set_title(name)
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(out / "mask_orientation.png", dpi=120)
print("task orientation ->", out / "mask_orientation.png")

############################################################
# Difficulty spread of the random-rectangle sampler

fractions = [
    visible_fraction(make_random_rect_mask(64, 64, rng=np.random.default_rng(seed)))
    for seed in range(2000)
]
fig, ax = plt.subplots(figsize=(6, 4))
ax.hist(fractions, bins=40, color="steelblue")
for threshold, label in [(0.2, "extreme | difficult"), (0.4, "difficult | easy")]:
    ax.axvline(threshold, color="crimson", linestyle="--")
    ax.text(threshold, ax.get_ylim()[1] * 0.9, f" {label}", color="crimson")
ax.set_xlabel("visible fraction")
ax.set_ylabel("count")
ax.set_title("random-rect sampler: visible-area distribution (2000 seeds)")
fig.tight_layout()
fig.savefig(out / "difficulty_histogram.png", dpi=120)
print("difficulty histogram ->", out / "difficulty_histogram.png")

############################################################
# Reconstruction weights decay away from the visible boundary

weights = spatial_weight_map(make_center_rect_mask(64, 64, 40, 40), decay=0.9)
fig, ax = plt.subplots(figsize=(5, 4))
im = ax.imshow(weights, cmap="magma")
fig.colorbar(im, ax=ax, label="weight")
ax.set_title("spatially-variant reconstruction weights (decay 0.9)")
fig.tight_layout()
fig.savefig(out / "weight_map.png", dpi=120)
print("weight map ->", out / "weight_map.png")
