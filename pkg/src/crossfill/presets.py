"""Named configuration presets for the documented experiment setups, plus
desk-scale tiny variants for smoke runs. Values are raw config strings and go
through normal validation/overriding."""

from __future__ import annotations

from .errors import ConfigError

PRESETS: dict[str, dict[str, str]] = {
    # 256x256 bird inpainting, 128x128 center hole, 40k + 40k at batch 8
    "cub-inpaint-40k": {
        "schedule.target": "inpainting",
        "schedule.strategy": "opposite",
        "schedule.n": "40000",
        "schedule.k": "40000",
        "mask.family": "center-rect",
        "mask.hole_fraction": "0.5",
        "data.resize": "256x256",
        "data.augment": "crop,flip,gray",
        "train.batch_size": "8",
    },
    # 256x256 face outpainting from a 128x128 visible block, 45k + 45k at batch 8
    "celeba-outpaint-45k": {
        "schedule.target": "outpainting",
        "schedule.strategy": "opposite",
        "schedule.n": "45000",
        "schedule.k": "45000",
        "mask.family": "center-rect",
        "mask.hole_fraction": "0.5",
        "data.resize": "256x256",
        "data.augment": "crop,flip,gray",
        "train.batch_size": "8",
    },
    # 128x256 partial panoramas from b-spline trails, 45k + 45k at batch 4
    "panorama-45k": {
        "schedule.target": "outpainting",
        "schedule.strategy": "opposite",
        "schedule.n": "45000",
        "schedule.k": "45000",
        "mask.family": "bspline-panorama",
        "data.resize": "128x256",
        "data.augment": "crop,flip,gray",
        "train.batch_size": "4",
    },
    # irregular-mask inpainting on an epoch schedule: 15 epochs on the inverse
    # mask, 15 epochs fine-tune
    "irregular-30ep": {
        "schedule.target": "inpainting",
        "schedule.strategy": "opposite",
        "schedule.epochs": "30",
        "schedule.split": "0.5",
        "mask.family": "irregular",
        "data.resize": "256x256",
        "data.augment": "crop,flip",
        "train.batch_size": "8",
    },
    # desk-scale smoke setups
    "tiny-inpaint": {
        "schedule.target": "inpainting",
        "schedule.strategy": "opposite",
        "schedule.n": "30",
        "schedule.k": "30",
        "mask.family": "center-rect",
        "data.resize": "64x64",
        "model.base_channels": "8",
        "model.downsample_stages": "2",
        "model.dilated_blocks": "1",
        "critic.base_channels": "8",
        "critic.downsample_stages": "2",
        "train.batch_size": "2",
        "train.n_critic": "2",
        "train.checkpoint_every": "10",
    },
    "tiny-outpaint": {
        "schedule.target": "outpainting",
        "schedule.strategy": "opposite",
        "schedule.n": "30",
        "schedule.k": "30",
        "mask.family": "random-rect",
        "data.resize": "64x64",
        "model.base_channels": "8",
        "model.downsample_stages": "2",
        "model.dilated_blocks": "1",
        "critic.base_channels": "8",
        "critic.downsample_stages": "2",
        "train.batch_size": "2",
        "train.n_critic": "2",
        "train.checkpoint_every": "10",
    },
}


def preset(name: str) -> dict[str, str]:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}")
    return dict(PRESETS[name])
