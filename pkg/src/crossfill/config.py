"""Flat dotted-key run configuration.

Config files are plain text, one `key = value` per line, '#' comments. CLI
flags override file values and the final merged config is echoed verbatim
into the run directory. Unknown keys are rejected, and validation reports
every bad key at once before anything touches the filesystem.
"""

from __future__ import annotations

from pathlib import Path

from .data import Augment, DatasetSpec, MaskFamily, Split, mask_family
from .errors import ConfigError
from .losses import LossBundle, Stage
from .masks import ConstantFill, FillMode, TaskKind, UniformNoise
from .models import CriticConfig, GeneratorConfig
from .schedule import Schedule, Strategy, epoch_schedule_adapter
from .training import TrainerOptions

__all__ = ["RunConfig", "parse_config_text", "format_config"]


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in {"true", "yes", "1"}:
        return True
    if low in {"false", "no", "0"}:
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _parse_size(raw: str) -> tuple[int, int]:
    parts = raw.lower().replace("x", ",").split(",")
    if len(parts) == 1:
        side = int(parts[0])
        return (side, side)
    if len(parts) == 2:
        return (int(parts[0]), int(parts[1]))
    raise ValueError(f"expected SIZE or HxW, got {raw!r}")


def _parse_augment(raw: str) -> frozenset[Augment]:
    raw = raw.strip()
    if not raw or raw.lower() == "none":
        return frozenset()
    return frozenset(Augment(token.strip()) for token in raw.split(","))


# key -> (converter, default). None defaults mean "required when used".
KNOWN_KEYS: dict[str, tuple] = {
    "seed": (int, 0),
    "out_dir": (str, None),
    "data.root": (str, None),
    "data.resize": (_parse_size, (256, 256)),
    "data.augment": (_parse_augment, frozenset()),
    "data.split_seed": (int, 0),
    "data.crop_area_min": (float, 0.875),
    "data.gray_p": (float, 0.1),
    "mask.family": (str, "center-rect"),
    "mask.hole_fraction": (float, 0.5),
    "mask.stroke_count": (int, 4),
    "fill.mode": (str, "noise"),  # noise | constant
    "fill.value": (float, 0.0),
    "schedule.strategy": (Strategy, Strategy.OPPOSITE),
    "schedule.target": (TaskKind, TaskKind.INPAINTING),
    "schedule.n": (int, 40000),
    "schedule.k": (int, 40000),
    "schedule.epochs": (int, 0),  # > 0 switches to the epoch adapter
    "schedule.split": (float, 0.5),
    "model.base_channels": (int, 32),
    "model.downsample_stages": (int, 3),
    "model.dilated_blocks": (int, 4),
    "model.context_norm": (_parse_bool, True),
    "critic.base_channels": (int, 32),
    "critic.downsample_stages": (int, 3),
    "loss.recon_weight": (float, 1.0),
    "loss.adv_weight": (float, 0.001),
    "loss.mrf_weight": (float, 0.05),
    "loss.gp_weight": (float, 10.0),
    "loss.svl_gamma": (float, 0.9),
    "loss.mrf_bandwidth": (float, 0.5),
    "loss.mrf_patch": (int, 1),
    "loss.use_weight_map": (_parse_bool, True),
    "train.batch_size": (int, 8),
    "train.lr": (float, 1e-4),
    "train.beta1": (float, 0.5),
    "train.beta2": (float, 0.9),
    "train.n_critic": (int, 5),
    "train.checkpoint_every": (int, 1000),
    "train.carry_optimizer": (_parse_bool, False),
    "eval.every": (int, 0),
    "eval.count": (int, 8),
    "eval.feature_dim": (int, 16),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Parse `key = value` lines into a raw string map (no validation)."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        out[key.strip()] = value.strip()
    return out


def format_config(raw: dict[str, str]) -> str:
    return "\n".join(f"{k} = {raw[k]}" for k in sorted(raw)) + "\n"


class RunConfig:
    """Validated flat configuration with typed accessors into the run pieces."""

    def __init__(self, raw: dict[str, str]):
        self.raw = dict(raw)
        self.values: dict[str, object] = {}
        errors = []
        for key in sorted(raw):
            if key not in KNOWN_KEYS:
                errors.append(f"unknown key {key!r}")
        for key, (conv, default) in KNOWN_KEYS.items():
            if key in raw:
                try:
                    self.values[key] = conv(raw[key])
                except (ValueError, KeyError) as exc:
                    errors.append(f"bad value for {key!r}: {raw[key]!r} ({exc})")
            else:
                self.values[key] = default
        if errors:
            raise ConfigError("invalid configuration:\n  " + "\n  ".join(errors))

    def __getitem__(self, key: str):
        return self.values[key]

    def require(self, key: str):
        if self.values.get(key) is None:
            raise ConfigError(f"missing required key {key!r}")
        return self.values[key]

    # ---- typed views -----------------------------------------------------

    def dataset_spec(self, split: Split = Split.TRAIN) -> DatasetSpec:
        return DatasetSpec(
            root=Path(str(self.require("data.root"))),
            resize_to=self["data.resize"],
            split=split,
            split_seed=self["data.split_seed"],
            augmentations=self["data.augment"],
            crop_area_min=self["data.crop_area_min"],
            gray_p=self["data.gray_p"],
        )

    def family(self) -> MaskFamily:
        name = str(self["mask.family"])
        if name == "center-rect":
            return mask_family(name, hole_fraction=self["mask.hole_fraction"])
        if name == "irregular":
            return mask_family(name, stroke_count=self["mask.stroke_count"])
        return mask_family(name)

    def fill(self) -> FillMode:
        mode = str(self["fill.mode"])
        if mode == "noise":
            return UniformNoise()
        if mode == "constant":
            return ConstantFill(self["fill.value"])
        raise ConfigError(f"fill.mode must be 'noise' or 'constant', got {mode!r}")

    def loss_bundles(self) -> tuple[LossBundle, LossBundle]:
        pretrain = LossBundle(stage=Stage.PRETRAIN, recon_weight=self["loss.recon_weight"])
        finetune = LossBundle(
            stage=Stage.FINETUNE,
            recon_weight=self["loss.recon_weight"],
            adv_weight=self["loss.adv_weight"],
            mrf_weight=self["loss.mrf_weight"],
        )
        return pretrain, finetune

    def schedule(self, iters_per_epoch: int | None = None) -> Schedule:
        pretrain, finetune = self.loss_bundles()
        epochs = self["schedule.epochs"]
        if epochs:
            if iters_per_epoch is None:
                raise ConfigError("epoch-based schedule needs the dataset scanned first")
            return epoch_schedule_adapter(
                epochs,
                self["schedule.split"],
                iters_per_epoch,
                self["schedule.target"],
                self["schedule.strategy"],
                pretrain_loss=pretrain,
                finetune_loss=finetune,
            )
        return Schedule(
            target_task=self["schedule.target"],
            strategy=self["schedule.strategy"],
            n_pretrain=self["schedule.n"],
            k_finetune=self["schedule.k"],
            pretrain_loss=pretrain,
            finetune_loss=finetune,
        )

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            base_channels=self["model.base_channels"],
            downsample_stages=self["model.downsample_stages"],
            dilated_blocks=self["model.dilated_blocks"],
            use_context_normalization=self["model.context_norm"],
        )

    def critic_config(self) -> CriticConfig:
        return CriticConfig(
            base_channels=self["critic.base_channels"],
            downsample_stages=self["critic.downsample_stages"],
        )

    def trainer_options(self, out_dir: Path) -> TrainerOptions:
        return TrainerOptions(
            out_dir=out_dir,
            seed=self["seed"],
            batch_size=self["train.batch_size"],
            lr=self["train.lr"],
            betas=(self["train.beta1"], self["train.beta2"]),
            n_critic=self["train.n_critic"],
            gp_weight=self["loss.gp_weight"],
            svl_gamma=self["loss.svl_gamma"],
            use_weight_map=self["loss.use_weight_map"],
            mrf_bandwidth=self["loss.mrf_bandwidth"],
            mrf_patch=self["loss.mrf_patch"],
            checkpoint_every=self["train.checkpoint_every"],
            eval_every=self["eval.every"],
            eval_count=self["eval.count"],
            eval_feature_dim=self["eval.feature_dim"],
            carry_optimizer=self["train.carry_optimizer"],
        )
