"""Training loop for the two-stage schedule: stage A on the scheduled task,
fine-tuning on the target task, with atomic checkpoints and bit-exact resume.

Every stochastic draw is derived from (seed, purpose, iteration), so restoring
a checkpoint and continuing reproduces an uninterrupted run exactly: nothing
depends on how many iterations this process has already executed.
"""

from __future__ import annotations

import csv
import json
import os
import shutil
import tempfile
import zlib
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .data import Batch, DatasetSpec, MaskFamily, Split, load_and_augment, make_batch, scan_dataset
from .errors import CheckpointMismatchError, ConfigError, TrainingAbort
from .losses import (
    FrozenConvFeatures,
    Stage,
    critic_losses,
    idmrf_loss,
    reconstruction_loss,
    spatial_weight_map,
    total_loss,
)
from .masks import FillMode, Mask, UniformNoise, apply_mask
from .metrics import RandomConvFeatures, fid as compute_fid, psnr, ssim
from .models import Critic, CriticConfig, Generator, GeneratorConfig, composite_output
from .schedule import Schedule, loss_bundle_for_iteration, task_for_iteration

__all__ = [
    "TrainerOptions",
    "TrainState",
    "build_models",
    "run_training",
    "save_checkpoint",
    "load_checkpoint",
    "rng_for",
]

METRICS_FIELDS = [
    "iteration",
    "stage",
    "task",
    "recon",
    "adv",
    "mrf",
    "critic",
    "total",
    "psnr",
    "ssim",
    "fid",
]


@dataclass(frozen=True)
class TrainerOptions:
    out_dir: Path
    seed: int = 0
    batch_size: int = 8
    lr: float = 1e-4
    betas: tuple[float, float] = (0.5, 0.9)
    n_critic: int = 5  # critic steps per generator step while adversarial is active
    gp_weight: float = 10.0
    svl_gamma: float = 0.9
    use_weight_map: bool = True  # spatially-variant reconstruction in both stages
    mrf_bandwidth: float = 0.5
    mrf_patch: int = 1
    checkpoint_every: int = 1000
    eval_every: int = 0  # 0 disables periodic eval
    eval_count: int = 8
    eval_feature_dim: int = 16
    carry_optimizer: bool = False  # keep optimizer state across the stage boundary

    def __post_init__(self):
        object.__setattr__(self, "out_dir", Path(self.out_dir))
        if self.batch_size < 1 or self.checkpoint_every < 1:
            raise ConfigError("batch_size and checkpoint_every must be positive")
        if self.n_critic < 0:
            raise ConfigError("n_critic must be >= 0")


@dataclass
class TrainState:
    """Everything needed to continue a run from iteration `iteration`."""

    iteration: int
    stage: Stage
    seed: int
    generator: Generator
    critic: Critic
    gen_opt: torch.optim.Optimizer
    critic_opt: torch.optim.Optimizer


def rng_for(seed: int, purpose: str, index: int) -> np.random.Generator:
    """Independent, reproducible stream keyed by (seed, purpose, index)."""
    return np.random.default_rng(
        np.random.SeedSequence([seed, zlib.crc32(purpose.encode()), index])
    )


def build_models(
    gen_config: GeneratorConfig, critic_config: CriticConfig, seed: int
) -> tuple[Generator, Critic]:
    """Deterministically initialized generator/critic pair."""
    torch.manual_seed(seed)
    return Generator(gen_config), Critic(critic_config)


def _make_optimizers(state: TrainState, opts: TrainerOptions) -> None:
    state.gen_opt = torch.optim.Adam(
        state.generator.parameters(), lr=opts.lr, betas=opts.betas
    )
    state.critic_opt = torch.optim.Adam(
        state.critic.parameters(), lr=opts.lr, betas=opts.betas
    )


# ---------------------------------------------------------------------------
# checkpoints: directory with a manifest plus a weight blob, written
# atomically (temp dir + rename)
# ---------------------------------------------------------------------------

def save_checkpoint(path: str | Path, state: TrainState, config_echo: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(dir=path.parent, prefix=".ckpt-tmp-"))
    manifest = {
        "version": __version__,
        "iteration": state.iteration,
        "stage": state.stage.value,
        "seed": state.seed,
        "generator_config": asdict(state.generator.config),
        "critic_config": asdict(state.critic.config),
        "config": config_echo,
    }
    (tmp / "manifest.json").write_text(json.dumps(manifest, indent=2))
    torch.save(
        {
            "generator": state.generator.state_dict(),
            "critic": state.critic.state_dict(),
            "gen_opt": state.gen_opt.state_dict(),
            "critic_opt": state.critic_opt.state_dict(),
            "torch_rng": torch.get_rng_state(),
        },
        tmp / "state.pt",
    )
    if path.exists():
        old = path.with_suffix(".old")
        shutil.rmtree(old, ignore_errors=True)
        os.replace(path, old)
        os.replace(tmp, path)
        shutil.rmtree(old, ignore_errors=True)
    else:
        os.replace(tmp, path)
    return path


def load_checkpoint(
    path: str | Path,
    opts: TrainerOptions,
    gen_config: GeneratorConfig | None = None,
    critic_config: CriticConfig | None = None,
) -> TrainState:
    """Restore a TrainState from a checkpoint directory.

    Model configs default to the ones recorded in the checkpoint manifest;
    passing different ones raises a mismatch error.
    """
    path = Path(path)
    manifest = json.loads((path / "manifest.json").read_text())
    stored_gen = GeneratorConfig(**manifest["generator_config"])
    stored_critic = CriticConfig(**manifest["critic_config"])
    if gen_config is not None and gen_config != stored_gen:
        raise CheckpointMismatchError(
            f"checkpoint has generator config {stored_gen}, requested {gen_config}"
        )
    if critic_config is not None and critic_config != stored_critic:
        raise CheckpointMismatchError(
            f"checkpoint has critic config {stored_critic}, requested {critic_config}"
        )
    blobs = torch.load(path / "state.pt", weights_only=False)
    generator, critic = build_models(stored_gen, stored_critic, manifest["seed"])
    try:
        generator.load_state_dict(blobs["generator"])
        critic.load_state_dict(blobs["critic"])
    except RuntimeError as exc:
        raise CheckpointMismatchError(
            f"checkpoint {path} does not match the requested model configs: {exc}"
        ) from exc
    state = TrainState(
        iteration=manifest["iteration"],
        stage=Stage(manifest["stage"]),
        seed=manifest["seed"],
        generator=generator,
        critic=critic,
        gen_opt=None,  # type: ignore[arg-type]
        critic_opt=None,  # type: ignore[arg-type]
    )
    _make_optimizers(state, opts)
    state.gen_opt.load_state_dict(blobs["gen_opt"])
    state.critic_opt.load_state_dict(blobs["critic_opt"])
    torch.set_rng_state(blobs["torch_rng"])
    return state


# ---------------------------------------------------------------------------
# batch selection: epoch permutations derived from the seed, so the entry
# stream is a pure function of the iteration index ("cycle with reshuffle")
# ---------------------------------------------------------------------------

class _EntryCycler:
    def __init__(self, entries: tuple[str, ...], seed: int):
        self.entries = entries
        self.seed = seed
        self._perm_cache: dict[int, np.ndarray] = {}

    def _perm(self, epoch: int) -> np.ndarray:
        if epoch not in self._perm_cache:
            if len(self._perm_cache) > 4:
                self._perm_cache.clear()
            self._perm_cache[epoch] = rng_for(self.seed, "order", epoch).permutation(
                len(self.entries)
            )
        return self._perm_cache[epoch]

    def batch(self, iteration: int, batch_size: int) -> list[str]:
        n = len(self.entries)
        out = []
        for j in range(batch_size):
            pos = iteration * batch_size + j
            out.append(self.entries[int(self._perm(pos // n)[pos % n])])
        return out


def _to_tensors(batch: Batch) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    images = torch.from_numpy(batch.images).permute(0, 3, 1, 2).contiguous()
    masked = torch.from_numpy(batch.masked_images).permute(0, 3, 1, 2).contiguous()
    masks = torch.from_numpy(batch.masks).unsqueeze(1)
    return images, masked, masks


def _weight_maps(batch: Batch, gamma: float, use_map: bool) -> torch.Tensor:
    if not use_map:
        # plain L1 everywhere: unit weight on hidden pixels
        return torch.from_numpy((batch.masks == 0).astype(np.float64)).float()
    maps = [
        spatial_weight_map(Mask(m.astype(np.uint8)), gamma) for m in batch.masks
    ]
    return torch.from_numpy(np.stack(maps)).float()


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _evaluate(
    state: TrainState,
    eval_items: list[tuple[np.ndarray, Mask]],
    extractor,
) -> tuple[float, float, float | None]:
    psnrs, ssims, reals, outs = [], [], [], []
    state.generator.eval()
    with torch.no_grad():
        for img, mask in eval_items:
            masked = apply_mask(
                img, mask, UniformNoise(), rng_for(state.seed, "eval-fill", 0)
            )
            inp = torch.from_numpy(masked).permute(2, 0, 1).unsqueeze(0)
            m = torch.from_numpy(mask.grid.astype(np.float32))[None, None]
            pred = state.generator(inp, m)[0].permute(1, 2, 0).numpy()
            comp = composite_output(pred, img, mask)
            psnrs.append(psnr(comp, img))
            ssims.append(ssim(comp, img))
            reals.append(img)
            outs.append(comp)
    state.generator.train()
    fid_val = None
    if len(reals) >= 2:
        fid_val = compute_fid(np.stack(reals), np.stack(outs), extractor)
    finite = [p for p in psnrs if np.isfinite(p)]
    mean_psnr = float(np.mean(finite)) if finite else float("inf")
    return mean_psnr, float(np.mean(ssims)), fid_val


def run_training(
    sched: Schedule,
    data_spec: DatasetSpec,
    family: MaskFamily,
    state: TrainState,
    opts: TrainerOptions,
    fill: FillMode | None = None,
    config_echo: dict | None = None,
) -> tuple[TrainState, list[dict]]:
    """Execute the schedule from state.iteration to N+K.

    Per iteration: sample a batch for the scheduled task, run the critic
    updates when the adversarial term is active, update the generator on the
    weighted total loss. Checkpoints land every checkpoint_every iterations,
    at the stage boundary, and at the end. Returns the final state plus the
    metrics rows that were appended to logs/metrics.csv.
    """
    fill = fill if fill is not None else UniformNoise()
    config_echo = config_echo or {}
    out_dir = opts.out_dir
    (out_dir / "checkpoints").mkdir(parents=True, exist_ok=True)
    (out_dir / "logs").mkdir(parents=True, exist_ok=True)

    manifest = scan_dataset(data_spec)
    cycler = _EntryCycler(manifest.entries, state.seed)
    feature_net = FrozenConvFeatures(seed=state.seed)
    extractor = RandomConvFeatures(dim=opts.eval_feature_dim, seed=state.seed)

    eval_items: list[tuple[np.ndarray, Mask]] = []
    if opts.eval_every > 0:
        eval_spec = DatasetSpec(
            root=data_spec.root,
            resize_to=data_spec.resize_to,
            split=Split.TEST,
            split_seed=data_spec.split_seed,
        )
        try:
            eval_manifest = scan_dataset(eval_spec)
        except Exception:
            eval_manifest = manifest
        if not eval_manifest.entries:
            eval_manifest = manifest
        no_aug = DatasetSpec(
            root=data_spec.root, resize_to=data_spec.resize_to, split=data_spec.split
        )
        h, w = data_spec.resize_to
        for idx, name in enumerate(eval_manifest.entries[: opts.eval_count]):
            img = load_and_augment(name, no_aug, rng_for(state.seed, "eval-img", idx))
            mask = family.sample_for_task(
                sched.target_task, h, w, rng_for(state.seed, "eval-mask", idx)
            )
            eval_items.append((img, mask))

    run_manifest = {
        "version": __version__,
        "seed": state.seed,
        "strategy": sched.strategy.value,
        "target_task": sched.target_task.value,
        "stage_boundaries": {
            "pretrain": [0, sched.n_pretrain],
            "finetune": [sched.n_pretrain, sched.total_iterations],
        },
        "pretrain_task": sched.pretrain_task.value,
        "extractor_id": extractor.identity,
        "config": config_echo,
        "status": "running",
    }
    (out_dir / "manifest.json").write_text(json.dumps(run_manifest, indent=2))

    csv_path = out_dir / "logs" / "metrics.csv"
    new_log = not csv_path.exists()
    log_file = csv_path.open("a", newline="")
    writer = csv.DictWriter(log_file, fieldnames=METRICS_FIELDS)
    if new_log:
        writer.writeheader()

    last_checkpoint: str | None = None
    rows: list[dict] = []

    def _checkpoint() -> None:
        nonlocal last_checkpoint
        ckpt = out_dir / "checkpoints" / f"ckpt_{state.iteration:07d}"
        save_checkpoint(ckpt, state, config_echo)
        last_checkpoint = str(ckpt)

    state.generator.train()
    state.critic.train()
    try:
        while state.iteration < sched.total_iterations:
            i = state.iteration
            if i == sched.n_pretrain and not opts.carry_optimizer and i > 0:
                # fresh optimizer for the fine-tuning stage
                _make_optimizers(state, opts)
            state.stage = Stage.PRETRAIN if i < sched.n_pretrain else Stage.FINETUNE
            task = task_for_iteration(sched, i)
            bundle = loss_bundle_for_iteration(sched, i)

            entries = cycler.batch(i, opts.batch_size)
            batch = make_batch(
                entries, data_spec, task, family, fill, rng_for(state.seed, "data", i)
            )
            images, masked, masks = _to_tensors(batch)

            adv_active = bundle.adv_weight > 0
            critic_val = ""
            if adv_active and opts.n_critic > 0:
                gp_rng = rng_for(state.seed, "gp", i)
                with torch.no_grad():
                    fake = state.generator(masked, masks)
                    fake_comp = composite_output(fake, images, masks)
                for _ in range(opts.n_critic):
                    critic_loss, _ = critic_losses(
                        state.critic, images, fake_comp, opts.gp_weight, gp_rng
                    )
                    state.critic_opt.zero_grad()
                    critic_loss.backward()
                    state.critic_opt.step()
                critic_val = float(critic_loss.item())

            fake = state.generator(masked, masks)
            fake_comp = composite_output(fake, images, masks)
            wmaps = _weight_maps(batch, opts.svl_gamma, opts.use_weight_map)
            recon = reconstruction_loss(fake, images, wmaps)
            adv = mrf = None
            if adv_active:
                adv = -state.critic(fake_comp).mean()
            if bundle.mrf_weight > 0:
                mrf = idmrf_loss(
                    feature_net(fake_comp),
                    feature_net(images),
                    bandwidth=opts.mrf_bandwidth,
                    patch=opts.mrf_patch,
                )
            loss = total_loss(bundle, recon, adv, mrf)
            if not torch.isfinite(loss):
                raise TrainingAbort(
                    f"non-finite total loss at iteration {i}", last_checkpoint
                )
            state.gen_opt.zero_grad()
            loss.backward()
            state.gen_opt.step()

            state.iteration = i + 1
            state.stage = (
                Stage.PRETRAIN if state.iteration < sched.n_pretrain else Stage.FINETUNE
            )

            row = {
                "iteration": i,
                "stage": bundle.stage.value,
                "task": task.value,
                "recon": float(recon.item()),
                "adv": float(adv.item()) if adv is not None else "",
                "mrf": float(mrf.item()) if mrf is not None else "",
                "critic": critic_val,
                "total": float(loss.item()),
                "psnr": "",
                "ssim": "",
                "fid": "",
            }
            if eval_items and opts.eval_every > 0 and state.iteration % opts.eval_every == 0:
                p, s, f = _evaluate(state, eval_items, extractor)
                row["psnr"], row["ssim"] = p, s
                row["fid"] = f if f is not None else ""
            rows.append(row)
            writer.writerow(row)
            log_file.flush()

            at_boundary = state.iteration == sched.n_pretrain
            if state.iteration % opts.checkpoint_every == 0 or at_boundary:
                _checkpoint()
    finally:
        log_file.close()

    _checkpoint()
    run_manifest["status"] = "completed"
    run_manifest["final_iteration"] = state.iteration
    (out_dir / "manifest.json").write_text(json.dumps(run_manifest, indent=2))
    return state, rows
