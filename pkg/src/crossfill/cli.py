"""Command-line entry point: gen-masks, train, evaluate, report.

Exit codes: 0 success, 2 usage/config error, 3 runtime abort, 4 I/O error.
The CROSSFILL_OUT_ROOT environment variable sets the default output root for
run directories (default ./runs).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .config import KNOWN_KEYS, RunConfig, format_config, parse_config_text
from .data import MASK_FAMILY_NAMES, Split, load_and_augment, mask_family
from .errors import ConfigError, CrossfillError, TrainingAbort
from .masks import (
    UniformNoise,
    classify_difficulty,
    load_mask,
    save_mask,
    visible_fraction,
)
from .metrics import RandomConvFeatures, bucketed_report
from .presets import preset
from .training import TrainState, TrainerOptions, build_models, load_checkpoint, rng_for, run_training

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _out_root() -> Path:
    return Path(os.environ.get("CROSSFILL_OUT_ROOT", "runs"))


# ---------------------------------------------------------------------------
# gen-masks
# ---------------------------------------------------------------------------

def cmd_gen_masks(args) -> int:
    h, w = args.size
    params = {}
    if args.family == "center-rect":
        params["hole_fraction"] = args.hole_fraction
    elif args.family == "irregular":
        params["stroke_count"] = args.stroke_count
    family = mask_family(args.family, **params)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    records = []
    for i in range(args.count):
        mask = family.sampler(h, w, rng_for(args.seed, "gen-masks", i))
        name = f"mask_{i:05d}.png"
        save_mask(out / name, mask)
        records.append(
            {
                "filename": name,
                "family": args.family,
                "seed": args.seed,
                "index": i,
                "visible_fraction": visible_fraction(mask),
                "difficulty": classify_difficulty(mask).value,
            }
        )
    (out / "manifest.json").write_text(json.dumps(records, indent=2, sort_keys=True))
    print(f"wrote {args.count} {args.family} masks to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------

def _merged_config(args) -> RunConfig:
    raw: dict[str, str] = {}
    if args.preset:
        raw.update(preset(args.preset))
    if args.config:
        raw.update(parse_config_text(Path(args.config).read_text()))
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        raw[key.strip()] = value.strip()
    return RunConfig(raw)


def _echo_value(key: str, value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, frozenset):
        return ",".join(sorted(v.value for v in value)) or "none"
    if isinstance(value, tuple):
        return "x".join(str(v) for v in value)
    if hasattr(value, "value"):  # enums
        return str(value.value)
    return str(value)


def _echo_config(cfg: RunConfig) -> str:
    effective = {
        key: _echo_value(key, cfg.values[key])
        for key in KNOWN_KEYS
        if cfg.values[key] is not None
    }
    return format_config(effective)


def cmd_train(args) -> int:
    cfg = _merged_config(args)
    data_spec = cfg.dataset_spec(Split.TRAIN)

    if args.out:
        out_dir = Path(args.out)
    elif cfg.values.get("out_dir"):
        out_dir = Path(str(cfg.values["out_dir"]))
    else:
        stem = args.preset or (Path(args.config).stem if args.config else "run")
        out_dir = _out_root() / stem
    out_dir.mkdir(parents=True, exist_ok=True)

    opts = cfg.trainer_options(out_dir)
    from .data import scan_dataset

    manifest = scan_dataset(data_spec)
    iters_per_epoch = max(1, len(manifest.entries) // opts.batch_size)
    sched = cfg.schedule(iters_per_epoch=iters_per_epoch)

    echo_text = _echo_config(cfg)
    (out_dir / "config.echo").write_text(echo_text)
    echo_dict = parse_config_text(echo_text)

    if args.resume:
        state = load_checkpoint(Path(args.resume), opts)
    else:
        generator, critic = build_models(
            cfg.generator_config(), cfg.critic_config(), opts.seed
        )
        state = TrainState(
            iteration=0,
            stage=sched.pretrain_loss.stage,
            seed=opts.seed,
            generator=generator,
            critic=critic,
            gen_opt=None,  # type: ignore[arg-type]
            critic_opt=None,  # type: ignore[arg-type]
        )
        from .training import _make_optimizers

        _make_optimizers(state, opts)

    state, _ = run_training(
        sched, data_spec, cfg.family(), state, opts, fill=cfg.fill(), config_echo=echo_dict
    )
    print(f"run complete: {out_dir} (iteration {state.iteration})")
    return EXIT_OK


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------

def _load_mask_corpus(mask_dir: Path):
    manifest_path = mask_dir / "manifest.json"
    if manifest_path.exists():
        records = json.loads(manifest_path.read_text())
        return [(rec["filename"], load_mask(mask_dir / rec["filename"])) for rec in records]
    from .masks import load_mask_directory

    return load_mask_directory(mask_dir)


def cmd_evaluate(args) -> int:
    import torch

    from .data import DatasetSpec, scan_dataset
    from .models import composite_output

    opts = TrainerOptions(out_dir=Path(args.checkpoint).parent, seed=args.seed)
    state = load_checkpoint(Path(args.checkpoint), opts)
    ckpt_cfg = json.loads((Path(args.checkpoint) / "manifest.json").read_text())
    masks = _load_mask_corpus(Path(args.masks))

    resize = args.size
    if resize is None:
        echoed = ckpt_cfg.get("config", {}).get("data.resize")
        # fall back to the mask corpus geometry
        resize = tuple(int(v) for v in echoed.split("x")) if echoed else masks[0][1].shape
    for name, mask in masks:
        if mask.shape != tuple(resize):
            raise ConfigError(
                f"mask {name} has shape {mask.shape}, expected {tuple(resize)}"
            )

    spec = DatasetSpec(root=Path(args.data), resize_to=resize, split=Split(args.split))
    manifest = scan_dataset(spec)
    entries = manifest.entries[: args.count] if args.count else manifest.entries
    if not entries:
        raise ConfigError(f"no {args.split} images under {args.data}")

    items, ids = [], []
    state.generator.eval()
    with torch.no_grad():
        for i, name in enumerate(entries):
            img = load_and_augment(name, spec, rng_for(args.seed, "eval-img", i))
            mask = masks[i % len(masks)][1]
            from .masks import apply_mask

            masked = apply_mask(img, mask, UniformNoise(), rng_for(args.seed, "eval-fill", i))
            inp = torch.from_numpy(masked).permute(2, 0, 1).unsqueeze(0)
            m = torch.from_numpy(mask.grid.astype(np.float32))[None, None]
            pred = state.generator(inp, m)[0].permute(1, 2, 0).numpy()
            items.append((img, pred, mask))
            ids.append(name)

    extractor = RandomConvFeatures(dim=args.feature_dim, seed=args.seed)
    report = bucketed_report(
        items, extractor, ids=ids, composite=not args.no_composite
    )
    report.save(args.out)
    print(f"wrote {args.out}: {json.dumps(report.summary(), default=str)}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

def _best_marks(values: list[float | None], lower_better: bool) -> list[bool]:
    finite = [v for v in values if isinstance(v, (int, float))]
    if not finite:
        return [False] * len(values)
    best = min(finite) if lower_better else max(finite)
    return [isinstance(v, (int, float)) and v == best for v in values]


def cmd_report(args) -> int:
    rows = []
    for run in args.runs:
        path = Path(run)
        report_path = path if path.is_file() else path / "report.json"
        if not report_path.exists():
            raise ConfigError(f"no report found at {report_path}")
        summary = json.loads(report_path.read_text())["summary"]
        rows.append((path.name if path.is_dir() else path.stem, summary))

    mark = len(rows) > 1
    psnr_vals = [r[1].get("psnr_mean") for r in rows]
    ssim_vals = [r[1].get("ssim_mean") for r in rows]
    fid_vals = [r[1].get("fid_overall") for r in rows]
    psnr_best = _best_marks(psnr_vals, lower_better=False)
    ssim_best = _best_marks(ssim_vals, lower_better=False)
    fid_best = _best_marks(fid_vals, lower_better=True)

    def fmt(v, best):
        txt = f"{v:.4f}" if isinstance(v, (int, float)) else str(v)
        return txt + ("*" if mark and best else "")

    lines = [f"{'run':<28} {'psnr':>12} {'ssim':>12} {'fid':>12}"]
    csv_lines = ["run,psnr,ssim,fid"]
    for i, (name, _) in enumerate(rows):
        lines.append(
            f"{name:<28} {fmt(psnr_vals[i], psnr_best[i]):>12} "
            f"{fmt(ssim_vals[i], ssim_best[i]):>12} {fmt(fid_vals[i], fid_best[i]):>12}"
        )
        csv_lines.append(f"{name},{psnr_vals[i]},{ssim_vals[i]},{fid_vals[i]}")

    extractors = {r[1].get("extractor_id") for r in rows}
    if len(extractors) > 1:
        lines.append(
            f"note: FID values use different extractors ({', '.join(sorted(map(str, extractors)))}) "
            "and are not comparable"
        )
    text = "\n".join(lines)
    print(text)
    if args.csv:
        Path(args.csv).write_text("\n".join(csv_lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="crossfill", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-masks", help="write a mask corpus plus manifest")
    p.add_argument("--family", required=True, choices=MASK_FAMILY_NAMES)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--size", type=_size_arg, default=(256, 256), help="SIZE or HxW")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--hole-fraction", type=float, default=0.5)
    p.add_argument("--stroke-count", type=int, default=4)
    p.set_defaults(func=cmd_gen_masks)

    p = sub.add_parser("train", help="run a training schedule")
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--preset", help="named preset to start from")
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a config key")
    p.add_argument("--out", help="run directory (default $CROSSFILL_OUT_ROOT/<name>)")
    p.add_argument("--resume", help="checkpoint directory to resume from")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run inference and write a report")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--masks", required=True, help="mask corpus directory (gen-masks output)")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test", choices=["train", "test"])
    p.add_argument("--count", type=int, default=0, help="limit number of images (0 = all)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=_size_arg, default=None)
    p.add_argument("--feature-dim", type=int, default=64)
    p.add_argument("--no-composite", action="store_true")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("report", help="side-by-side comparison of run reports")
    p.add_argument("runs", nargs="+")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_report)
    return parser


def _size_arg(raw: str) -> tuple[int, int]:
    parts = raw.lower().replace("x", ",").split(",")
    if len(parts) == 1:
        return (int(parts[0]), int(parts[0]))
    return (int(parts[0]), int(parts[1]))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingAbort as exc:
        where = f" (last checkpoint: {exc.last_checkpoint})" if exc.last_checkpoint else ""
        print(f"training aborted: {exc}{where}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CrossfillError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
