import numpy as np
import pytest
from PIL import Image

from crossfill.data import (
    Augment,
    DatasetSpec,
    ItemSkipped,
    Split,
    load_and_augment,
    make_batch,
    mask_family,
    scan_dataset,
)
from crossfill.errors import DatasetEmptyError
from crossfill.masks import ConstantFill, TaskKind, UniformNoise, apply_mask, Mask


def _write_png(path, size=16, seed=0):
    rng = np.random.default_rng(seed)
    Image.fromarray(rng.integers(0, 256, (size, size, 3), dtype=np.uint8)).save(path)


class TestScanDataset:
    def test_lexicographic_order(self, tmp_path):
        _write_png(tmp_path / "b.png")
        _write_png(tmp_path / "a.png")
        spec = DatasetSpec(root=tmp_path, split=Split.TRAIN)
        manifest = scan_dataset(spec)
        assert list(manifest.entries) == sorted(manifest.entries)

    def test_same_spec_same_split(self, tmp_path):
        for i in range(12):
            _write_png(tmp_path / f"f{i:02d}.png", seed=i)
        spec = DatasetSpec(root=tmp_path, split=Split.TRAIN, split_seed=7)
        assert scan_dataset(spec).entries == scan_dataset(spec).entries

    def test_hash_split_disjoint_union_and_size(self, tmp_path):
        for i in range(100):
            _write_png(tmp_path / f"img_{i:04d}.png", size=8, seed=i)
        train = scan_dataset(DatasetSpec(root=tmp_path, split=Split.TRAIN, split_seed=0))
        test = scan_dataset(DatasetSpec(root=tmp_path, split=Split.TEST, split_seed=0))
        assert set(train.entries).isdisjoint(test.entries)
        assert sorted(train.entries + test.entries) == sorted(
            p.name for p in tmp_path.glob("*.png")
        )
        assert 5 <= len(test.entries) <= 15

    def test_official_split_files_override(self, tmp_path):
        for name in ("a.png", "b.png", "c.png"):
            _write_png(tmp_path / name)
        (tmp_path / "train.txt").write_text("a.png\nc.png\n")
        (tmp_path / "test.txt").write_text("b.png\n")
        train = scan_dataset(DatasetSpec(root=tmp_path, split=Split.TRAIN))
        test = scan_dataset(DatasetSpec(root=tmp_path, split=Split.TEST))
        assert list(train.entries) == ["a.png", "c.png"]
        assert list(test.entries) == ["b.png"]

    def test_undecodable_skipped_and_counted(self, tmp_path):
        _write_png(tmp_path / "ok.png")
        (tmp_path / "broken.png").write_bytes(b"not a png at all")
        with pytest.warns(UserWarning):
            manifest = scan_dataset(DatasetSpec(root=tmp_path, split=Split.TRAIN))
        assert manifest.skipped == 1
        assert "broken.png" not in manifest.entries

    def test_empty_directory(self, tmp_path):
        with pytest.raises(DatasetEmptyError):
            scan_dataset(DatasetSpec(root=tmp_path, split=Split.TRAIN))

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetEmptyError):
            scan_dataset(DatasetSpec(root=tmp_path / "nope", split=Split.TRAIN))


class _ForcedRng(np.random.Generator):
    """Generator whose random() always fires probabilistic augmentations."""

    def __init__(self):
        super().__init__(np.random.PCG64(0))

    def random(self, *args, **kwargs):  # noqa: A003
        if not args and not kwargs:
            return 0.0
        return super().random(*args, **kwargs)


class TestLoadAndAugment:
    def test_no_augmentation_deterministic(self, tmp_path):
        _write_png(tmp_path / "x.png", size=24)
        spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        a = load_and_augment("x.png", spec, np.random.default_rng(0))
        b = load_and_augment("x.png", spec, np.random.default_rng(99))
        assert np.array_equal(a, b)  # rng unused without augmentations
        assert a.shape == (16, 16, 3) and a.dtype == np.float32

    def test_forced_flip_twice_restores(self, tmp_path):
        _write_png(tmp_path / "x.png", size=16)
        plain_spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        flip_spec = DatasetSpec(
            root=tmp_path, resize_to=(16, 16), augmentations=frozenset({Augment.FLIP})
        )
        plain = load_and_augment("x.png", plain_spec, np.random.default_rng(0))
        flipped = load_and_augment("x.png", flip_spec, _ForcedRng())
        assert not np.array_equal(flipped, plain)
        assert np.array_equal(flipped[:, ::-1], plain)

    def test_forced_grayscale_has_identical_channels(self, tmp_path):
        _write_png(tmp_path / "x.png", size=16)
        spec = DatasetSpec(
            root=tmp_path,
            resize_to=(16, 16),
            augmentations=frozenset({Augment.GRAYSCALE}),
            gray_p=1.0,
        )
        out = load_and_augment("x.png", spec, np.random.default_rng(0))
        assert np.array_equal(out[:, :, 0], out[:, :, 1])
        assert np.array_equal(out[:, :, 1], out[:, :, 2])

    def test_crop_keeps_range_and_shape(self, tmp_path):
        _write_png(tmp_path / "x.png", size=32)
        spec = DatasetSpec(
            root=tmp_path,
            resize_to=(16, 16),
            augmentations=frozenset({Augment.CROP, Augment.FLIP, Augment.GRAYSCALE}),
        )
        for seed in range(10):
            out = load_and_augment("x.png", spec, np.random.default_rng(seed))
            assert out.shape == (16, 16, 3)
            assert out.min() >= 0.0 and out.max() <= 1.0

    def test_single_channel_source_replicated(self, tmp_path):
        gray = np.random.default_rng(0).integers(0, 256, (16, 16), dtype=np.uint8)
        Image.fromarray(gray, mode="L").save(tmp_path / "gray.png")
        spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        out = load_and_augment("gray.png", spec, np.random.default_rng(0))
        assert out.shape == (16, 16, 3)
        assert np.array_equal(out[:, :, 0], out[:, :, 2])

    def test_decode_failure_signals_skip(self, tmp_path):
        (tmp_path / "bad.png").write_bytes(b"junk")
        spec = DatasetSpec(root=tmp_path, resize_to=(8, 8))
        with pytest.raises(ItemSkipped):
            load_and_augment("bad.png", spec, np.random.default_rng(0))


class TestMaskFamilies:
    def test_outpainting_from_center_rect_is_visible_block(self):
        family = mask_family("center-rect")
        m = family.sample_for_task(TaskKind.OUTPAINTING, 32, 32, np.random.default_rng(0))
        assert m.grid[16, 16] == 1 and m.grid[0, 0] == 0

    def test_inpainting_from_center_rect_is_hole(self):
        family = mask_family("center-rect")
        m = family.sample_for_task(TaskKind.INPAINTING, 32, 32, np.random.default_rng(0))
        assert m.grid[16, 16] == 0 and m.grid[0, 0] == 1

    def test_native_outpainting_family_not_inverted(self):
        family = mask_family("random-rect")
        m = family.sample_for_task(TaskKind.OUTPAINTING, 32, 32, np.random.default_rng(3))
        visible = np.argwhere(m.grid == 1)
        # visible region of an outpainting mask is one solid rectangle
        y0, x0 = visible.min(axis=0)
        y1, x1 = visible.max(axis=0)
        assert (m.grid[y0 : y1 + 1, x0 : x1 + 1] == 1).all()
        assert m.grid.sum() == (y1 - y0 + 1) * (x1 - x0 + 1)

    def test_unknown_family(self):
        with pytest.raises(ValueError):
            mask_family("diamond")


class TestMakeBatch:
    def test_shapes_at_full_resolution(self, tmp_path):
        for i in range(8):
            _write_png(tmp_path / f"i{i}.png", size=64, seed=i)
        spec = DatasetSpec(root=tmp_path, resize_to=(256, 256))
        entries = sorted(p.name for p in tmp_path.glob("*.png"))
        batch = make_batch(
            entries,
            spec,
            TaskKind.INPAINTING,
            mask_family("center-rect"),
            ConstantFill(0.0),
            np.random.default_rng(0),
        )
        assert batch.images.shape == (8, 256, 256, 3)
        assert batch.masks.shape == (8, 256, 256)
        assert batch.masked_images.shape == (8, 256, 256, 3)
        assert batch.task is TaskKind.INPAINTING

    def test_fill_determinism(self, tmp_path):
        for i in range(4):
            _write_png(tmp_path / f"i{i}.png", seed=i)
        spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        entries = sorted(p.name for p in tmp_path.glob("*.png"))
        kwargs = dict(
            spec=spec,
            task=TaskKind.OUTPAINTING,
            family=mask_family("random-rect"),
            fill=UniformNoise(),
        )
        a = make_batch(entries, rng=np.random.default_rng(5), **kwargs)
        b = make_batch(entries, rng=np.random.default_rng(5), **kwargs)
        assert np.array_equal(a.masked_images, b.masked_images)
        assert np.array_equal(a.masks, b.masks)

    def test_masked_images_match_apply_mask_oracle(self, tmp_path):
        for i in range(3):
            _write_png(tmp_path / f"i{i}.png", seed=i)
        spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        entries = sorted(p.name for p in tmp_path.glob("*.png"))
        batch = make_batch(
            entries,
            spec,
            TaskKind.INPAINTING,
            mask_family("center-rect"),
            ConstantFill(0.25),
            np.random.default_rng(0),
        )
        for i in range(3):
            mask = Mask(batch.masks[i].astype(np.uint8))
            expected = apply_mask(batch.images[i], mask, ConstantFill(0.25))
            assert np.array_equal(batch.masked_images[i], expected)

    def test_noise_fill_preserves_visible(self, tmp_path):
        _write_png(tmp_path / "a.png", seed=1)
        spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        batch = make_batch(
            ["a.png"],
            spec,
            TaskKind.INPAINTING,
            mask_family("irregular", stroke_count=2),
            UniformNoise(),
            np.random.default_rng(2),
        )
        keep = batch.masks[0].astype(bool)
        assert np.array_equal(batch.masked_images[0][keep], batch.images[0][keep])

    def test_empty_entries(self, tmp_path):
        spec = DatasetSpec(root=tmp_path, resize_to=(16, 16))
        with pytest.raises(ValueError):
            make_batch(
                [], spec, TaskKind.INPAINTING, mask_family("center-rect"),
                ConstantFill(), np.random.default_rng(0),
            )
