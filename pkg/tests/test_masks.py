import numpy as np
import pytest
from PIL import Image

from crossfill.masks import (
    ConstantFill,
    DifficultyClass,
    Mask,
    TaskKind,
    UniformNoise,
    apply_mask,
    classify_difficulty,
    invert_mask,
    load_mask,
    load_mask_directory,
    make_bspline_panorama_mask,
    make_center_rect_mask,
    make_irregular_mask,
    make_random_rect_mask,
    save_mask,
    visible_fraction,
)


def random_valid_mask(rng, h=16, w=16) -> Mask:
    grid = (rng.random((h, w)) < 0.5).astype(np.uint8)
    grid[0, 0], grid[-1, -1] = 1, 0  # ensure both classes
    return Mask(grid)


class TestMaskType:
    def test_rejects_non_binary(self):
        with pytest.raises(ValueError):
            Mask(np.full((4, 4), 2, dtype=np.uint8))

    def test_rejects_wrong_ndim(self):
        with pytest.raises(ValueError):
            Mask(np.ones((4, 4, 3), dtype=np.uint8))

    def test_task_opposite_is_involution(self):
        for kind in TaskKind:
            assert kind.opposite.opposite is kind
        assert TaskKind.INPAINTING.opposite is TaskKind.OUTPAINTING


class TestCenterRect:
    def test_paper_config_256(self):
        m = make_center_rect_mask(256, 256, 128, 128)
        hidden = np.argwhere(m.grid == 0)
        assert hidden[:, 0].min() == 64 and hidden[:, 0].max() == 191
        assert hidden[:, 1].min() == 64 and hidden[:, 1].max() == 191
        assert visible_fraction(m) == 1 - 128**2 / 256**2 == 0.75

    def test_even_centering(self):
        m = make_center_rect_mask(4, 4, 2, 2)
        assert (m.grid[1:3, 1:3] == 0).all() and m.grid.sum() == 12

    def test_floor_offset_on_odd_difference(self):
        # all centered placements of a 2-wide hole in 5 start at offset 1 or 2;
        # floor((5-2)/2) picks 1
        m = make_center_rect_mask(5, 5, 2, 2)
        hidden = np.argwhere(m.grid == 0)
        assert hidden.min(axis=0).tolist() == [1, 1]
        assert hidden.max(axis=0).tolist() == [2, 2]

    @pytest.mark.parametrize("hole", [(0, 2), (4, 2), (2, 0), (2, 4), (5, 2)])
    def test_dimension_violations(self, hole):
        with pytest.raises(ValueError):
            make_center_rect_mask(4, 4, *hole)


class TestRandomRect:
    def test_explicit_crop_box_rescale(self):
        m = make_random_rect_mask(256, 256, crop_box=(0.25, 0.25, 0.75, 0.75))
        visible = np.argwhere(m.grid == 1)
        assert visible[:, 0].min() == 64 and visible[:, 0].max() == 191
        assert visible[:, 1].min() == 64 and visible[:, 1].max() == 191
        assert visible_fraction(m) == 0.25

    def test_full_image_box_rejected(self):
        with pytest.raises(ValueError):
            make_random_rect_mask(32, 32, crop_box=(0.0, 0.0, 1.0, 1.0))

    def test_zero_area_box_rejected(self):
        with pytest.raises(ValueError):
            make_random_rect_mask(32, 32, crop_box=(0.5, 0.1, 0.5, 0.9))

    def test_sampler_covers_all_difficulty_buckets(self):
        # Monte-Carlo over the sampler: 1000 seeds must land in every bucket
        seen = {cls: 0 for cls in DifficultyClass}
        for seed in range(1000):
            m = make_random_rect_mask(64, 64, rng=np.random.default_rng(seed))
            seen[classify_difficulty(m)] += 1
        assert all(count > 0 for count in seen.values()), seen


class TestIrregular:
    def test_zero_strokes_rejected(self):
        with pytest.raises(ValueError):
            make_irregular_mask(64, 64, 0, np.random.default_rng(0))

    def test_seed_determinism(self):
        a = make_irregular_mask(64, 64, 4, np.random.default_rng(11))
        b = make_irregular_mask(64, 64, 4, np.random.default_rng(11))
        assert a == b

    def test_visible_fraction_bounds_500_samples(self):
        for seed in range(500):
            m = make_irregular_mask(64, 64, 3, np.random.default_rng(seed))
            assert 0.3 <= visible_fraction(m) <= 0.95


class TestBsplinePanorama:
    def test_aspect_ratio_enforced(self):
        with pytest.raises(ValueError):
            make_bspline_panorama_mask(128, 128, np.random.default_rng(0))

    def test_center_pixel_always_visible(self):
        for seed in range(25):
            m = make_bspline_panorama_mask(64, 128, np.random.default_rng(seed))
            assert m.grid[32, 64] == 1

    def test_seed_determinism(self):
        a = make_bspline_panorama_mask(64, 128, np.random.default_rng(5))
        b = make_bspline_panorama_mask(64, 128, np.random.default_rng(5))
        assert a == b

    def test_mean_visible_fraction_regression(self):
        # empirical interval over 200 seeds at 128x256, recorded as baseline
        fractions = [
            visible_fraction(make_bspline_panorama_mask(128, 256, np.random.default_rng(s)))
            for s in range(200)
        ]
        assert 0.15 <= np.mean(fractions) <= 0.6


class TestInvertAndClassify:
    def test_involution_over_random_masks(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            m = random_valid_mask(rng)
            assert invert_mask(invert_mask(m)) == m

    def test_complementarity_exact(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            m = random_valid_mask(rng)
            assert visible_fraction(m) + visible_fraction(invert_mask(m)) == 1.0

    def test_center_rect_inversion_fraction(self):
        m = invert_mask(make_center_rect_mask(256, 256, 128, 128))
        assert visible_fraction(m) == 0.25

    def test_counting(self):
        grid = np.ones((2, 2), dtype=np.uint8)
        grid[0, 0] = 0
        assert visible_fraction(Mask(grid)) == 0.75

    @pytest.mark.parametrize(
        "fraction,expected",
        [
            (0.15, DifficultyClass.EXTREME),
            (0.20, DifficultyClass.DIFFICULT),
            (0.35, DifficultyClass.DIFFICULT),
            (0.40, DifficultyClass.EASY),
            (0.50, DifficultyClass.EASY),
        ],
    )
    def test_difficulty_boundaries(self, fraction, expected):
        assert DifficultyClass.from_fraction(fraction) is expected

    def test_difficulty_monotone_in_fraction(self):
        order = {DifficultyClass.EXTREME: 0, DifficultyClass.DIFFICULT: 1, DifficultyClass.EASY: 2}
        fractions = np.linspace(0.01, 0.99, 50)
        ranks = [order[DifficultyClass.from_fraction(f)] for f in fractions]
        assert ranks == sorted(ranks)


class TestApplyMask:
    def test_all_visible_identity(self):
        img = np.random.default_rng(0).random((8, 8, 3)).astype(np.float32)
        m = Mask(np.ones((8, 8), dtype=np.uint8))  # degenerate: fine at apply time
        out = apply_mask(img, m, ConstantFill(0.0))
        assert np.array_equal(out, img)

    def test_constant_fill_center_rect(self):
        img = np.full((8, 8, 3), 0.7, dtype=np.float32)
        m = make_center_rect_mask(8, 8, 4, 4)
        out = apply_mask(img, m, ConstantFill(0.0))
        hidden = m.grid == 0
        assert (out[hidden] == 0).all()
        assert (out[~hidden] == 0.7).all()

    def test_noise_fill_determinism(self):
        img = np.random.default_rng(1).random((8, 8, 3)).astype(np.float32)
        m = make_center_rect_mask(8, 8, 4, 4)
        a = apply_mask(img, m, UniformNoise(), np.random.default_rng(42))
        b = apply_mask(img, m, UniformNoise(), np.random.default_rng(42))
        assert np.array_equal(a, b)

    def test_never_modifies_visible_pixels(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            img = rng.random((12, 12, 3)).astype(np.float32)
            m = random_valid_mask(rng, 12, 12)
            out = apply_mask(img, m, UniformNoise(), rng)
            keep = m.grid.astype(bool)
            assert np.array_equal(out[keep], img[keep])  # bit-exact, all channels

    def test_noise_spans_color_range_uint8(self):
        img = np.zeros((64, 64), dtype=np.uint8)
        m = Mask(np.zeros((64, 64), dtype=np.uint8))
        out = apply_mask(img, m, UniformNoise(), np.random.default_rng(0))
        assert out.min() < 16 and out.max() > 239

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            apply_mask(np.zeros((4, 4, 3)), make_center_rect_mask(8, 8, 2, 2), ConstantFill())


class TestGeneratorSeeds:
    def test_different_seeds_differ(self):
        pairs = 0
        for seed in range(100):
            a = make_random_rect_mask(32, 32, rng=np.random.default_rng(seed))
            b = make_random_rect_mask(32, 32, rng=np.random.default_rng(seed + 1000))
            pairs += a != b
        assert pairs >= 99  # different with overwhelming probability


class TestSerialization:
    def test_round_trip(self, tmp_path):
        m = make_center_rect_mask(32, 32, 10, 14)
        save_mask(tmp_path / "m.png", m)
        raw = np.asarray(Image.open(tmp_path / "m.png"))
        assert set(np.unique(raw)) <= {0, 255}  # no intermediate values on disk
        assert load_mask(tmp_path / "m.png") == m

    def test_read_thresholds_at_128(self, tmp_path):
        arr = np.array([[0, 100], [128, 255]], dtype=np.uint8)
        Image.fromarray(arr, mode="L").save(tmp_path / "gray.png")
        m = load_mask(tmp_path / "gray.png")
        assert m.grid.tolist() == [[0, 0], [1, 1]]

    def test_directory_loader(self, tmp_path):
        for i, name in enumerate(["b.png", "a.png"]):
            save_mask(tmp_path / name, make_center_rect_mask(16, 16, 4 + 2 * i, 4))
        loaded = load_mask_directory(tmp_path)
        assert [name for name, _ in loaded] == ["a.png", "b.png"]
