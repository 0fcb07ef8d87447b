import numpy as np
import pytest

from figsep.geometry import BBox, intersection_area, max_pairwise_iou
from figsep.synthesis import (
    AssetStyle,
    EmptyAssetPool,
    Mode,
    NotGridFigure,
    Provenance,
    SubfigureAsset,
    SynthesisConfig,
    SyntheticFigure,
    augment,
    figure_rng,
    generate_asset,
    hflip_box,
    invert,
    make_asset_pool,
    synthesize,
    synthesize_grid,
    synthesize_random,
    transpose_layout,
)


@pytest.fixture(scope="module")
def pool():
    return make_asset_pool(11, 40)


def _grid_rows(fig):
    rows = {}
    for b in fig.boxes:
        rows.setdefault((b.y_min, b.y_max), []).append(b)
    return rows


class TestAssets:
    @pytest.mark.parametrize("style", list(AssetStyle))
    def test_non_constant_with_frame(self, style):
        asset = generate_asset(np.random.default_rng(1), style)
        r = asset.raster.astype(int)
        assert r.var() > 0
        frame = np.concatenate([r[0], r[-1], r[:, 0], r[:, -1]])
        assert (frame == frame[0]).all()

    def test_deterministic(self):
        a = generate_asset(np.random.default_rng(5), "text_block")
        b = generate_asset(np.random.default_rng(5), "text_block")
        assert a.raster.tobytes() == b.raster.tobytes()

    def test_min_size_over_pool(self):
        rng = np.random.default_rng(0)
        styles = list(AssetStyle)
        for i in range(1000):
            a = generate_asset(rng, styles[i % 4], size_range=(8, 40))
            assert a.width_px >= 8 and a.height_px >= 8
            assert a.raster.dtype == np.uint8

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            SubfigureAsset(np.zeros((4, 20, 3), np.uint8))


class TestRandomPaste:
    def test_canvas_sized_asset_gives_one_box(self):
        cfg = SynthesisConfig(mode=Mode.RANDOM_PASTE, canvas_long_side_px=64, aspect_ratio_range=(1.0, 1.0))
        big = SubfigureAsset(np.random.default_rng(0).integers(0, 255, (256, 256, 3), dtype=np.uint8))
        fig = synthesize_random(cfg, [big], np.random.default_rng(3))
        assert fig.boxes == (BBox(0.0, 0.0, 1.0, 1.0),)

    def test_iou_below_threshold(self, pool):
        cfg = SynthesisConfig(mode=Mode.RANDOM_PASTE, canvas_long_side_px=256)
        for i in range(50):
            fig = synthesize_random(cfg, pool, figure_rng(2, i))
            assert max_pairwise_iou(fig.boxes) < 0.05
            assert 0.5 <= fig.width_px / fig.height_px <= 2.0 + 1e-2

    def test_deterministic(self, pool):
        cfg = SynthesisConfig(mode=Mode.RANDOM_PASTE, canvas_long_side_px=128)
        a = synthesize_random(cfg, pool, figure_rng(9, 0))
        b = synthesize_random(cfg, pool, figure_rng(9, 0))
        assert a.boxes == b.boxes and a.raster.tobytes() == b.raster.tobytes()

    def test_empty_pool(self):
        with pytest.raises(EmptyAssetPool):
            synthesize_random(SynthesisConfig(mode=Mode.RANDOM_PASTE), [], np.random.default_rng())


class TestGrid:
    def test_rows_tile_without_gaps(self, pool):
        cfg = SynthesisConfig(canvas_long_side_px=256)
        for i in range(30):
            fig = synthesize_grid(cfg, pool, figure_rng(4, i))
            assert 3 <= fig.row_count <= 7
            rows = _grid_rows(fig)
            assert len(rows) == fig.row_count
            for boxes in rows.values():
                boxes.sort(key=lambda b: b.x_min)
                assert 1 <= len(boxes) <= 7
                assert boxes[0].x_min == 0.0 and boxes[-1].x_max == 1.0
                for left, right in zip(boxes, boxes[1:]):
                    assert left.x_max == right.x_min
            for j, a in enumerate(fig.boxes):
                for b in fig.boxes[j + 1:]:
                    assert intersection_area(a, b) == 0.0

    def test_single_asset_pool_deterministic(self, pool):
        cfg = SynthesisConfig(canvas_long_side_px=200)
        a = synthesize_grid(cfg, pool[:1], figure_rng(1, 1))
        b = synthesize_grid(cfg, pool[:1], figure_rng(1, 1))
        assert a.boxes == b.boxes and a.raster.tobytes() == b.raster.tobytes()

    def test_all_row_counts_observed(self, pool):
        cfg = SynthesisConfig(canvas_long_side_px=64)
        counts = {synthesize_grid(cfg, pool[:3], figure_rng(0, i)).row_count for i in range(300)}
        assert counts == {3, 4, 5, 6, 7}

    def test_empty_pool(self):
        with pytest.raises(EmptyAssetPool):
            synthesize_grid(SynthesisConfig(), [], np.random.default_rng())


class TestTranspose:
    def test_involution_and_swap(self, pool):
        fig = synthesize_grid(SynthesisConfig(canvas_long_side_px=128), pool, figure_rng(3, 0))
        t = transpose_layout(fig)
        assert t.raster.shape == (fig.width_px, fig.height_px, 3)
        for a, b in zip(fig.boxes, t.boxes):
            assert b == BBox(a.y_min, a.x_min, a.y_max, a.x_max)
            assert b.area == pytest.approx(a.area, rel=1e-15)
        tt = transpose_layout(t)
        assert tt.boxes == fig.boxes
        assert tt.raster.tobytes() == fig.raster.tobytes()

    def test_coordinate_swap(self):
        fig = SyntheticFigure(np.zeros((10, 20, 3), np.uint8), (BBox(0, 0, 0.5, 0.2),), Provenance(Mode.GRID, 0))
        assert transpose_layout(fig).boxes == (BBox(0, 0, 0.2, 0.5),)

    def test_rejects_random_paste(self):
        fig = SyntheticFigure(np.zeros((10, 10, 3), np.uint8), (BBox(0, 0, 1, 1),), Provenance(Mode.RANDOM_PASTE, 0))
        with pytest.raises(NotGridFigure):
            transpose_layout(fig)


class TestAugment:
    def test_invert_twice_identity(self):
        r = np.random.default_rng(0).integers(0, 256, (5, 7, 3), dtype=np.uint8)
        assert np.array_equal(invert(invert(r)), r)

    def test_hflip_box(self):
        assert hflip_box(BBox(0.1, 0.2, 0.4, 0.9)).as_tuple() == pytest.approx((0.6, 0.2, 0.9, 0.9))

    def test_zero_probabilities_identity(self, pool):
        cfg = SynthesisConfig(augment_invert_prob=0, augment_color_prob=0, augment_hflip_prob=0,
                              canvas_long_side_px=128)
        fig = synthesize_grid(cfg, pool, figure_rng(0, 0))
        out = augment(fig, np.random.default_rng(1), cfg)
        assert out.boxes == fig.boxes and out.raster.tobytes() == fig.raster.tobytes()

    def test_all_probabilities_one(self, pool):
        cfg = SynthesisConfig(augment_invert_prob=1, augment_color_prob=1, augment_hflip_prob=1,
                              canvas_long_side_px=128)
        fig = synthesize_grid(cfg, pool, figure_rng(0, 1))
        out = augment(fig, np.random.default_rng(2), cfg)
        assert out.provenance.inverted and out.provenance.flipped and out.provenance.color_transformed
        assert len(out.boxes) == len(fig.boxes)
        for a, b in zip(fig.boxes, out.boxes):
            assert b.area == pytest.approx(a.area, rel=1e-12)
            assert b == hflip_box(a)

    def test_color_transform_bounds(self, pool):
        cfg = SynthesisConfig(augment_invert_prob=0, augment_color_prob=1, augment_hflip_prob=0)
        fig = synthesize_grid(cfg, pool, figure_rng(0, 2))
        out = augment(fig, np.random.default_rng(3), cfg)
        assert out.raster.dtype == np.uint8 and out.raster.shape == fig.raster.shape
        assert not np.array_equal(out.raster, fig.raster)


def test_synthesize_end_to_end_deterministic(pool):
    cfg = SynthesisConfig(canvas_long_side_px=128, seed=42)
    a = [synthesize(cfg, pool, i) for i in range(5)]
    b = [synthesize(cfg, pool, i) for i in range(5)]
    for x, y in zip(a, b):
        assert x.boxes == y.boxes and x.raster.tobytes() == y.raster.tobytes()
        assert x.provenance == y.provenance


def test_config_validation():
    with pytest.raises(ValueError):
        SynthesisConfig(rows_range=(5, 3))
    with pytest.raises(ValueError):
        SynthesisConfig(augment_hflip_prob=1.5)
    with pytest.raises(ValueError):
        SynthesisConfig(seed=-1)
