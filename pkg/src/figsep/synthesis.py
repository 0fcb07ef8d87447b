"""Labeled compound-figure synthesis.

Two layouts are supported: random pasting into empty spots of a blank
canvas, and gap-free grids of row-height-normalized subfigures. Figures can
be transposed (rows become columns) and augmented with inversion, a
per-channel color transform, and horizontal flips.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .geometry import BBox, iou


class EmptyAssetPool(ValueError):
    pass


class NotGridFigure(ValueError):
    pass


class AssetKind(str, enum.Enum):
    IMPORTED_CROP = "imported_crop"
    PROCEDURAL = "procedural"


class AssetStyle(str, enum.Enum):
    BAR_CHART_LIKE = "bar_chart_like"
    LINE_PLOT_LIKE = "line_plot_like"
    PHOTO_NOISE = "photo_noise"
    TEXT_BLOCK = "text_block"


class Mode(str, enum.Enum):
    RANDOM_PASTE = "random_paste"
    GRID = "grid"


MIN_ASSET_SIDE = 8


@dataclass(frozen=True)
class SubfigureAsset:
    raster: np.ndarray  # (H, W, 3) uint8
    kind: AssetKind = AssetKind.PROCEDURAL

    def __post_init__(self) -> None:
        r = self.raster
        if r.ndim != 3 or r.shape[2] != 3 or r.dtype != np.uint8:
            raise ValueError(f"asset raster must be (H, W, 3) uint8, got {r.shape} {r.dtype}")
        if r.shape[0] < MIN_ASSET_SIDE or r.shape[1] < MIN_ASSET_SIDE:
            raise ValueError(f"asset smaller than {MIN_ASSET_SIDE}px: {r.shape[:2]}")

    @property
    def width_px(self) -> int:
        return self.raster.shape[1]

    @property
    def height_px(self) -> int:
        return self.raster.shape[0]


@dataclass(frozen=True)
class SynthesisConfig:
    mode: Mode = Mode.GRID
    aspect_ratio_range: tuple[float, float] = (0.5, 2.0)
    empty_spot_iou_max: float = 0.05
    rows_range: tuple[int, int] = (3, 7)
    per_row_count_range: tuple[int, int] = (1, 7)
    canvas_long_side_px: int = 512
    augment_invert_prob: float = 0.2
    augment_color_prob: float = 0.3
    augment_hflip_prob: float = 0.5
    transpose_prob: float = 0.5
    seed: int = 0
    placement_attempts: int = 200
    max_subfigures: int = 64
    paste_scale_range: tuple[float, float] = (0.5, 2.0)
    min_row_px: int = 24
    asset_size_range: tuple[int, int] = (32, 160)

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", Mode(self.mode))
        for name in ("aspect_ratio_range", "rows_range", "per_row_count_range",
                     "paste_scale_range", "asset_size_range"):
            lo, hi = getattr(self, name)
            if not lo <= hi or lo <= 0:
                raise ValueError(f"{name} must be a non-empty positive range, got {(lo, hi)}")
            object.__setattr__(self, name, (lo, hi))
        for name in ("augment_invert_prob", "augment_color_prob", "augment_hflip_prob", "transpose_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if not 0.0 < self.empty_spot_iou_max <= 1.0:
            raise ValueError("empty_spot_iou_max must lie in (0, 1]")
        if self.canvas_long_side_px < 16:
            raise ValueError("canvas_long_side_px must be at least 16")
        if self.asset_size_range[0] < MIN_ASSET_SIDE:
            raise ValueError(f"asset_size_range must start at >= {MIN_ASSET_SIDE}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["mode"] = self.mode.value
        return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


@dataclass(frozen=True)
class Provenance:
    mode: Mode
    seed: int
    index: int = 0
    transposed: bool = False
    inverted: bool = False
    color_transformed: bool = False
    flipped: bool = False


@dataclass(frozen=True)
class SyntheticFigure:
    raster: np.ndarray  # (H, W, 3) uint8
    boxes: tuple[BBox, ...]
    provenance: Provenance
    row_count: int | None = None
    row_sizes: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        if not self.boxes:
            raise ValueError("a synthetic figure needs at least one box")

    @property
    def width_px(self) -> int:
        return self.raster.shape[1]

    @property
    def height_px(self) -> int:
        return self.raster.shape[0]


# ---------------------------------------------------------------- assets

_PALETTE = np.array([
    (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40), (148, 103, 189),
    (140, 86, 75), (227, 119, 194), (127, 127, 127), (188, 189, 34), (23, 190, 207),
], dtype=np.uint8)


def _color(rng: np.random.Generator) -> tuple[int, int, int]:
    return tuple(int(v) for v in _PALETTE[rng.integers(len(_PALETTE))])


def _background(rng: np.random.Generator) -> tuple[int, int, int]:
    if rng.random() < 0.6:
        return (255, 255, 255)
    return tuple(int(v) for v in rng.integers(215, 256, size=3))


def _draw_axes(draw: ImageDraw.ImageDraw, w: int, h: int, m: int) -> None:
    draw.line([(m, m), (m, h - m), (w - m, h - m)], fill=(0, 0, 0), width=1)


def _bar_chart(rng, w, h, draw):
    m = max(3, min(w, h) // 8)
    _draw_axes(draw, w, h, m)
    n = int(rng.integers(2, 9))
    span = max(1, w - 2 * m - 2)
    bar_w = max(1, span // (2 * n))
    color = _color(rng)
    for i in range(n):
        x0 = m + 2 + i * 2 * bar_w
        top = int(rng.integers(m + 1, h - m))
        draw.rectangle([x0, top, x0 + bar_w - 1, h - m - 1],
                       fill=color if rng.random() < 0.7 else _color(rng))


def _line_plot(rng, w, h, draw):
    m = max(3, min(w, h) // 8)
    _draw_axes(draw, w, h, m)
    for _ in range(int(rng.integers(1, 4))):
        xs = np.linspace(m + 1, w - m - 1, num=int(rng.integers(4, 12)))
        ys = np.clip(np.cumsum(rng.normal(0, (h - 2 * m) / 6, size=xs.size)) + h / 2, m + 1, h - m - 1)
        draw.line(list(zip(xs.tolist(), ys.tolist())), fill=_color(rng), width=int(rng.integers(1, 3)))


def _text_block(rng, w, h, draw):
    line_h = int(rng.integers(4, 9))
    ink = tuple(int(v) for v in rng.integers(0, 90, size=3))
    y = 3
    while y + line_h < h - 3:
        x = 3
        while x < w - 6:
            word = int(rng.integers(3, 16))
            draw.rectangle([x, y, min(x + word, w - 4), y + line_h - 2], fill=ink)
            x += word + int(rng.integers(2, 5))
        y += line_h + int(rng.integers(1, 4))


def _photo_noise(rng, w, h):
    coarse = rng.integers(0, 256, size=(max(2, h // 8), max(2, w // 8), 3), dtype=np.uint8)
    img = Image.fromarray(coarse).resize((w, h), Image.BILINEAR)
    tint = rng.uniform(0.5, 1.0, size=3)
    return (np.asarray(img, dtype=np.float64) * tint).astype(np.uint8)


def generate_asset(rng: np.random.Generator, style: AssetStyle | str,
                   size_range: tuple[int, int] = (32, 160)) -> SubfigureAsset:
    """Procedural pseudo-subfigure with a non-constant interior and a 1-px frame."""
    style = AssetStyle(style)
    lo, hi = max(MIN_ASSET_SIDE, size_range[0]), max(MIN_ASSET_SIDE, size_range[1])
    w, h = (int(v) for v in rng.integers(lo, hi + 1, size=2))
    if style is AssetStyle.PHOTO_NOISE:
        arr = _photo_noise(rng, w, h)
        img = Image.fromarray(arr)
    else:
        img = Image.new("RGB", (w, h), _background(rng))
        draw = ImageDraw.Draw(img)
        {AssetStyle.BAR_CHART_LIKE: _bar_chart,
         AssetStyle.LINE_PLOT_LIKE: _line_plot,
         AssetStyle.TEXT_BLOCK: _text_block}[style](rng, w, h, draw)
    frame = tuple(int(v) for v in rng.integers(0, 120, size=3))
    ImageDraw.Draw(img).rectangle([0, 0, w - 1, h - 1], outline=frame, width=1)
    return SubfigureAsset(np.asarray(img, dtype=np.uint8).copy(), AssetKind.PROCEDURAL)


def make_asset_pool(seed: int, count: int = 200,
                    size_range: tuple[int, int] = (32, 160)) -> list[SubfigureAsset]:
    """Deterministic pool cycling through all procedural styles."""
    rng = np.random.default_rng([seed, 0xA55E7])
    styles = list(AssetStyle)
    return [generate_asset(rng, styles[i % len(styles)], size_range) for i in range(count)]


# ---------------------------------------------------------------- layouts

def _canvas_size(config: SynthesisConfig, rng: np.random.Generator) -> tuple[int, int]:
    aspect = rng.uniform(*config.aspect_ratio_range)  # width / height
    long_side = config.canvas_long_side_px
    if aspect >= 1.0:
        return long_side, max(1, int(round(long_side / aspect)))
    return max(1, int(round(long_side * aspect))), long_side


def _resize(asset: SubfigureAsset, w: int, h: int) -> np.ndarray:
    if (w, h) == (asset.width_px, asset.height_px):
        return asset.raster
    return np.asarray(Image.fromarray(asset.raster).resize((w, h), Image.BILINEAR))


def _split_integer(total: int, weights: np.ndarray, minimum: int) -> np.ndarray:
    """Integer sizes summing to ``total``, each >= ``minimum``, proportional to weights otherwise."""
    n = len(weights)
    minimum = min(minimum, total // n)
    extra = total - n * minimum
    cum = np.concatenate([[0.0], np.cumsum(weights / weights.sum())])
    edges = np.round(cum * extra).astype(np.int64) + minimum * np.arange(n + 1)
    edges[-1] = total
    return np.diff(edges)


def synthesize_random(config: SynthesisConfig, asset_pool: Sequence[SubfigureAsset],
                      rng: np.random.Generator, index: int = 0) -> SyntheticFigure:
    """Paste randomly scaled subfigures into empty spots until none can be found."""
    if not asset_pool:
        raise EmptyAssetPool("asset pool is empty")
    cw, ch = _canvas_size(config, rng)
    canvas = np.full((ch, cw, 3), 255, dtype=np.uint8)
    boxes: list[BBox] = []
    while len(boxes) < config.max_subfigures:
        asset = asset_pool[int(rng.integers(len(asset_pool)))]
        scale = rng.uniform(*config.paste_scale_range)
        w, h = asset.width_px * scale, asset.height_px * scale
        fit = min(1.0, cw / w, ch / h)
        w = min(cw, max(min(MIN_ASSET_SIDE, cw), int(round(w * fit))))
        h = min(ch, max(min(MIN_ASSET_SIDE, ch), int(round(h * fit))))
        placed = None
        for _ in range(config.placement_attempts):
            x0 = int(rng.integers(0, cw - w + 1))
            y0 = int(rng.integers(0, ch - h + 1))
            cand = BBox.from_pixels(x0, y0, x0 + w, y0 + h, cw, ch)
            if all(iou(cand, b) < config.empty_spot_iou_max for b in boxes):
                placed = (x0, y0, cand)
                break
        if placed is None:
            break
        x0, y0, cand = placed
        canvas[y0:y0 + h, x0:x0 + w] = _resize(asset, w, h)
        boxes.append(cand)
    return SyntheticFigure(canvas, tuple(boxes), Provenance(Mode.RANDOM_PASTE, config.seed, index))


def synthesize_grid(config: SynthesisConfig, asset_pool: Sequence[SubfigureAsset],
                    rng: np.random.Generator, index: int = 0) -> SyntheticFigure:
    """Rows of random height, each packed edge-to-edge with row-height-resized subfigures."""
    if not asset_pool:
        raise EmptyAssetPool("asset pool is empty")
    cw, ch = _canvas_size(config, rng)
    canvas = np.full((ch, cw, 3), 255, dtype=np.uint8)
    n_rows = int(rng.integers(config.rows_range[0], config.rows_range[1] + 1))
    # row heights: uniform spacings of a sorted uniform sample
    cuts = np.sort(rng.random(n_rows - 1))
    spacings = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
    heights = _split_integer(ch, spacings, config.min_row_px)
    boxes: list[BBox] = []
    row_sizes = []
    y0 = 0
    for row_h in heights:
        row_h = int(row_h)
        n = int(rng.integers(config.per_row_count_range[0], config.per_row_count_range[1] + 1))
        picks = [asset_pool[int(i)] for i in rng.integers(len(asset_pool), size=n)]
        natural = np.array([a.width_px * row_h / a.height_px for a in picks])
        widths = _split_integer(cw, natural, MIN_ASSET_SIDE)
        x0 = 0
        for asset, w in zip(picks, widths):
            w = int(w)
            if w > 0 and row_h > 0:
                canvas[y0:y0 + row_h, x0:x0 + w] = _resize(asset, w, row_h)
                boxes.append(BBox.from_pixels(x0, y0, x0 + w, y0 + row_h, cw, ch))
            x0 += w
        row_sizes.append(n)
        y0 += row_h
    return SyntheticFigure(canvas, tuple(boxes), Provenance(Mode.GRID, config.seed, index),
                           row_count=n_rows, row_sizes=tuple(row_sizes))


def transpose_layout(fig: SyntheticFigure) -> SyntheticFigure:
    """Swap image axes so rows become columns; boxes follow."""
    if fig.provenance.mode is not Mode.GRID:
        raise NotGridFigure("transpose_layout only applies to grid figures")
    raster = np.ascontiguousarray(fig.raster.transpose(1, 0, 2))
    boxes = tuple(BBox(b.y_min, b.x_min, b.y_max, b.x_max) for b in fig.boxes)
    prov = replace(fig.provenance, transposed=not fig.provenance.transposed)
    return replace(fig, raster=raster, boxes=boxes, provenance=prov)


# ---------------------------------------------------------------- augmentation

def invert(raster: np.ndarray) -> np.ndarray:
    return 255 - raster


def color_transform(raster: np.ndarray, scale: np.ndarray, shift: np.ndarray) -> np.ndarray:
    out = raster.astype(np.float64) * scale + shift
    return np.clip(np.round(out), 0, 255).astype(np.uint8)


def hflip_box(b: BBox) -> BBox:
    return BBox(1.0 - b.x_max, b.y_min, 1.0 - b.x_min, b.y_max)


def augment(fig: SyntheticFigure, rng: np.random.Generator, config: SynthesisConfig) -> SyntheticFigure:
    """Random inversion, per-channel affine color change, and horizontal flip."""
    do_invert, do_color, do_flip = (rng.random(3) < [config.augment_invert_prob,
                                                    config.augment_color_prob,
                                                    config.augment_hflip_prob])
    raster, boxes = fig.raster, fig.boxes
    if do_invert:
        raster = invert(raster)
    if do_color:
        raster = color_transform(raster, rng.uniform(0.7, 1.3, size=3), rng.uniform(-20, 20, size=3))
    if do_flip:
        raster = np.ascontiguousarray(raster[:, ::-1])
        boxes = tuple(hflip_box(b) for b in boxes)
    if not (do_invert or do_color or do_flip):
        return fig
    prov = replace(fig.provenance,
                   inverted=fig.provenance.inverted ^ bool(do_invert),
                   color_transformed=fig.provenance.color_transformed or bool(do_color),
                   flipped=fig.provenance.flipped ^ bool(do_flip))
    return replace(fig, raster=raster, boxes=boxes, provenance=prov)


def figure_rng(seed: int, index: int) -> np.random.Generator:
    """Independent RNG stream for figure ``index`` under ``seed``."""
    return np.random.default_rng([seed, index])


def synthesize(config: SynthesisConfig, asset_pool: Sequence[SubfigureAsset], index: int,
               augment_figure: bool = True) -> SyntheticFigure:
    """One complete figure: layout, optional random transpose (grid), augmentation."""
    rng = figure_rng(config.seed, index)
    if config.mode is Mode.GRID:
        fig = synthesize_grid(config, asset_pool, rng, index)
        if rng.random() < config.transpose_prob:
            fig = transpose_layout(fig)
    else:
        fig = synthesize_random(config, asset_pool, rng, index)
    if augment_figure:
        fig = augment(fig, rng, config)
    return fig
