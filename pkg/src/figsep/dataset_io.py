"""Annotation files, image codec boundary, overlays, and run manifests.

Annotations are JSON Lines, one figure per line::

    {"image": "images/a.png", "width": 640, "height": 480,
     "boxes": [{"x_min": 0.1, "y_min": 0.2, "x_max": 0.5, "y_max": 0.9}, ...]}

Coordinates are normalized; ``confidence`` appears only on detections.
Image paths are resolved against the annotation file's directory unless an
explicit image root is given.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image, ImageDraw, UnidentifiedImageError

from .geometry import BBox, Detection, InvalidBox, is_valid

log = logging.getLogger(__name__)

DET_COLOR = (255, 0, 0)
GT_COLOR = (255, 255, 0)
LINE_WIDTH = 3


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingImage(FileNotFoundError):
    pass


class IoFailure(OSError):
    pass


@dataclass
class FigureRecord:
    image_path: str
    width_px: int
    height_px: int
    boxes: list[BBox] = field(default_factory=list)
    split: str = "train"
    confidences: list[float] | None = None

    def detections(self) -> list[Detection]:
        if self.confidences is None:
            return [Detection(b, 1.0) for b in self.boxes]
        return [Detection(b, c) for b, c in zip(self.boxes, self.confidences)]

    def to_json_line(self) -> str:
        boxes = []
        for i, b in enumerate(self.boxes):
            entry = {"x_min": b.x_min, "y_min": b.y_min, "x_max": b.x_max, "y_max": b.y_max}
            if self.confidences is not None:
                entry["confidence"] = self.confidences[i]
            boxes.append(entry)
        doc = {"image": self.image_path, "width": self.width_px, "height": self.height_px, "boxes": boxes}
        return json.dumps(doc, ensure_ascii=False)


def record_from_detections(image_path: str, width: int, height: int,
                           dets: Sequence[Detection], split: str = "test") -> FigureRecord:
    return FigureRecord(image_path, width, height, [d.box for d in dets], split,
                        [d.confidence for d in dets])


def _number(value, what: str, line: int) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{what} must be a number, got {value!r}", line)
    if not math.isfinite(value):
        raise ParseError(f"{what} must be finite", line)
    return float(value)


def _positive_int(value, what: str, line: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value <= 0:
        raise ParseError(f"{what} must be a positive integer, got {value!r}", line)
    return value


def parse_line(text: str, line: int, split: str = "train") -> FigureRecord | None:
    """Parse one annotation line; ``None`` means the record has an invalid box."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed JSON: {exc.msg}", line) from None
    if not isinstance(doc, dict):
        raise ParseError("expected a JSON object", line)
    for key in ("image", "width", "height", "boxes"):
        if key not in doc:
            raise ParseError(f"missing field {key!r}", line)
    if not isinstance(doc["image"], str):
        raise ParseError("image must be a string", line)
    width = _positive_int(doc["width"], "width", line)
    height = _positive_int(doc["height"], "height", line)
    if not isinstance(doc["boxes"], list):
        raise ParseError("boxes must be a list", line)
    boxes, confs = [], []
    has_conf = None
    for k, entry in enumerate(doc["boxes"]):
        if not isinstance(entry, dict):
            raise ParseError(f"box {k} must be an object", line)
        try:
            coords = [_number(entry[c], f"box {k} {c}", line) for c in ("x_min", "y_min", "x_max", "y_max")]
        except KeyError as exc:
            raise ParseError(f"box {k} missing {exc.args[0]!r}", line) from None
        conf = entry.get("confidence")
        if has_conf is None:
            has_conf = conf is not None
        elif has_conf != (conf is not None):
            raise ParseError("confidence must be present on all boxes or none", line)
        if conf is not None:
            conf = _number(conf, f"box {k} confidence", line)
            if not 0.0 <= conf <= 1.0:
                return None
            confs.append(conf)
        if not is_valid(*coords):
            return None
        boxes.append(BBox(*coords))
    return FigureRecord(doc["image"], width, height, boxes, split, confs if has_conf else None)


def resolve_image(record: FigureRecord, image_root: str | Path) -> Path:
    return Path(image_root) / record.image_path


def image_size(path: str | Path) -> tuple[int, int]:
    try:
        with Image.open(path) as im:
            return im.size
    except FileNotFoundError:
        raise MissingImage(f"image not found: {path}") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise MissingImage(f"image not decodable: {path} ({exc})") from None


def load_corpus(annotation_file: str | Path, image_root: str | Path | None = None,
                split: str = "train", check_images: bool = True) -> tuple[list[FigureRecord], int]:
    """Read a JSON Lines annotation file.

    Returns ``(records, skipped)`` where ``skipped`` counts records dropped
    for invalid boxes or a width/height that disagrees with the image file.
    """
    annotation_file = Path(annotation_file)
    root = Path(image_root) if image_root is not None else annotation_file.parent
    records: list[FigureRecord] = []
    skipped = 0
    try:
        lines = annotation_file.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoFailure(f"cannot read {annotation_file}: {exc}") from exc
    for line_no, text in enumerate(lines, start=1):
        if not text.strip():
            continue
        rec = parse_line(text, line_no, split)
        if rec is None:
            log.warning("%s:%d: invalid box, record skipped", annotation_file, line_no)
            skipped += 1
            continue
        if check_images:
            size = image_size(resolve_image(rec, root))
            if size != (rec.width_px, rec.height_px):
                log.warning("%s:%d: size %s disagrees with image %s, record skipped",
                            annotation_file, line_no, (rec.width_px, rec.height_px), size)
                skipped += 1
                continue
        records.append(rec)
    return records, skipped


def save_corpus(records: Iterable[FigureRecord], annotation_file: str | Path) -> None:
    try:
        with open(annotation_file, "w", encoding="utf-8", newline="\n") as fh:
            for rec in records:
                fh.write(rec.to_json_line())
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {annotation_file}: {exc}") from exc


# ---------------------------------------------------------------- images

def read_image(path: str | Path) -> np.ndarray:
    """Decode PNG/JPEG into an (H, W, 3) uint8 array."""
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()
    except FileNotFoundError:
        raise MissingImage(f"image not found: {path}") from None
    except (UnidentifiedImageError, OSError) as exc:
        raise MissingImage(f"image not decodable: {path} ({exc})") from None


def write_png(path: str | Path, raster: np.ndarray) -> None:
    try:
        Image.fromarray(raster).save(path, format="PNG")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _stroke(draw: ImageDraw.ImageDraw, box: BBox, w: int, h: int, color) -> tuple[int, int]:
    x0, y0, x1, y1 = box.to_pixels(w, h)
    x1, y1 = max(x0, x1 - 1), max(y0, y1 - 1)
    draw.rectangle([x0, y0, x1, y1], outline=color, width=LINE_WIDTH)
    return x0, y0


def render_overlay(image: np.ndarray, dets: Sequence[Detection], gts: Sequence[BBox],
                   out_path: str | Path | None = None) -> np.ndarray:
    """Ground truth stroked in yellow, detections in red on top, with confidences."""
    img = Image.fromarray(image).convert("RGB")
    w, h = img.size
    draw = ImageDraw.Draw(img)
    for box in gts:
        _stroke(draw, box, w, h, GT_COLOR)
    for det in dets:
        x0, y0 = _stroke(draw, det.box, w, h, DET_COLOR)
        draw.text((x0 + LINE_WIDTH + 1, y0 + LINE_WIDTH + 1), f"{det.confidence:.2f}", fill=DET_COLOR)
    out = np.asarray(img, dtype=np.uint8)
    if out_path is not None:
        write_png(out_path, out)
    return out


# ---------------------------------------------------------------- manifests

def corpus_digest(records: Sequence[FigureRecord], image_root: str | Path | None = None) -> str:
    """SHA-256 over the canonical annotation lines and, if a root is given, the image bytes."""
    h = hashlib.sha256()
    for rec in records:
        h.update(rec.to_json_line().encode("utf-8"))
        h.update(b"\n")
        if image_root is not None:
            h.update(resolve_image(rec, image_root).read_bytes())
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    seed: int | None
    config: dict
    tool_version: str
    corpus_digest: str | None = None
    per_figure_ms: list[float] = field(default_factory=list)

    @property
    def mean_ms(self) -> float | None:
        return float(np.mean(self.per_figure_ms)) if self.per_figure_ms else None

    def save(self, path: str | Path) -> None:
        doc = asdict(self)
        doc["figures_timed"] = len(self.per_figure_ms)
        doc["mean_ms_per_figure"] = self.mean_ms
        Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
