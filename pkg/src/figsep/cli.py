"""Command-line entry point: ``figsep synth|anchors|train|detect|eval|render``.

Exit codes: 0 success, 1 usage error, 2 runtime error. Diagnostics go to
stderr; machine-readable output goes to files or stdout.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .dataset_io import (
    FigureRecord,
    IoFailure,
    MissingImage,
    ParseError,
    RunManifest,
    corpus_digest,
    load_corpus,
    read_image,
    record_from_detections,
    render_overlay,
    resolve_image,
    save_corpus,
    write_png,
)
from .detector import (
    DetectorConfig,
    DetectorModel,
    DivergenceDetected,
    EmptyDataset,
    TooFewBoxes,
    detect,
    estimate_anchors,
    train,
    write_loss_csv,
)
from .evaluation import EvalConfig, dataset_metrics, export_pr_curve
from .geometry import Detection
from .synthesis import (
    Mode,
    SynthesisConfig,
    make_asset_pool,
    synthesize,
    transpose_layout,
)
from .nn import WeightFormatError

log = logging.getLogger("figsep")

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit with status 2
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


# ---------------------------------------------------------------- synth

def cmd_synth(args) -> int:
    out = Path(args.out)
    (out / "images").mkdir(parents=True, exist_ok=True)
    config = SynthesisConfig(
        mode=Mode(args.mode),
        canvas_long_side_px=args.long_side,
        seed=args.seed,
        transpose_prob=args.transpose_prob,
        augment_invert_prob=args.invert_prob,
        augment_color_prob=args.color_prob,
        augment_hflip_prob=args.hflip_prob,
    )
    pool = make_asset_pool(args.seed, args.pool_size)
    records = []
    for i in range(args.count):
        fig = synthesize(config, pool, i, augment_figure=not args.no_augment)
        variants = [fig]
        if args.with_transposed and config.mode is Mode.GRID:
            variants.append(transpose_layout(fig))
        for v, variant in enumerate(variants):
            name = f"images/{args.split}_{i:05d}" + ("" if v == 0 else "_t") + ".png"
            write_png(out / name, variant.raster)
            records.append(FigureRecord(name, variant.width_px, variant.height_px,
                                        list(variant.boxes), args.split))
    annotations = out / f"{args.split}.jsonl"
    save_corpus(records, annotations)
    RunManifest("synth", args.seed, config.to_dict(), __version__,
                corpus_digest(records, out)).save(out / f"{args.split}.manifest.json")
    log.info("wrote %d figures to %s", len(records), annotations)
    return 0


# ---------------------------------------------------------------- anchors

def _load(corpus: str, image_root: str | None, split: str = "train",
          check_images: bool = True) -> list[FigureRecord]:
    records, skipped = load_corpus(corpus, image_root, split=split, check_images=check_images)
    if skipped:
        log.warning("%s: skipped %d record(s) with invalid annotations", corpus, skipped)
    return records


def cmd_anchors(args) -> int:
    records = _load(args.corpus, args.image_root, check_images=False)
    boxes = [b for r in records for b in r.boxes]
    anchors = estimate_anchors(boxes, args.k, seed=args.seed)
    text = json.dumps([list(a) for a in anchors]) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------- train

def _detector_config(args) -> DetectorConfig:
    base = DetectorConfig.load(args.config).to_dict() if args.config else {}
    if args.anchors:
        anchors = json.loads(Path(args.anchors).read_text())
        base["anchors"] = anchors
        base["num_anchors"] = len(anchors)
    for key in ("epochs", "lr", "batch_size", "seed"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    return DetectorConfig.from_dict(base)


def cmd_train(args) -> int:
    config = _detector_config(args)
    records = _load(args.corpus, args.image_root)
    root = Path(args.image_root) if args.image_root else Path(args.corpus).parent
    if args.auto_anchors:
        anchors = estimate_anchors([b for r in records for b in r.boxes], config.num_anchors, seed=config.seed)
        config = DetectorConfig.from_dict({**config.to_dict(), "anchors": anchors})
    dataset = [(read_image(resolve_image(r, root)), r.boxes) for r in records]
    log.info("training on %d figures for %d epochs", len(dataset), config.epochs)
    result = train(dataset, config, seed=config.seed)
    result.model.save(args.out)
    if args.loss_csv:
        write_loss_csv(result.history, args.loss_csv)
    means = result.epoch_means()
    if means:
        log.info("epoch mean loss: first %.4f, final %.4f; %d target collision(s)",
                 means[0], means[-1], result.collisions)
    return 0


# ---------------------------------------------------------------- detect

def _detect_inputs(args) -> list[tuple[str, Path]]:
    """(annotation image key, file path) pairs, in input order."""
    items: list[tuple[str, Path]] = []
    if args.corpus:
        root = Path(args.image_root) if args.image_root else Path(args.corpus).parent
        for rec in _load(args.corpus, args.image_root, split="test"):
            items.append((rec.image_path, resolve_image(rec, root)))
    for name in args.inputs:
        path = Path(name)
        if path.is_dir():
            for child in sorted(path.iterdir()):
                if child.suffix.lower() in IMAGE_SUFFIXES:
                    items.append((str(child), child))
        else:
            items.append((name, path))
    return items


def cmd_detect(args) -> int:
    model = DetectorModel.load(args.weights)
    if args.conf_threshold is not None:
        model.config.conf_threshold = args.conf_threshold
    items = _detect_inputs(args)
    if not items:
        raise UsageError("detect: no input images (give paths, a directory, or --corpus)")
    records, timings = [], []
    for key, path in items:
        image = read_image(path)
        dets, ms = detect(model, image)
        timings.append(ms)
        records.append(record_from_detections(key, image.shape[1], image.shape[0], dets))
    if args.out:
        save_corpus(records, args.out)
    else:
        for rec in records:
            sys.stdout.write(rec.to_json_line() + "\n")
    mean_ms = float(np.mean(timings))
    print(f"detect: {len(timings)} figure(s), mean {mean_ms:.1f} ms/figure", file=sys.stderr)
    if args.manifest:
        digest = corpus_digest([FigureRecord(k, 1, 1) for k, _ in items])
        RunManifest("detect", None, model.config.to_dict(), __version__, digest, timings).save(args.manifest)
    return 0


# ---------------------------------------------------------------- eval

def _pair_figures(dets: list[FigureRecord], gts: list[FigureRecord]):
    by_key = {r.image_path: r for r in dets}
    by_name = {Path(r.image_path).name: r for r in dets}
    pairs = []
    for gt in gts:
        det = by_key.get(gt.image_path) or by_name.get(Path(gt.image_path).name)
        pairs.append((det.detections() if det else [], gt.boxes))
    unmatched = len(dets) - sum(1 for g in gts if g.image_path in by_key or Path(g.image_path).name in by_name)
    if unmatched > 0:
        log.warning("%d detection record(s) have no ground-truth figure", unmatched)
    return pairs


def cmd_eval(args) -> int:
    dets = _load(args.detections, None, check_images=False)
    gts = _load(args.gt, None, check_images=False)
    pairs = _pair_figures(dets, gts)
    denominators = ["gt_area", "union"] if args.overlap_denominator == "both" else [args.overlap_denominator]
    for i, denom in enumerate(denominators):
        report = dataset_metrics(pairs, EvalConfig(args.overlap_threshold, denom))
        doc = report.to_json_dict()
        suffix = "" if i == 0 else f".{denom}"
        if args.report:
            path = Path(args.report)
            report.save_json(path.with_name(path.stem + suffix + path.suffix) if suffix else path)
        else:
            sys.stdout.write(json.dumps({**doc, "overlap_denominator": denom} if len(denominators) > 1 else doc) + "\n")
        if args.pr_csv:
            path = Path(args.pr_csv)
            export_pr_curve(report, path.with_name(path.stem + suffix + path.suffix) if suffix else path)
        print(f"eval[{denom}]: accuracy {doc['accuracy']:.4f} precision {doc['precision']:.4f} "
              f"recall {doc['recall']:.4f} mAP {doc['map']:.4f}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------- render

def _find_record(records: list[FigureRecord], image: str) -> FigureRecord | None:
    for rec in records:
        if rec.image_path == image or Path(rec.image_path).name == Path(image).name:
            return rec
    return None


def cmd_render(args) -> int:
    image = read_image(args.image)
    dets: list[Detection] = []
    gts = []
    if args.detections:
        rec = _find_record(_load(args.detections, None, check_images=False), args.image)
        dets = rec.detections() if rec else []
    if args.gt:
        rec = _find_record(_load(args.gt, None, check_images=False), args.image)
        gts = rec.boxes if rec else []
    render_overlay(image, dets, gts, args.out)
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="figsep", description="Compound figure separation toolkit")
    p.add_argument("--version", action="version", version=f"figsep {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("synth", help="generate synthetic compound figures")
    s.add_argument("--mode", choices=[m.value for m in Mode], default="grid")
    s.add_argument("--count", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--split", default="train")
    s.add_argument("--long-side", type=int, default=512)
    s.add_argument("--pool-size", type=int, default=200)
    s.add_argument("--transpose-prob", type=float, default=0.5)
    s.add_argument("--with-transposed", action="store_true",
                   help="also emit the transposed variant of every grid figure")
    s.add_argument("--invert-prob", type=float, default=0.2)
    s.add_argument("--color-prob", type=float, default=0.3)
    s.add_argument("--hflip-prob", type=float, default=0.5)
    s.add_argument("--no-augment", action="store_true")
    s.set_defaults(func=cmd_synth)

    a = sub.add_parser("anchors", help="k-means anchor estimation")
    a.add_argument("--corpus", required=True)
    a.add_argument("--image-root")
    a.add_argument("-k", type=int, default=5)
    a.add_argument("--seed", type=int, default=0)
    a.add_argument("--out", help="JSON file (default: stdout)")
    a.set_defaults(func=cmd_anchors)

    t = sub.add_parser("train", help="train the detector")
    t.add_argument("--corpus", required=True)
    t.add_argument("--image-root")
    t.add_argument("--config", help="DetectorConfig JSON")
    t.add_argument("--anchors", help="anchor JSON from `figsep anchors`")
    t.add_argument("--auto-anchors", action="store_true", help="estimate anchors from the corpus")
    t.add_argument("--epochs", type=int)
    t.add_argument("--lr", type=float)
    t.add_argument("--batch-size", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", required=True, help="weight file")
    t.add_argument("--loss-csv")
    t.set_defaults(func=cmd_train)

    d = sub.add_parser("detect", help="detect subfigures")
    d.add_argument("--weights", required=True)
    d.add_argument("inputs", nargs="*", help="image files or directories")
    d.add_argument("--corpus", help="annotation file whose images to process")
    d.add_argument("--image-root")
    d.add_argument("--conf-threshold", type=float)
    d.add_argument("--out", help="annotation file for detections (default: stdout)")
    d.add_argument("--manifest", help="write a run manifest with per-figure timing")
    d.set_defaults(func=cmd_detect)

    e = sub.add_parser("eval", help="score detections against ground truth")
    e.add_argument("--detections", required=True)
    e.add_argument("--gt", required=True)
    e.add_argument("--overlap-threshold", type=float, default=0.66)
    e.add_argument("--overlap-denominator", choices=["gt_area", "union", "both"], default="gt_area")
    e.add_argument("--report", help="EvalReport JSON (default: stdout)")
    e.add_argument("--pr-csv")
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("render", help="draw detections (red) and ground truth (yellow)")
    r.add_argument("--image", required=True)
    r.add_argument("--detections")
    r.add_argument("--gt")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_render)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError(parser.format_usage().rstrip() + "\nfigsep: error: a subcommand is required")
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (ParseError, MissingImage, IoFailure, WeightFormatError, EmptyDataset, TooFewBoxes,
            DivergenceDetected, ValueError, OSError) as exc:
        print(f"figsep: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
