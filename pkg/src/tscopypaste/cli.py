"""Command-line entry point.

Exit codes: 0 success, 1 data violations found (validate), 2 usage error,
3 runtime error (I/O, parse failure, pipeline abort).

Preview overlay colors are fixed per category id: hue is
``crc32(str(category_id)) % 360`` degrees at saturation 0.65 and value 0.95.
"""
import argparse
import colorsys
import json
import logging
import sys
import zlib
from collections import Counter
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from . import geometry
from .coco_io import CocoError, load_dataset, validate_dataset
from .config import AugmentConfig, ConfigError, load_config
from .geometry.mask import polygon_window, rasterize_window
from .object_bank import BankError, extract_bank, save_bank
from .pipeline import PipelineError, read_audit, run_pipeline
from .raster_io import load_rgb, save_png

EXIT_OK, EXIT_VIOLATIONS, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3

log = logging.getLogger("tscopypaste")


def category_color(category_id):
    hue = (zlib.crc32(str(category_id).encode()) % 360) / 360.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.95)
    return int(round(r * 255)), int(round(g * 255)), int(round(b * 255))


def _fail(message):
    print(f"error: {message}", file=sys.stderr)
    return EXIT_RUNTIME


def cmd_extract_bank(args):
    try:
        d = load_dataset(args.annotations)
        bank, report = extract_bank(d, args.images, workers=args.workers)
        summary = save_bank(bank, args.out)
    except (OSError, CocoError, BankError) as exc:
        return _fail(exc)
    if not bank.crops:
        print("warning: dataset has no usable annotations; bank is empty", file=sys.stderr)
    for cid, n in bank.counts().items():
        print(f"category {cid} ({bank.categories[cid]}): {n} crops")
    for ann_id, reason in report.skipped:
        print(f"skipped annotation {ann_id}: {reason}")
    print(f"wrote {summary['crops']} crops to {summary['directory']}")
    return EXIT_OK


def cmd_augment(args):
    try:
        config = load_config(args.config) if args.config else AugmentConfig()
        if args.seed is not None:
            config = config.with_overrides(seed=args.seed)
        if args.pure_python:
            geometry.use_backend("python")
        report = run_pipeline(config, args.annotations, args.images, args.bank, args.out,
                              workers=args.workers)
    except (OSError, CocoError, BankError, ConfigError, PipelineError) as exc:
        return _fail(exc)
    print(json.dumps(report.to_json(), indent=2))
    if report.instances_requested and report.instances_pasted == 0:
        print("warning: every paste request was skipped (100% skip rate)", file=sys.stderr)
    return EXIT_OK


def cmd_validate(args):
    try:
        d = load_dataset(args.annotations)
    except (OSError, CocoError) as exc:
        return _fail(exc)
    violations = validate_dataset(d, args.images)
    for v in violations:
        print(v)
    print(f"{len(violations)} violation(s) in {len(d.images)} images, "
          f"{len(d.annotations)} annotations")
    return EXIT_VIOLATIONS if violations else EXIT_OK


def dataset_stats(d, audit=None):
    names = {c.id: c.name for c in d.categories}
    per_cat = Counter(a.category_id for a in d.annotations)
    per_image = Counter(a.image_id for a in d.annotations)
    histogram = Counter(per_image.get(im.id, 0) for im in d.images)
    areas = np.array([a.area for a in d.annotations], dtype=np.float64)
    if areas.size:
        q = np.percentile(areas, [0, 25, 50, 75, 100]).tolist()
    else:
        q = [0.0] * 5
    out = {
        "images": len(d.images),
        "annotations": len(d.annotations),
        "per_category": {names[c]: per_cat.get(c, 0) for c in sorted(names)},
        "instances_per_image": {str(k): histogram[k] for k in sorted(histogram)},
        "area_quartiles": dict(zip(["min", "q1", "median", "q3", "max"], q)),
    }
    if audit is not None:
        requested, pasted = {}, {}
        for rec in audit:
            if rec["event"] != "image":
                continue
            for cid, n in rec["requested"].items():
                requested.setdefault(cid, []).append(n)
            for cid, n in rec["pasted"].items():
                pasted.setdefault(cid, []).append(n)
        out["paste_requests_per_image"] = {
            names.get(int(c), c): {"min": min(v), "max": max(v), "mean": sum(v) / len(v)}
            for c, v in sorted(requested.items())}
        out["pasted_per_image"] = {
            names.get(int(c), c): {"min": min(v), "max": max(v), "mean": sum(v) / len(v)}
            for c, v in sorted(pasted.items())}
    return out


def cmd_stats(args):
    try:
        d = load_dataset(args.annotations)
        audit = read_audit(args.audit) if args.audit else None
    except (OSError, ValueError, CocoError) as exc:
        return _fail(exc)
    stats = dataset_stats(d, audit)
    if args.json:
        print(json.dumps(stats, indent=2))
        return EXIT_OK
    print(f"images: {stats['images']}  annotations: {stats['annotations']}")
    for name, n in stats["per_category"].items():
        print(f"  {name}: {n}")
    print("instances per image:")
    for k, n in stats["instances_per_image"].items():
        print(f"  {k}: {n} images")
    q = stats["area_quartiles"]
    print("area quartiles: " + "  ".join(f"{k}={v:.1f}" for k, v in q.items()))
    for key in ("paste_requests_per_image", "pasted_per_image"):
        for name, s in stats.get(key, {}).items():
            print(f"{key} {name}: min={s['min']} max={s['max']} mean={s['mean']:.2f}")
    return EXIT_OK


def render_preview(pixels, annotations, alpha=0.45):
    if not annotations:
        return pixels
    h, w = pixels.shape[:2]
    out = pixels.astype(np.float64)
    for a in annotations:
        win = polygon_window(a.segmentation, w, h)
        if win is None:
            continue
        x0, y0, ww, wh = win
        sub = rasterize_window(a.segmentation, x0, y0, ww, wh).astype(bool)
        color = np.array(category_color(a.category_id), dtype=np.float64)
        region = out[y0:y0 + wh, x0:x0 + ww]
        region[sub] = (1 - alpha) * region[sub] + alpha * color
    img = Image.fromarray(np.round(out).astype(np.uint8))
    draw = ImageDraw.Draw(img)
    for a in annotations:
        x, y, bw, bh = a.bbox
        draw.rectangle([x, y, x + bw - 1, y + bh - 1], outline=category_color(a.category_id),
                       width=2)
    return np.asarray(img)


def cmd_preview(args):
    if args.count < 0:
        print("error: --count must be >= 0", file=sys.stderr)
        return EXIT_USAGE
    try:
        d = load_dataset(args.annotations)
        by_image = d.annotations_by_image()
        for im in sorted(d.images, key=lambda r: r.id)[:args.count]:
            pixels = load_rgb(Path(args.images) / im.file_name)
            target = Path(args.out) / f"preview_{im.id}.png"
            save_png(target, render_preview(pixels, by_image.get(im.id, [])))
            print(target)
    except (OSError, CocoError) as exc:
        return _fail(exc)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tscp", description="Task-specific copy-paste augmentation for COCO datasets.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract-bank", help="crop every annotated object into a bank directory")
    p.add_argument("--annotations", required=True, help="COCO JSON file")
    p.add_argument("--images", required=True, help="directory holding the image files")
    p.add_argument("--out", required=True, help="bank directory to write")
    p.add_argument("--workers", type=int, default=1, help="parallel image decoders")
    p.set_defaults(func=cmd_extract_bank)

    p = sub.add_parser("augment", help="duplicate and augment a dataset")
    p.add_argument("--annotations", required=True, help="COCO JSON file")
    p.add_argument("--images", required=True, help="directory holding the image files")
    p.add_argument("--bank", help="bank directory from extract-bank")
    p.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--pure-python", action="store_true",
                   help="use the numpy kernels even when the compiled ones are built")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="check a COCO file against every invariant")
    p.add_argument("--annotations", required=True, help="COCO JSON file")
    p.add_argument("--images", help="also check image files exist and match their sizes")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("stats", help="per-category counts, instance histogram, area quartiles")
    p.add_argument("--annotations", required=True, help="COCO JSON file")
    p.add_argument("--audit", help="audit.jsonl from augment, adds per-image paste counts")
    p.add_argument("--json", action="store_true", help="print JSON instead of text")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("preview", help="render mask and box overlays to PNG")
    p.add_argument("--annotations", required=True, help="COCO JSON file")
    p.add_argument("--images", required=True, help="directory holding the image files")
    p.add_argument("--out", required=True, help="directory for preview PNGs")
    p.add_argument("--count", type=int, default=4, help="number of images to render")
    p.set_defaults(func=cmd_preview)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
