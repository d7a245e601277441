"""Offline expansion of a dataset: duplicate every image, augment each
duplicate independently, and assemble one validated COCO output.

Work is split into (image, duplicate) units. Each unit derives its own rng
streams from (seed, source image id, duplicate index, stage), so results do
not depend on the number of workers or the order they finish in. Annotation
ids are assigned afterwards in a single pass ordered by (image id,
duplicate index).
"""
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path, PurePosixPath

from . import geometry
from .aux_augment import apply_color_op, apply_gridmask, randaugment_plan
from .coco_io import (Dataset, IdAllocator, ImageRecord, load_dataset,
                      serialize_dataset, validate_dataset)
from .config import ConfigError
from .copy_paste import LiveInstance, augment_with_copy_paste
from .object_bank import ObjectBank, load_bank
from .raster_io import load_rgb, save_png
from .rng import derive_stream

logger = logging.getLogger(__name__)

IMAGES_DIR = "images"
ANNOTATIONS_FILE = "annotations.json"
AUDIT_FILE = "audit.jsonl"
REPORT_FILE = "report.json"


class PipelineError(RuntimeError):
    pass


@dataclass(frozen=True)
class DuplicateUnit:
    source: ImageRecord
    duplicate_index: int
    image_id: int
    file_name: str


def duplicate_plan(d, factor, suffix=None):
    """One unit per (image, duplicate) in (image id, duplicate index) order.

    New image ids continue after the largest existing one. File names get a
    ``_dupNN`` suffix; ``suffix`` replaces the extension when given.
    """
    if factor < 1:
        raise ValueError("duplication factor must be >= 1")
    alloc = IdAllocator.after(im.id for im in d.images)
    digits = max(2, len(str(factor - 1)))
    units = []
    for im in sorted(d.images, key=lambda r: r.id):
        path = PurePosixPath(im.file_name)
        ext = path.suffix if suffix is None else suffix
        for k in range(factor):
            name = str(path.with_name(f"{path.stem}_dup{k:0{digits}d}{ext}"))
            units.append(DuplicateUnit(im, k, alloc(), name))
    return units


def expand_dataset(d, factor):
    """``factor`` copies of every image and annotation under fresh ids."""
    units = duplicate_plan(d, factor)
    by_image = d.annotations_by_image()
    ann_ids = IdAllocator.after(a.id for a in d.annotations)
    images, anns = [], []
    for u in units:
        images.append(replace(u.source, id=u.image_id, file_name=u.file_name))
        for a in sorted(by_image.get(u.source.id, ()), key=lambda a: a.id):
            anns.append(replace(a, id=ann_ids(), image_id=u.image_id))
    return Dataset(tuple(images), tuple(anns), d.categories, d.extra)


@dataclass
class UnitResult:
    image_id: int
    annotations: list  # local ids
    events: list  # PasteEvents with local ids
    local_ids: int
    requested: dict
    pasted: dict
    skipped: dict
    dropped: int
    constraint: dict


def _augment_unit(unit, anns, bank, config, categories, image_dir, out_images):
    src = unit.source
    pixels = load_rgb(Path(image_dir) / src.file_name)
    if pixels.shape[:2] != (src.height, src.width):
        raise PipelineError(f"{src.file_name} is {pixels.shape[1]}x{pixels.shape[0]}, "
                            f"record says {src.width}x{src.height}")
    w = src.width
    instances = [LiveInstance.from_annotation(a, src.width, src.height, k)
                 for k, a in enumerate(sorted(anns, key=lambda a: a.id))]
    alloc = IdAllocator(len(instances))
    events, summary = [], None
    for stage in config.stage_order:
        rng = derive_stream(config.seed, src.id, unit.duplicate_index, stage)
        if stage == "copy_paste":
            pixels, instances, events, summary = augment_with_copy_paste(
                pixels, instances, bank, config, rng, alloc, categories)
        elif stage == "randaugment":
            for op, arg in randaugment_plan(config.randaugment, rng):
                if op == "horizontal_flip":
                    pixels = pixels[:, ::-1].copy()
                    for inst in instances:
                        inst.flip_horizontal(w)
                else:
                    pixels = apply_color_op(pixels, op, arg)
        elif stage == "gridmask":
            pixels = apply_gridmask(pixels, config.gridmask, rng)
    save_png(Path(out_images) / unit.file_name, pixels)
    return UnitResult(
        image_id=unit.image_id,
        annotations=[inst.to_annotation(inst.local_id, unit.image_id) for inst in instances],
        events=events,
        local_ids=alloc.peek(),
        requested=summary.requested,
        pasted=summary.pasted,
        skipped=summary.skipped,
        dropped=summary.dropped,
        constraint=summary.constraint.to_json(),
    )


_WORKER = {}


def _init_worker(bank, config, categories, image_dir, out_images, backend):
    geometry.use_backend(backend)
    _WORKER.update(bank=bank, config=config, categories=categories,
                   image_dir=image_dir, out_images=out_images)


def _run_unit(job):
    unit, anns = job
    return _augment_unit(unit, anns, _WORKER["bank"], _WORKER["config"],
                         _WORKER["categories"], _WORKER["image_dir"], _WORKER["out_images"])


@dataclass
class PipelineReport:
    input_images: int = 0
    input_annotations: int = 0
    duplication_factor: int = 0
    images_written: int = 0
    output_annotations: int = 0
    instances_requested: int = 0
    instances_pasted: int = 0
    instances_skipped: int = 0
    instances_dropped: int = 0
    per_category: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    backend: str = ""
    out_dir: str = ""

    def to_json(self):
        return asdict(self)


def paste_categories(d, bank, config):
    """Category ids the copy-paste stage will sample for."""
    wanted = list(config.categories) if config.categories is not None else \
        [c.id for c in d.categories]
    if config.count_range[1] == 0:
        return wanted
    missing = [cid for cid in wanted if not bank.pool(cid)]
    if missing and config.strict:
        raise ConfigError(f"bank has no crops for categories {missing}; "
                          "add crops or set strict=false to skip them")
    return [cid for cid in wanted if cid not in missing]


def run_pipeline(config, dataset_path, image_dir, bank_dir, out_dir, workers=1):
    """Augment every duplicate and write images/, annotations.json,
    audit.jsonl and report.json under ``out_dir``."""
    d = load_dataset(dataset_path)
    problems = validate_dataset(d)
    if problems:
        raise PipelineError(f"input dataset is invalid ({len(problems)} violations), "
                            f"first: {problems[0]}")
    bank = load_bank(bank_dir) if bank_dir is not None else ObjectBank()
    categories = paste_categories(d, bank, config)

    out_dir = Path(out_dir)
    out_images = out_dir / IMAGES_DIR
    out_images.mkdir(parents=True, exist_ok=True)
    units = duplicate_plan(d, config.duplication_factor, suffix=".png")
    by_image = d.annotations_by_image()
    jobs = [(u, by_image.get(u.source.id, [])) for u in units]

    args = (bank, config, categories, str(image_dir), str(out_images), geometry.backend())
    if workers > 1:
        with ProcessPoolExecutor(workers, initializer=_init_worker, initargs=args) as pool:
            results = list(pool.map(_run_unit, jobs, chunksize=max(1, len(jobs) // (4 * workers))))
    else:
        _init_worker(*args)
        results = [_run_unit(job) for job in jobs]

    report = PipelineReport(input_images=len(d.images), input_annotations=len(d.annotations),
                            duplication_factor=config.duplication_factor, seed=config.seed,
                            workers=workers, backend=geometry.backend(), out_dir=str(out_dir))
    per_cat = {cid: {"requested": 0, "pasted": 0, "skipped": 0} for cid in categories}
    ann_ids = IdAllocator.after(a.id for a in d.annotations)
    images, anns, audit = [], [], []
    unit_of = {}
    for u, res in zip(units, results):
        base = ann_ids.peek()
        for _ in range(res.local_ids):
            ann_ids()
        images.append(ImageRecord(u.image_id, u.file_name, u.source.width, u.source.height,
                                  dict(u.source.extra)))
        unit_of[u.image_id] = u
        for a in res.annotations:
            anns.append(replace(a, id=base + a.id))
        audit.append({"event": "image", "image_id": u.image_id,
                      "source_image_id": u.source.id, "duplicate_index": u.duplicate_index,
                      "width": u.source.width, "height": u.source.height,
                      "constraint": res.constraint,
                      "requested": {str(k): v for k, v in res.requested.items()},
                      "pasted": {str(k): v for k, v in res.pasted.items()},
                      "skipped": {str(k): v for k, v in res.skipped.items()}})
        for ev in res.events:
            audit.append({"event": "paste", "image_id": u.image_id,
                          **ev.remap(lambda i: base + i).to_json()})
        for cid in categories:
            per_cat[cid]["requested"] += res.requested.get(cid, 0)
            per_cat[cid]["pasted"] += res.pasted.get(cid, 0)
            per_cat[cid]["skipped"] += res.skipped.get(cid, 0)
        report.instances_dropped += res.dropped

    out = Dataset(tuple(images), tuple(anns), d.categories, d.extra)
    violations = validate_dataset(out, out_images)
    if violations:
        first = violations[0]
        culprit = first.entity_id
        if first.entity == "annotation":
            culprit = next(a.image_id for a in anns if a.id == first.entity_id)
        u = unit_of.get(culprit)
        where = (f"duplicate {u.duplicate_index} of image {u.source.id}"
                 if u is not None else "output dataset")
        raise PipelineError(f"{len(violations)} violations in assembled output; "
                            f"first in {where}: {first}")

    (out_dir / ANNOTATIONS_FILE).write_bytes(serialize_dataset(out))
    with open(out_dir / AUDIT_FILE, "w", encoding="utf-8") as fh:
        for rec in audit:
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")

    report.images_written = len(images)
    report.output_annotations = len(anns)
    report.per_category = {str(k): v for k, v in per_cat.items()}
    report.instances_requested = sum(v["requested"] for v in per_cat.values())
    report.instances_pasted = sum(v["pasted"] for v in per_cat.values())
    report.instances_skipped = sum(v["skipped"] for v in per_cat.values())
    (out_dir / REPORT_FILE).write_text(json.dumps(report.to_json(), indent=2) + "\n")
    logger.info("wrote %d images, %d annotations to %s", len(images), len(anns), out_dir)
    return report


def read_audit(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def default_workers():
    return max(1, (os.cpu_count() or 1))
