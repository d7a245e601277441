"""Per-instance crops (RGB patch + tight mask) harvested from a dataset and
persisted as a directory of PNGs plus a JSON manifest."""
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import BinaryMask, mask_area, mask_bounds, trace_contours
from .geometry.mask import polygon_window, rasterize_window
from .raster_io import load_rgb, save_png

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"


class BankError(Exception):
    pass


class ExtractionError(BankError):
    pass


class BankLoadError(BankError):
    def __init__(self, message, crop_id=None):
        super().__init__(message)
        self.crop_id = crop_id


class BankVersionError(BankLoadError):
    pass


class SamplingError(BankError):
    pass


@dataclass(frozen=True, eq=False)
class ObjectCrop:
    crop_id: int
    category_id: int
    patch: np.ndarray  # (h, w, 3) uint8
    mask: BinaryMask
    source_image_id: int
    source_annotation_id: int

    def __post_init__(self):
        if self.patch.shape[:2] != self.mask.shape:
            raise BankError(f"crop {self.crop_id}: patch {self.patch.shape[:2]} "
                            f"and mask {self.mask.shape} differ")
        if mask_bounds(self.mask) != (0, 0, self.mask.width, self.mask.height):
            raise BankError(f"crop {self.crop_id}: mask is empty or not tight")
        patch = np.array(self.patch, dtype=np.uint8)
        patch.setflags(write=False)
        object.__setattr__(self, "patch", patch)

    @property
    def width(self):
        return self.mask.width

    @property
    def height(self):
        return self.mask.height

    @cached_property
    def outline(self):
        """Traced mask polygons in crop coordinates."""
        return tuple(tuple(p) for p in trace_contours(self.mask))

    def __eq__(self, other):
        if not isinstance(other, ObjectCrop):
            return NotImplemented
        return (self.crop_id == other.crop_id
                and self.category_id == other.category_id
                and self.source_image_id == other.source_image_id
                and self.source_annotation_id == other.source_annotation_id
                and self.mask == other.mask
                and np.array_equal(self.patch, other.patch))

    __hash__ = None


@dataclass(frozen=True)
class ObjectBank:
    crops: tuple = ()
    categories: dict = field(default_factory=dict)  # category id -> name
    manifest_version: int = MANIFEST_VERSION

    def __post_init__(self):
        ids = [c.crop_id for c in self.crops]
        if len(set(ids)) != len(ids):
            raise BankError("duplicate crop ids")
        unknown = {c.category_id for c in self.crops} - set(self.categories)
        if unknown:
            raise BankError(f"crops reference unknown categories {sorted(unknown)}")

    @property
    def index(self):
        out = {}
        for c in self.crops:
            out.setdefault(c.category_id, []).append(c.crop_id)
        return out

    @cached_property
    def _by_id(self):
        return {c.crop_id: c for c in self.crops}

    @cached_property
    def _pools(self):
        out = {}
        for c in self.crops:
            out.setdefault(c.category_id, []).append(c)
        return out

    def crop(self, crop_id):
        return self._by_id[crop_id]

    def pool(self, category_id):
        return self._pools.get(category_id, [])

    def counts(self):
        return {cid: len(self.pool(cid)) for cid in sorted(self.categories)}


@dataclass
class ExtractionReport:
    skipped: list = field(default_factory=list)  # (annotation_id, reason)


def _crop_annotation(pixels, ann):
    h, w = pixels.shape[:2]
    win = polygon_window(ann.segmentation, w, h)
    if win is None:
        return None
    x0, y0, ww, wh = win
    sub = rasterize_window(ann.segmentation, x0, y0, ww, wh).astype(bool)
    box = mask_bounds(BinaryMask(sub))
    if box is None:
        return None
    bx, by, bw, bh = box
    mask = BinaryMask(sub[by:by + bh, bx:bx + bw])
    patch = pixels[y0 + by:y0 + by + bh, x0 + bx:x0 + bx + bw]
    return patch, mask


def extract_bank(d, image_dir, workers=1):
    """One crop per annotation whose polygons cover at least one pixel.

    Crop ids run 1, 2, ... in annotation-id order. Returns (bank, report);
    annotations that rasterize to nothing are listed in the report.
    """
    images = d.image_index()
    anns = sorted(d.annotations, key=lambda a: a.id)
    needed = sorted({a.image_id for a in anns})

    def decode(image_id):
        im = images[image_id]
        path = Path(image_dir) / im.file_name
        try:
            pixels = load_rgb(path)
        except (OSError, ValueError) as exc:
            raise ExtractionError(f"cannot decode {path}: {exc}") from exc
        if pixels.shape[:2] != (im.height, im.width):
            raise ExtractionError(
                f"{path} is {pixels.shape[1]}x{pixels.shape[0]}, "
                f"record says {im.width}x{im.height}")
        return image_id, pixels

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            decoded = dict(pool.map(decode, needed))
    else:
        decoded = dict(map(decode, needed))

    crops, report = [], ExtractionReport()
    for ann in anns:
        if ann.iscrowd:
            report.skipped.append((ann.id, "crowd"))
            continue
        got = _crop_annotation(decoded[ann.image_id], ann)
        if got is None:
            report.skipped.append((ann.id, "zero raster area"))
            continue
        patch, mask = got
        crops.append(ObjectCrop(len(crops) + 1, ann.category_id, patch, mask,
                                ann.image_id, ann.id))
    bank = ObjectBank(tuple(crops), {c.id: c.name for c in d.categories})
    return bank, report


def _manifest(bank):
    return {
        "manifest_version": bank.manifest_version,
        "categories": [{"id": cid, "name": bank.categories[cid]}
                       for cid in sorted(bank.categories)],
        "crops": [
            {
                "crop_id": c.crop_id,
                "category_id": c.category_id,
                "width": c.width,
                "height": c.height,
                "area": mask_area(c.mask),
                "source_image_id": c.source_image_id,
                "source_annotation_id": c.source_annotation_id,
                "patch": f"crop_{c.crop_id}.png",
                "mask": f"mask_{c.crop_id}.png",
            }
            for c in bank.crops
        ],
    }


def save_bank(bank, directory):
    """Write crop_<id>.png, mask_<id>.png (0/255) and manifest.json."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for c in bank.crops:
        save_png(directory / f"crop_{c.crop_id}.png", c.patch)
        save_png(directory / f"mask_{c.crop_id}.png", c.mask.bits.astype(np.uint8) * 255)
    manifest = _manifest(bank)
    (directory / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2) + "\n")
    return {
        "directory": str(directory),
        "crops": len(bank.crops),
        "files": 2 * len(bank.crops) + 1,
        "per_category": {str(k): v for k, v in bank.counts().items()},
    }


def _read_png(path, crop_id, mode):
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert(mode), dtype=np.uint8)
    except FileNotFoundError:
        raise BankLoadError(f"crop {crop_id}: missing file {path}", crop_id) from None
    except OSError as exc:
        raise BankLoadError(f"crop {crop_id}: unreadable file {path}: {exc}", crop_id) from None


def load_bank(directory):
    directory = Path(directory)
    path = directory / MANIFEST_NAME
    if not path.is_file():
        raise BankVersionError(f"{directory} has no {MANIFEST_NAME}; not a bank directory")
    try:
        manifest = json.loads(path.read_text())
    except (OSError, ValueError) as exc:
        raise BankLoadError(f"corrupt manifest {path}: {exc}") from None
    version = manifest.get("manifest_version") if isinstance(manifest, dict) else None
    if version != MANIFEST_VERSION:
        raise BankVersionError(
            f"manifest version {version!r} is not supported (expected {MANIFEST_VERSION})")

    crops = []
    for entry in manifest["crops"]:
        cid = entry["crop_id"]
        patch = _read_png(directory / entry["patch"], cid, "RGB")
        raw = _read_png(directory / entry["mask"], cid, "L")
        if not np.isin(raw, (0, 255)).all():
            raise BankLoadError(f"crop {cid}: mask PNG is not binary", cid)
        if raw.shape != (entry["height"], entry["width"]) or patch.shape[:2] != raw.shape:
            raise BankLoadError(f"crop {cid}: image sizes disagree with manifest", cid)
        try:
            crops.append(ObjectCrop(cid, entry["category_id"], patch, BinaryMask(raw == 255),
                                    entry["source_image_id"], entry["source_annotation_id"]))
        except BankError as exc:
            raise BankLoadError(str(exc), cid) from None
    categories = {c["id"]: c["name"] for c in manifest["categories"]}
    return ObjectBank(tuple(crops), categories, version)


def sample_crops(bank, category_id, count, rng):
    """``count`` crops drawn uniformly with replacement; one rng draw per crop."""
    if category_id not in bank.categories:
        raise SamplingError(f"category {category_id} is not in the bank")
    pool = bank.pool(category_id)
    if not pool:
        raise SamplingError(f"category {category_id} has no crops in the bank")
    return [pool[rng.randint(0, len(pool) - 1)] for _ in range(count)]
