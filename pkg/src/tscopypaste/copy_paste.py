"""Task-specific copy-paste: class-balanced, location-constrained pasting of
bank crops with exact occlusion bookkeeping for the instances underneath.

Placement follows the court-band rule: the pasted object's top-left corner
(x_min, y_min) must satisfy

    margin <= x_min <= w - margin
    w/2 + margin <= y_min <= h/2 + margin          (mode "literal")

For landscape frames the literal y-range is empty, so the default
``band_fallback`` mode uses [max(0, h/2 - margin), h/2 + margin] whenever the
literal range has no room.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .coco_io import InstanceAnnotation
from .geometry import BinaryMask, trace_contours
from .geometry.mask import polygon_window, rasterize_window
from .object_bank import sample_crops


class CompositingError(ValueError):
    pass


def _half(v):
    return v // 2 if v % 2 == 0 else v / 2


@dataclass(frozen=True)
class PlacementConstraint:
    margin: int
    x_interval: tuple
    y_interval: tuple
    mode: str

    @property
    def feasible(self):
        return (self.x_interval[0] <= self.x_interval[1]
                and self.y_interval[0] <= self.y_interval[1])

    def contains(self, x, y):
        return (self.x_interval[0] <= x <= self.x_interval[1]
                and self.y_interval[0] <= y <= self.y_interval[1])

    def to_json(self):
        return {"margin": self.margin, "mode": self.mode, "feasible": self.feasible,
                "x_interval": list(self.x_interval), "y_interval": list(self.y_interval)}


def build_constraint(image_w, image_h, margin=256, mode="band_fallback"):
    if margin < 0:
        raise ValueError("margin must be >= 0")
    if mode not in ("literal", "band_fallback"):
        raise ValueError(f"unknown constraint mode {mode!r}")
    x = (margin, image_w - margin)
    y = (_half(image_w) + margin, _half(image_h) + margin)
    if mode == "band_fallback" and y[0] > y[1]:
        y = (max(0, _half(image_h) - margin), _half(image_h) + margin)
    return PlacementConstraint(margin, x, y, mode)


def placement_region(c, crop_w, crop_h, image_w, image_h):
    """Integer (x_lo, x_hi, y_lo, y_hi) of allowed corners, or None if empty."""
    if not c.feasible:
        return None
    x_lo = max(math.ceil(c.x_interval[0]), 0)
    x_hi = min(math.floor(c.x_interval[1]), image_w - crop_w)
    y_lo = max(math.ceil(c.y_interval[0]), 0)
    y_hi = min(math.floor(c.y_interval[1]), image_h - crop_h)
    if x_lo > x_hi or y_lo > y_hi:
        return None
    return x_lo, x_hi, y_lo, y_hi


def sample_placement(c, crop_w, crop_h, image_w, image_h, rng):
    """Uniform lattice corner inside the constraint that keeps the crop on-raster.

    Consumes two draws (x then y) when the region is non-empty and none
    otherwise; returns None when no corner is allowed.
    """
    region = placement_region(c, crop_w, crop_h, image_w, image_h)
    if region is None:
        return None
    x_lo, x_hi, y_lo, y_hi = region
    return rng.randint(x_lo, x_hi), rng.randint(y_lo, y_hi)


def sample_instance_counts(categories, count_lo=5, count_hi=15, rng=None):
    """Independent uniform count in [count_lo, count_hi] per category, one draw each."""
    if count_lo > count_hi:
        raise ValueError(f"count_lo {count_lo} > count_hi {count_hi}")
    return {cid: rng.randint(count_lo, count_hi) for cid in categories}


@dataclass
class LiveInstance:
    """An instance mask being edited during augmentation.

    The mask is kept inside its own window ``bits`` whose top-left pixel is
    (x0, y0) in the image. ``segmentation``/``bbox``/``area_field`` carry the
    original annotation values until the mask is edited; then they are
    regenerated from the pixels.
    """
    local_id: int
    category_id: int
    x0: int
    y0: int
    bits: np.ndarray
    original_area: int
    area: int
    source_annotation_id: int = None
    crop_id: int = None
    segmentation: tuple = None
    bbox: tuple = None
    area_field: float = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_annotation(cls, ann, image_w, image_h, local_id):
        win = polygon_window(ann.segmentation, image_w, image_h)
        if win is None:
            bits, x0, y0 = np.zeros((0, 0), dtype=bool), 0, 0
        else:
            x0, y0, w, h = win
            bits = rasterize_window(ann.segmentation, x0, y0, w, h).astype(bool)
        area = int(np.count_nonzero(bits))
        return cls(local_id, ann.category_id, x0, y0, bits, area, area,
                   source_annotation_id=ann.id, segmentation=ann.segmentation,
                   bbox=tuple(ann.bbox), area_field=ann.area, extra=dict(ann.extra))

    def copy(self):
        return LiveInstance(**{**vars(self), "bits": self.bits.copy(),
                               "extra": dict(self.extra)})

    @property
    def edited(self):
        return self.segmentation is None

    def full_mask(self, image_w, image_h):
        out = np.zeros((image_h, image_w), dtype=bool)
        h, w = self.bits.shape
        out[self.y0:self.y0 + h, self.x0:self.x0 + w] = self.bits
        return BinaryMask(out)

    def flip_horizontal(self, image_w):
        w = self.bits.shape[1]
        self.x0 = image_w - self.x0 - w
        self.bits = self.bits[:, ::-1].copy()
        if self.segmentation is not None:
            self.segmentation = tuple(
                tuple(image_w - v if k % 2 == 0 else v for k, v in enumerate(poly))
                for poly in self.segmentation)
            bx, by, bw, bh = self.bbox
            self.bbox = (image_w - bx - bw, by, bw, bh)

    def to_annotation(self, ann_id, image_id):
        if self.segmentation is not None:
            return InstanceAnnotation(ann_id, image_id, self.category_id, self.segmentation,
                                      self.bbox, self.area_field, False, dict(self.extra))
        sub = BinaryMask(self.bits)
        polys = tuple(tuple(p[k] + (self.x0 if k % 2 == 0 else self.y0) for k in range(len(p)))
                      for p in trace_contours(sub))
        rows = np.flatnonzero(self.bits.any(axis=1))
        cols = np.flatnonzero(self.bits.any(axis=0))
        bbox = (int(cols[0]) + self.x0, int(rows[0]) + self.y0,
                int(cols[-1] - cols[0] + 1), int(rows[-1] - rows[0] + 1))
        return InstanceAnnotation(ann_id, image_id, self.category_id, polys, bbox,
                                  float(self.area), False, dict(self.extra))


@dataclass(frozen=True)
class PasteEvent:
    crop_id: int
    category_id: int
    position: tuple  # (x_min, y_min)
    crop_size: tuple  # (w, h)
    resulting_annotation_id: int
    pasted_area: int
    # (annotation_id, visible_area_before, visible_area_after)
    occluded_ids: tuple = ()
    dropped_ids: tuple = ()

    def remap(self, fn):
        return PasteEvent(self.crop_id, self.category_id, self.position, self.crop_size,
                          fn(self.resulting_annotation_id), self.pasted_area,
                          tuple((fn(i), b, a) for i, b, a in self.occluded_ids),
                          tuple(fn(i) for i in self.dropped_ids))

    def to_json(self):
        return {
            "crop_id": self.crop_id,
            "category_id": self.category_id,
            "x_min": self.position[0],
            "y_min": self.position[1],
            "crop_w": self.crop_size[0],
            "crop_h": self.crop_size[1],
            "resulting_annotation_id": self.resulting_annotation_id,
            "pasted_area": self.pasted_area,
            "occluded": [list(t) for t in self.occluded_ids],
            "dropped": list(self.dropped_ids),
        }


class _LiveSet:
    """Instances in paste order plus their window boxes for fast overlap tests."""

    def __init__(self, instances):
        self.items = list(instances)
        self._boxes = np.zeros((max(16, 2 * len(self.items)), 4), dtype=np.int64)
        for k, inst in enumerate(self.items):
            self._boxes[k] = _window_box(inst)

    def overlapping(self, x0, y0, x1, y1):
        b = self._boxes[:len(self.items)]
        return np.flatnonzero((b[:, 0] < x1) & (b[:, 2] > x0) & (b[:, 1] < y1) & (b[:, 3] > y0))

    def add(self, inst):
        n = len(self.items)
        if n == len(self._boxes):
            self._boxes = np.concatenate([self._boxes, np.zeros_like(self._boxes)])
        self._boxes[n] = _window_box(inst)
        self.items.append(inst)

    def remove(self, indices):
        if not len(indices):
            return
        keep = np.ones(len(self.items), dtype=bool)
        keep[indices] = False
        self.items = [inst for inst, k in zip(self.items, keep) if k]
        kept = self._boxes[:len(keep)][keep]
        self._boxes[:len(kept)] = kept


def _window_box(inst):
    h, w = inst.bits.shape
    return inst.x0, inst.y0, inst.x0 + w, inst.y0 + h


def _paste_inplace(image, live, crop, position, new_id,
                   visibility_threshold, min_visible_pixels):
    ih, iw = image.shape[:2]
    x, y = position
    cw, ch = crop.width, crop.height
    if not (0 <= x and 0 <= y and x + cw <= iw and y + ch <= ih):
        raise CompositingError(
            f"crop {crop.crop_id} ({cw}x{ch}) at {position} leaves the {iw}x{ih} image")
    cm = crop.mask.bits
    region = image[y:y + ch, x:x + cw]
    region[cm] = crop.patch[cm]

    occluded, dropped, gone = [], [], []
    for k in live.overlapping(x, y, x + cw, y + ch):
        inst = live.items[k]
        ox0, oy0 = max(x, inst.x0), max(y, inst.y0)
        h, w = inst.bits.shape
        ox1, oy1 = min(x + cw, inst.x0 + w), min(y + ch, inst.y0 + h)
        mine = inst.bits[oy0 - inst.y0:oy1 - inst.y0, ox0 - inst.x0:ox1 - inst.x0]
        cover = cm[oy0 - y:oy1 - y, ox0 - x:ox1 - x]
        lost = int(np.count_nonzero(mine & cover))
        if not lost:
            continue
        if not inst.bits.flags.writeable:
            inst.bits = inst.bits.copy()
            mine = inst.bits[oy0 - inst.y0:oy1 - inst.y0, ox0 - inst.x0:ox1 - inst.x0]
        before = inst.area
        mine &= ~cover
        inst.area -= lost
        inst.segmentation = None
        occluded.append((inst.local_id, before, inst.area))
        if (inst.area < visibility_threshold * inst.original_area
                or inst.area < min_visible_pixels):
            dropped.append(inst.local_id)
            gone.append(k)
    live.remove(gone)

    area = int(np.count_nonzero(cm))
    outline = tuple(tuple(v + (x if j % 2 == 0 else y) for j, v in enumerate(poly))
                    for poly in crop.outline)
    live.add(LiveInstance(new_id, crop.category_id, x, y, cm.copy(), area, area,
                          crop_id=crop.crop_id, segmentation=outline, bbox=(x, y, cw, ch),
                          area_field=float(area)))
    event = PasteEvent(crop.crop_id, crop.category_id, (x, y), (cw, ch), new_id, area,
                       tuple(occluded), tuple(dropped))
    return event


def paste_one(image, instances, crop, position, id_allocator,
              visibility_threshold=0.10, min_visible_pixels=10):
    """Hard-paste ``crop`` at ``position`` (top-left corner).

    Crop pixels replace image pixels wherever the crop mask is set; every
    existing instance loses exactly the pixels the crop covers. Instances
    left with less than ``visibility_threshold`` of their original area, or
    fewer than ``min_visible_pixels`` pixels, are dropped. Returns the new
    image, the surviving instances plus the pasted one, and a PasteEvent.
    Inputs are not modified.
    """
    image = np.array(image, dtype=np.uint8, copy=True)
    if image.ndim != 3 or image.shape[2] != 3:
        raise CompositingError(f"expected an (h, w, 3) image, got shape {image.shape}")
    live = _LiveSet(i.copy() for i in instances)
    event = _paste_inplace(image, live, crop, position, id_allocator(),
                           visibility_threshold, min_visible_pixels)
    return image, live.items, event


@dataclass
class CopyPasteSummary:
    requested: dict = field(default_factory=dict)  # category id -> sampled count
    pasted: dict = field(default_factory=dict)
    skipped: dict = field(default_factory=dict)
    dropped: int = 0
    constraint: PlacementConstraint = None


def augment_with_copy_paste(image, instances, bank, config, rng, id_allocator,
                            categories=None):
    """Paste class-balanced, constrained crops from ``bank`` into one image.

    Per category (in ``categories`` order, default: every bank category) a
    count is drawn from ``config.count_range``. Each requested instance gets
    up to ``config.max_placement_attempts`` attempts; an attempt draws a crop
    from that category's pool and a corner inside the placement region,
    failing when the crop cannot fit. Requests that exhaust their attempts
    are skipped. Later pastes may occlude earlier ones.

    Returns (image, instances, events, summary); inputs are not modified.
    """
    image = np.array(image, dtype=np.uint8, copy=True)
    ih, iw = image.shape[:2]
    live = _LiveSet(i.copy() for i in instances)
    if categories is None:
        categories = sorted(bank.categories)
    lo, hi = config.count_range
    counts = sample_instance_counts(categories, lo, hi, rng)
    constraint = build_constraint(iw, ih, config.margin, config.constraint_mode)
    summary = CopyPasteSummary(requested=dict(counts), constraint=constraint)
    events = []
    for cid in categories:
        pasted = skipped = 0
        for _ in range(counts[cid]):
            placed = None
            if constraint.feasible:
                for _ in range(config.max_placement_attempts):
                    crop = sample_crops(bank, cid, 1, rng)[0]
                    pos = sample_placement(constraint, crop.width, crop.height, iw, ih, rng)
                    if pos is not None:
                        placed = crop, pos
                        break
            if placed is None:
                skipped += 1
                continue
            event = _paste_inplace(image, live, placed[0], placed[1], id_allocator(),
                                   config.visibility_threshold, config.min_visible_pixels)
            events.append(event)
            summary.dropped += len(event.dropped_ids)
            pasted += 1
        summary.pasted[cid] = pasted
        summary.skipped[cid] = skipped
    return image, live.items, events, summary
