"""COCO instance-segmentation JSON: strict parsing, validation and canonical output."""
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from PIL import Image, UnidentifiedImageError

from .geometry.mask import GeometryError, rasterized_stats


class CocoError(Exception):
    pass


class ParseError(CocoError):
    """Input is not UTF-8 JSON. ``offset`` is the byte position of the failure."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


class SchemaError(CocoError):
    def __init__(self, message, key=None, entity=None, entity_id=None):
        where = f"{entity} id={entity_id}" if entity is not None else "top level"
        super().__init__(f"{where}: {message}")
        self.key = key
        self.entity = entity
        self.entity_id = entity_id


class IntegrityError(CocoError):
    def __init__(self, message, ids):
        super().__init__(f"{message}: {sorted(ids)}")
        self.ids = sorted(ids)


class SerializationError(CocoError):
    pass


@dataclass(frozen=True)
class ImageRecord:
    id: int
    file_name: str
    width: int
    height: int
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class InstanceAnnotation:
    id: int
    image_id: int
    category_id: int
    segmentation: tuple  # tuple of flat coordinate tuples
    bbox: tuple
    area: float
    iscrowd: bool = False
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Category:
    id: int
    name: str
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    images: tuple = ()
    annotations: tuple = ()
    categories: tuple = ()
    extra: dict = field(default_factory=dict)

    def image_index(self):
        return {im.id: im for im in self.images}

    def annotations_by_image(self):
        out = {im.id: [] for im in self.images}
        for ann in self.annotations:
            out.setdefault(ann.image_id, []).append(ann)
        return out


@dataclass(frozen=True)
class Violation:
    entity: str  # "image", "annotation", "category" or "dataset"
    entity_id: object
    code: str
    message: str

    def __str__(self):
        return f"{self.entity} {self.entity_id}: [{self.code}] {self.message}"


class IdAllocator:
    """Hands out ids max(existing) + 1, + 2, ...; never reuses one."""

    def __init__(self, start=1):
        self._next = start

    @classmethod
    def after(cls, ids):
        return cls(max(ids, default=0) + 1)

    def __call__(self):
        value = self._next
        self._next += 1
        return value

    def peek(self):
        return self._next


# ---------------------------------------------------------------- parsing

_IMAGE_KEYS = ("id", "width", "height", "file_name")
_ANN_KEYS = ("id", "image_id", "category_id", "segmentation", "area", "bbox", "iscrowd")
_CAT_KEYS = ("id", "name")
_TOP_KEYS = ("images", "annotations", "categories")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _is_num(v):
    return (isinstance(v, (int, float)) and not isinstance(v, bool)
            and math.isfinite(v))


def _require(obj, key, entity, eid, check, what):
    if key not in obj:
        raise SchemaError(f"missing required key {key!r}", key, entity, eid)
    value = obj[key]
    if not check(value):
        raise SchemaError(f"{key!r} must be {what}, got {value!r}", key, entity, eid)
    return value


def _entity_id(obj, entity, index):
    if not isinstance(obj, dict):
        raise SchemaError(f"entry #{index} is not an object", None, entity, f"#{index}")
    return _require(obj, "id", entity, f"#{index}", _is_int, "an integer")


def _extras(obj, known, keep):
    if not keep:
        return {}
    return {k: v for k, v in obj.items() if k not in known}


def _parse_image(obj, index, keep):
    eid = _entity_id(obj, "image", index)
    return ImageRecord(
        id=eid,
        file_name=_require(obj, "file_name", "image", eid,
                           lambda v: isinstance(v, str), "a string"),
        width=_require(obj, "width", "image", eid, _is_int, "an integer"),
        height=_require(obj, "height", "image", eid, _is_int, "an integer"),
        extra=_extras(obj, _IMAGE_KEYS, keep),
    )


def _parse_annotation(obj, index, keep):
    eid = _entity_id(obj, "annotation", index)
    crowd = obj.get("iscrowd", 0)
    if crowd not in (0, 1) or isinstance(crowd, float):
        raise SchemaError(f"'iscrowd' must be 0/1, got {crowd!r}", "iscrowd", "annotation", eid)
    seg = obj.get("segmentation")
    if crowd or isinstance(seg, dict):
        raise SchemaError("crowd/RLE annotations are not supported; polygons only",
                          "iscrowd", "annotation", eid)
    seg = _require(obj, "segmentation", "annotation", eid,
                   lambda v: isinstance(v, list) and all(
                       isinstance(p, list) and all(_is_num(c) for c in p) for p in v),
                   "a list of coordinate lists")
    bbox = _require(obj, "bbox", "annotation", eid,
                    lambda v: isinstance(v, list) and len(v) == 4 and all(_is_num(c) for c in v),
                    "a list of 4 numbers")
    return InstanceAnnotation(
        id=eid,
        image_id=_require(obj, "image_id", "annotation", eid, _is_int, "an integer"),
        category_id=_require(obj, "category_id", "annotation", eid, _is_int, "an integer"),
        segmentation=tuple(tuple(p) for p in seg),
        bbox=tuple(bbox),
        area=_require(obj, "area", "annotation", eid, _is_num, "a number"),
        iscrowd=False,
        extra=_extras(obj, _ANN_KEYS, keep),
    )


def _parse_category(obj, index, keep):
    eid = _entity_id(obj, "category", index)
    return Category(
        id=eid,
        name=_require(obj, "name", "category", eid, lambda v: isinstance(v, str), "a string"),
        extra=_extras(obj, _CAT_KEYS, keep),
    )


def _duplicates(ids):
    seen, dup = set(), set()
    for i in ids:
        (dup if i in seen else seen).add(i)
    return dup


def _check_integrity(d):
    for name, items in (("image", d.images), ("annotation", d.annotations),
                        ("category", d.categories)):
        dup = _duplicates(x.id for x in items)
        if dup:
            raise IntegrityError(f"duplicate {name} ids", dup)
    image_ids = {im.id for im in d.images}
    cat_ids = {c.id for c in d.categories}
    bad = {a.id for a in d.annotations if a.image_id not in image_ids}
    if bad:
        raise IntegrityError("annotations reference unknown image ids", bad)
    bad = {a.id for a in d.annotations if a.category_id not in cat_ids}
    if bad:
        raise IntegrityError("annotations reference unknown category ids", bad)


def parse_dataset(data, keep_unknown=True):
    """Parse COCO JSON bytes into a Dataset.

    Nothing is repaired: structural problems raise SchemaError, broken id
    references raise IntegrityError. Geometric problems (out-of-bounds
    vertices, drifted boxes) are left for ``validate_dataset``.
    """
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"invalid UTF-8: {exc.reason}", exc.start) from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ParseError(f"malformed JSON: {exc.msg}", offset) from None
    if not isinstance(raw, dict):
        raise SchemaError("document must be a JSON object")
    for key in _TOP_KEYS:
        if key not in raw:
            raise SchemaError(f"missing required key {key!r}", key)
        if not isinstance(raw[key], list):
            raise SchemaError(f"{key!r} must be a list", key)

    d = Dataset(
        images=tuple(_parse_image(o, i, keep_unknown) for i, o in enumerate(raw["images"])),
        annotations=tuple(_parse_annotation(o, i, keep_unknown)
                          for i, o in enumerate(raw["annotations"])),
        categories=tuple(_parse_category(o, i, keep_unknown)
                         for i, o in enumerate(raw["categories"])),
        extra=_extras(raw, _TOP_KEYS, keep_unknown),
    )
    _check_integrity(d)
    return d


def load_dataset(path, keep_unknown=True):
    return parse_dataset(Path(path).read_bytes(), keep_unknown=keep_unknown)


# ----------------------------------------------------------- serialization

def _ordered(known, extra):
    out = dict(known)
    for k in sorted(extra):
        out[k] = extra[k]
    return out


def to_json_obj(d):
    top = {}
    for k in ("info", "licenses"):
        if k in d.extra:
            top[k] = d.extra[k]
    top["images"] = [
        _ordered({"id": im.id, "width": im.width, "height": im.height,
                  "file_name": im.file_name}, im.extra)
        for im in d.images
    ]
    top["annotations"] = [
        _ordered({"id": a.id, "image_id": a.image_id, "category_id": a.category_id,
                  "segmentation": [list(p) for p in a.segmentation],
                  "area": a.area, "bbox": list(a.bbox), "iscrowd": int(a.iscrowd)},
                 a.extra)
        for a in d.annotations
    ]
    top["categories"] = [_ordered({"id": c.id, "name": c.name}, c.extra)
                         for c in d.categories]
    for k in sorted(d.extra):
        if k not in top:
            top[k] = d.extra[k]
    return top


def serialize_dataset(d):
    """Canonical UTF-8 JSON bytes; equal datasets give identical bytes."""
    problems = structural_violations(d)
    if problems:
        raise SerializationError(f"refusing to serialize invalid dataset: {problems[0]}")
    text = json.dumps(to_json_obj(d), ensure_ascii=False, allow_nan=False,
                      separators=(",", ":"))
    return text.encode("utf-8")


def save_dataset(d, path):
    Path(path).write_bytes(serialize_dataset(d))


# -------------------------------------------------------------- validation

def structural_violations(d):
    """Id uniqueness, reference resolution and per-field shape checks."""
    out = []
    for name, items in (("image", d.images), ("annotation", d.annotations),
                        ("category", d.categories)):
        for i in sorted(_duplicates(x.id for x in items)):
            out.append(Violation(name, i, "duplicate-id", f"{name} id {i} is not unique"))
    for im in d.images:
        if not (_is_int(im.width) and _is_int(im.height)) or im.width < 1 or im.height < 1:
            out.append(Violation("image", im.id, "bad-size",
                                 f"width/height must be >= 1, got {im.width}x{im.height}"))
    for c in d.categories:
        if not c.name:
            out.append(Violation("category", c.id, "empty-name", "category name is empty"))
    image_ids = {im.id for im in d.images}
    cat_ids = {c.id for c in d.categories}
    for a in d.annotations:
        if a.image_id not in image_ids:
            out.append(Violation("annotation", a.id, "dangling-image",
                                 f"image_id {a.image_id} does not exist"))
        if a.category_id not in cat_ids:
            out.append(Violation("annotation", a.id, "dangling-category",
                                 f"category_id {a.category_id} does not exist"))
        if a.iscrowd:
            out.append(Violation("annotation", a.id, "crowd", "iscrowd must be false"))
        if not a.segmentation:
            out.append(Violation("annotation", a.id, "no-polygon", "segmentation is empty"))
        for k, poly in enumerate(a.segmentation):
            if len(poly) % 2 or len(poly) < 6:
                out.append(Violation("annotation", a.id, "bad-polygon",
                                     f"polygon {k} has {len(poly)} coordinates"))
        if len(a.bbox) != 4:
            out.append(Violation("annotation", a.id, "bad-bbox", "bbox must have 4 numbers"))
    return out


def _geometry_violations(a, im):
    out = []
    w, h = im.width, im.height
    for k, poly in enumerate(a.segmentation):
        xs, ys = poly[0::2], poly[1::2]
        if min(xs) < 0 or max(xs) > w or min(ys) < 0 or max(ys) > h:
            out.append(Violation("annotation", a.id, "vertex-out-of-bounds",
                                 f"polygon {k} leaves the {w}x{h} image"))
    bx, by, bw, bh = a.bbox
    if bw <= 0 or bh <= 0:
        out.append(Violation("annotation", a.id, "empty-bbox", f"bbox {list(a.bbox)} has no extent"))
    elif bx < 0 or by < 0 or bx + bw > w or by + bh > h:
        out.append(Violation("annotation", a.id, "bbox-out-of-bounds",
                             f"bbox {list(a.bbox)} leaves the {w}x{h} image"))
    try:
        pixels, tight = rasterized_stats(a.segmentation, w, h)
    except GeometryError:
        return out
    if tight is None:
        out.append(Violation("annotation", a.id, "empty-raster",
                             "segmentation covers no pixel center"))
    elif bw > 0 and bh > 0:
        tx, ty, tw, th = tight
        drift = max(abs(bx - tx), abs(by - ty), abs(bx + bw - tx - tw), abs(by + bh - ty - th))
        if drift > 1:
            out.append(Violation("annotation", a.id, "bbox-mismatch",
                                 f"bbox {list(a.bbox)} differs from raster bounds "
                                 f"{list(tight)} by {drift} px"))
    return out


def _image_file_violations(im, image_dir):
    path = Path(image_dir) / im.file_name
    if not path.is_file():
        return [Violation("image", im.id, "missing-file", f"{path} does not exist")]
    try:
        with Image.open(path) as img:
            size = img.size
            img.verify()  # chunk checksums, no pixel decode
    except (OSError, UnidentifiedImageError) as exc:
        return [Violation("image", im.id, "unreadable-file", f"{path}: {exc}")]
    if size != (im.width, im.height):
        return [Violation("image", im.id, "size-mismatch",
                          f"{path} is {size[0]}x{size[1]}, record says {im.width}x{im.height}")]
    return []


def validate_dataset(d, image_dir=None):
    """Every invariant violation in ``d``; an empty list means valid."""
    out = structural_violations(d)
    images = {}
    for im in d.images:
        images.setdefault(im.id, im)
    for a in d.annotations:
        if not a.area > 0:
            out.append(Violation("annotation", a.id, "non-positive-area", f"area is {a.area}"))
        im = images.get(a.image_id)
        if im is None or im.width < 1 or im.height < 1:
            continue
        well_formed = (a.segmentation and len(a.bbox) == 4
                       and all(len(p) % 2 == 0 and len(p) >= 6 for p in a.segmentation))
        if well_formed:
            out.extend(_geometry_violations(a, im))
    if image_dir is not None:
        for im in d.images:
            out.extend(_image_file_violations(im, image_dir))
    return out
