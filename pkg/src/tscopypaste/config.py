"""Augmentation settings and their JSON config file.

A config file is a JSON object. Top-level keys name ``AugmentConfig`` fields;
``gridmask`` and ``randaugment`` take nested objects, or their fields can be
addressed flat as ``"gridmask.keep_ratio"``. Omitted keys keep their
defaults, unknown keys are an error.
"""
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

STAGES = ("copy_paste", "randaugment", "gridmask")
CONSTRAINT_MODES = ("literal", "band_fallback")
COLOR_OPS = ("brightness", "contrast", "saturation", "posterize", "equalize", "solarize")
GEOMETRIC_OPS = ("horizontal_flip",)
ALL_OPS = COLOR_OPS + GEOMETRIC_OPS


class ConfigError(ValueError):
    pass


def _check(cond, message):
    if not cond:
        raise ConfigError(message)


@dataclass(frozen=True)
class GridMaskParams:
    apply_probability: float = 0.7
    keep_ratio: float = 0.6
    period_range: tuple = (96, 224)
    # rotation is drawn from [0, max_rotation) degrees
    max_rotation: float = 90.0
    fill_value: tuple = (0, 0, 0)

    def __post_init__(self):
        object.__setattr__(self, "period_range", tuple(self.period_range))
        object.__setattr__(self, "fill_value", tuple(self.fill_value))
        _check(0.0 <= self.apply_probability <= 1.0, "gridmask.apply_probability must be in [0, 1]")
        _check(0.0 < self.keep_ratio < 1.0, "gridmask.keep_ratio must be in (0, 1)")
        lo, hi = self.period_range
        _check(2 <= lo <= hi, "gridmask.period_range needs 2 <= lo <= hi")
        _check(0.0 <= self.max_rotation <= 360.0, "gridmask.max_rotation must be in [0, 360]")
        _check(len(self.fill_value) == 3 and all(0 <= v <= 255 for v in self.fill_value),
               "gridmask.fill_value must be an RGB triple in [0, 255]")


@dataclass(frozen=True)
class RandAugmentParams:
    num_ops: int = 2
    magnitude: int = 7
    op_pool: tuple = ALL_OPS
    apply_probability: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "op_pool", tuple(self.op_pool))
        _check(self.num_ops >= 0, "randaugment.num_ops must be >= 0")
        _check(0 <= self.magnitude <= 10, "randaugment.magnitude must be in [0, 10]")
        _check(len(self.op_pool) > 0, "randaugment.op_pool must not be empty")
        unknown = set(self.op_pool) - set(ALL_OPS)
        _check(not unknown, f"randaugment.op_pool has unknown ops {sorted(unknown)}")
        _check(0.0 <= self.apply_probability <= 1.0,
               "randaugment.apply_probability must be in [0, 1]")


@dataclass(frozen=True)
class AugmentConfig:
    duplication_factor: int = 20
    count_range: tuple = (5, 15)
    margin: int = 256
    constraint_mode: str = "band_fallback"
    visibility_threshold: float = 0.10
    min_visible_pixels: int = 10
    max_placement_attempts: int = 20
    gridmask: GridMaskParams = field(default_factory=GridMaskParams)
    randaugment: RandAugmentParams = field(default_factory=RandAugmentParams)
    seed: int = 0
    stage_order: tuple = STAGES
    # category ids to paste; None means every category in the dataset
    categories: tuple = None
    # fail when a pasted category has no crops instead of skipping it
    strict: bool = True

    def __post_init__(self):
        object.__setattr__(self, "count_range", tuple(self.count_range))
        object.__setattr__(self, "stage_order", tuple(self.stage_order))
        if self.categories is not None:
            object.__setattr__(self, "categories", tuple(self.categories))
        _check(self.duplication_factor >= 1, "duplication_factor must be >= 1")
        lo, hi = self.count_range
        _check(0 <= lo <= hi, "count_range needs 0 <= lo <= hi")
        _check(self.margin >= 0, "margin must be >= 0")
        _check(self.constraint_mode in CONSTRAINT_MODES,
               f"constraint_mode must be one of {CONSTRAINT_MODES}")
        _check(0.0 <= self.visibility_threshold <= 1.0, "visibility_threshold must be in [0, 1]")
        _check(self.min_visible_pixels >= 0, "min_visible_pixels must be >= 0")
        _check(self.max_placement_attempts >= 1, "max_placement_attempts must be >= 1")
        _check(0 <= self.seed < 2 ** 64, "seed must be a 64-bit unsigned integer")
        _check(sorted(self.stage_order) == sorted(STAGES),
               f"stage_order must be a permutation of {STAGES}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        top, nested = {}, {"gridmask": {}, "randaugment": {}}
        for key, value in raw.items():
            head, _, rest = key.partition(".")
            if rest:
                if head not in nested:
                    raise ConfigError(f"unknown config key {key!r}")
                nested[head][rest] = value
            elif key in nested:
                if not isinstance(value, dict):
                    raise ConfigError(f"{key!r} must be an object")
                nested[key].update(value)
            else:
                top[key] = value
        known = {f.name for f in fields(cls)} - set(nested)
        unknown = set(top) - known
        if unknown:
            raise ConfigError(f"unknown config keys {sorted(unknown)}")
        try:
            gm = GridMaskParams(**nested["gridmask"])
            ra = RandAugmentParams(**nested["randaugment"])
            return cls(gridmask=gm, randaugment=ra, **top)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def with_overrides(self, **kw):
        return replace(self, **kw)


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except ValueError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return AugmentConfig.from_dict(raw)


def identity_config(seed=0):
    """Factor 1, nothing pasted, every random stage disabled."""
    return AugmentConfig(
        duplication_factor=1,
        count_range=(0, 0),
        gridmask=GridMaskParams(apply_probability=0.0),
        randaugment=RandAugmentParams(num_ops=0, apply_probability=0.0),
        seed=seed,
    )
