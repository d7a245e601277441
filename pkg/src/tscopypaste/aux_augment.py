"""GridMask and a mask-consistent RandAugment subset.

RandAugment magnitude M (0..10) maps to op strength as follows:

==================  ===================================================
brightness          factor 1 + s * 0.09 * M, sign s = +/-1 drawn per op
contrast            factor 1 + s * 0.09 * M
saturation          factor 1 + s * 0.09 * M
posterize           keep 8 - round(0.4 * M) bits per channel
solarize            invert values >= 256 - round(25.6 * M)
equalize            histogram equalization (no magnitude)
horizontal_flip     mirror image and every mask (no magnitude)
==================  ===================================================

Draw budget per call: GridMask uses one gate draw plus, when applied, four
more (period, rotation, x offset, y offset). RandAugment uses one gate draw
plus, when applied, one draw per op to choose it and one extra sign draw for
the three enhance ops.
"""
import math

import numpy as np
from PIL import Image, ImageEnhance, ImageOps

from .config import COLOR_OPS
from .geometry import BinaryMask

_ENHANCE = {
    "brightness": ImageEnhance.Brightness,
    "contrast": ImageEnhance.Contrast,
    "saturation": ImageEnhance.Color,
}


def gridmask_dropped(height, width, period, keep_ratio, rotation=0.0, offset=(0.0, 0.0)):
    """Bool array marking the pixels GridMask blanks out.

    Pixel centers are rotated by ``rotation`` degrees about the image center;
    a pixel is dropped when both rotated coordinates, shifted by ``offset``,
    fall in the first (1 - keep_ratio) * period of their grid cell.
    """
    side = (1.0 - keep_ratio) * period
    x = np.arange(width, dtype=np.float64) + 0.5
    y = np.arange(height, dtype=np.float64) + 0.5
    if rotation == 0.0:
        u = np.mod(x - offset[0], period) < side
        v = np.mod(y - offset[1], period) < side
        return v[:, None] & u[None, :]
    theta = math.radians(rotation)
    c, s = math.cos(theta), math.sin(theta)
    dx = (x - width / 2.0)[None, :]
    dy = (y - height / 2.0)[:, None]
    u = c * dx + s * dy + width / 2.0
    v = -s * dx + c * dy + height / 2.0
    return (np.mod(u - offset[0], period) < side) & (np.mod(v - offset[1], period) < side)


def gridmask_draw(params, rng):
    """Sample GridMask geometry; None when the gate says skip."""
    if not rng.bernoulli(params.apply_probability):
        return None
    lo, hi = params.period_range
    period = rng.randint(lo, hi)
    rotation = params.max_rotation * rng.random()
    offset = (period * rng.random(), period * rng.random())
    return {"period": period, "rotation": rotation, "offset": offset}


def apply_gridmask(image, params, rng):
    """Blank a rotated periodic grid of squares; annotations are untouched."""
    draw = gridmask_draw(params, rng)
    if draw is None:
        return image
    h, w = image.shape[:2]
    drop = gridmask_dropped(h, w, draw["period"], params.keep_ratio,
                            draw["rotation"], draw["offset"])
    out = np.array(image, copy=True)
    out[drop] = np.asarray(params.fill_value, dtype=out.dtype)
    return out


def randaugment_plan(params, rng):
    """List of (op, argument) pairs to apply in order."""
    if not rng.bernoulli(params.apply_probability):
        return []
    m = params.magnitude
    plan = []
    for _ in range(params.num_ops):
        op = params.op_pool[rng.randint(0, len(params.op_pool) - 1)]
        if op in _ENHANCE:
            sign = 1.0 if rng.random() < 0.5 else -1.0
            plan.append((op, 1.0 + sign * 0.09 * m))
        elif op == "posterize":
            plan.append((op, 8 - int(round(0.4 * m))))
        elif op == "solarize":
            plan.append((op, 256 - int(round(25.6 * m))))
        else:
            plan.append((op, None))
    return plan


def apply_color_op(image, op, arg):
    img = Image.fromarray(np.ascontiguousarray(image, dtype=np.uint8))
    if op in _ENHANCE:
        img = _ENHANCE[op](img).enhance(arg)
    elif op == "posterize":
        img = ImageOps.posterize(img, arg)
    elif op == "solarize":
        img = ImageOps.solarize(img, arg)
    elif op == "equalize":
        img = ImageOps.equalize(img)
    else:
        raise ValueError(f"not a color op: {op!r}")
    return np.asarray(img, dtype=np.uint8).copy()


def apply_ops(image, masks, plan):
    for op, arg in plan:
        if op in COLOR_OPS:
            image = apply_color_op(image, op, arg)
        elif op == "horizontal_flip":
            image = np.ascontiguousarray(image[:, ::-1])
            masks = [BinaryMask(m.bits[:, ::-1]) for m in masks]
        else:
            raise ValueError(f"unknown op {op!r}")
    return image, masks


def apply_randaugment(image, masks, params, rng):
    """N ops drawn with replacement from the pool; masks follow geometric ops."""
    for m in masks:
        if m.shape != image.shape[:2]:
            raise ValueError(f"mask {m.shape} does not match image {image.shape[:2]}")
    return apply_ops(image, list(masks), randaugment_plan(params, rng))

