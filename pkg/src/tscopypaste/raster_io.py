"""8-bit RGB image decoding and deterministic PNG encoding."""
from pathlib import Path

import numpy as np
from PIL import Image


def load_rgb(path):
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8).copy()


def save_png(path, pixels):
    """Write an (h, w) or (h, w, 3) uint8 array as PNG with fixed encoder settings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.ascontiguousarray(pixels, dtype=np.uint8)).save(
        path, format="PNG", compress_level=6, optimize=False)
