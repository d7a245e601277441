"""Compare the compiled and numpy kernel backends.

    python benchmarks/bench_kernels.py [--repeat 5]

Each workload runs under every available backend; the table reports the
best-of-N wall time per call and the speedup of the compiled kernels.
"""
import argparse
import math
import time

import numpy as np

from tscopypaste import geometry
from tscopypaste.coco_io import IdAllocator
from tscopypaste.config import AugmentConfig
from tscopypaste.copy_paste import augment_with_copy_paste
from tscopypaste.geometry import BinaryMask, rasterize, trace_contours
from tscopypaste.object_bank import ObjectBank, ObjectCrop
from tscopypaste.rng import RngStream


def star_polygon(cx, cy, r, points=40):
    out = []
    for k in range(2 * points):
        rad = r if k % 2 == 0 else 0.55 * r
        a = math.pi * k / points
        out += [cx + rad * math.cos(a), cy + rad * math.sin(a)]
    return out


def player_masks(n=200, seed=0):
    rng = np.random.default_rng(seed)
    masks = []
    for _ in range(n):
        h, w = int(rng.integers(40, 120)), int(rng.integers(20, 60))
        poly = star_polygon(w / 2, h / 2, min(w, h) / 2 - 1, points=int(rng.integers(6, 20)))
        masks.append(rasterize([poly], w, h))
    return masks


def paste_bank(seed=0):
    rng = np.random.default_rng(seed)
    crops = []
    for k, m in enumerate(player_masks(40, seed)):
        box = geometry.mask_bounds(m)
        bx, by, bw, bh = box
        bits = m.bits[by:by + bh, bx:bx + bw]
        patch = rng.integers(0, 256, size=(bh, bw, 3), dtype=np.uint8)
        crops.append(ObjectCrop(k + 1, 1 + k % 2, patch, BinaryMask(bits), 1, k + 1))
    return ObjectBank(tuple(crops), {1: "player", 2: "ball"})


def workloads():
    big = [star_polygon(960, 540, 500, points=400)]
    masks = player_masks()
    noisy = BinaryMask(np.random.default_rng(1).random((256, 256)) < 0.5)
    bank = paste_bank()
    canvas = np.zeros((1080, 1920, 3), np.uint8)
    cfg = AugmentConfig(count_range=(60, 60), margin=400, seed=0)

    def paste_frame():
        _, live, _, _ = augment_with_copy_paste(canvas, [], bank, cfg, RngStream.from_seed(0),
                                                IdAllocator(1))
        return [inst.to_annotation(inst.local_id, 1) for inst in live]

    return [
        ("rasterize 800-gon on 1920x1080", lambda: rasterize(big, 1920, 1080)),
        ("trace 200 player masks", lambda: [trace_contours(m) for m in masks]),
        ("trace 256x256 noise", lambda: trace_contours(noisy)),
        ("120 pastes + export, 1080p frame", paste_frame),
    ]


def best_of(fn, repeat):
    fn()  # warm caches
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)
    backends = geometry.available()
    if "cython" not in backends:
        print("compiled kernels are not built; only the numpy backend will be timed")
    rows = []
    for name, fn in workloads():
        timings = {}
        for b in backends:
            prev = geometry.use_backend(b)
            try:
                timings[b] = best_of(fn, args.repeat)
            finally:
                geometry.use_backend(prev)
        rows.append((name, timings))

    header = f"{'workload':34s}" + "".join(f"{b:>12s}" for b in backends)
    if len(backends) > 1:
        header += f"{'speedup':>10s}"
    print(header)
    for name, t in rows:
        line = f"{name:34s}" + "".join(f"{t[b] * 1e3:10.2f}ms" for b in backends)
        if len(backends) > 1:
            line += f"{t['python'] / t['cython']:9.1f}x"
        print(line)


if __name__ == "__main__":
    main()
