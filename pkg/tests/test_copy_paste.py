import math

import numpy as np
import pytest

from tscopypaste.coco_io import IdAllocator, InstanceAnnotation
from tscopypaste.config import AugmentConfig
from tscopypaste.copy_paste import (CompositingError, LiveInstance, augment_with_copy_paste,
                                    build_constraint, paste_one, placement_region,
                                    sample_instance_counts, sample_placement)
from tscopypaste.geometry import BinaryMask, rasterize
from tscopypaste.object_bank import ObjectBank, ObjectCrop
from tscopypaste.rng import RngStream


def square_crop(crop_id, size, value=255, category_id=1):
    return ObjectCrop(crop_id, category_id, np.full((size, size, 3), value, np.uint8),
                      BinaryMask(np.ones((size, size), bool)), 1, crop_id)


def rect_instance(local_id, x, y, w, h, image_w=100, image_h=100):
    poly = (x, y, x + w, y, x + w, y + h, x, y + h)
    ann = InstanceAnnotation(local_id, 1, 1, (poly,), (x, y, w, h), float(w * h))
    return LiveInstance.from_annotation(ann, image_w, image_h, local_id)


class TestConstraint:
    def test_full_hd_literal_is_empty(self):
        c = build_constraint(1920, 1080, 256, "literal")
        assert c.x_interval == (256, 1664)
        assert c.y_interval == (1216, 796)
        assert not c.feasible

    def test_full_hd_band(self):
        c = build_constraint(1920, 1080, 256)
        assert c.y_interval == (284, 796) and c.feasible

    def test_square_literal_single_row(self):
        c = build_constraint(1024, 1024, 256, "literal")
        assert c.y_interval == (768, 768) and c.feasible

    def test_band_only_replaces_empty_range(self):
        c = build_constraint(1000, 3000, 100)
        assert c.y_interval == (600, 1600)

    def test_odd_sizes_are_half_integers(self):
        c = build_constraint(1025, 2001, 0, "literal")
        assert c.y_interval == (512.5, 1000.5)
        assert placement_region(c, 1, 1, 1025, 2001)[2:] == (513, 1000)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            build_constraint(10, 10, -1)
        with pytest.raises(ValueError):
            build_constraint(10, 10, 0, "somewhere")

    def test_sample_inside_constraint(self):
        c = build_constraint(1920, 1080, 256)
        rng = RngStream.from_seed(3)
        for _ in range(10_000):
            x, y = sample_placement(c, 40, 90, 1920, 1080, rng)
            assert c.contains(x, y)
            assert x + 40 <= 1920 and y + 90 <= 1080
        assert rng.draws == 20_000

    def test_sample_examples(self):
        c = build_constraint(1024, 1024, 256, "literal")
        rng = RngStream.from_seed(0)
        x, y = sample_placement(c, 10, 10, 1024, 1024, rng)
        assert y == 768 and 256 <= x <= 768
        # 768 + 100 <= 1024 still fits; 768 + 300 does not
        x, y = sample_placement(c, 100, 100, 1024, 1024, rng)
        assert y == 768 and 256 <= x <= 768
        assert sample_placement(c, 10, 300, 1024, 1024, rng) is None
        narrow = build_constraint(500, 2000, 256, "literal")
        assert narrow.x_interval == (256, 244) and not narrow.feasible
        assert sample_placement(narrow, 5, 5, 500, 2000, rng) is None
        assert sample_placement(build_constraint(1920, 1080, 256, "literal"),
                                10, 10, 1920, 1080, rng) is None

    def test_sample_covers_region_uniformly(self):
        c = build_constraint(40, 40, 0, "literal")  # y in [20, 20], x in [0, 40]
        rng = RngStream.from_seed(8)
        xs = np.array([sample_placement(c, 10, 10, 40, 40, rng)[0] for _ in range(10_000)])
        assert xs.min() == 0 and xs.max() == 30
        counts = np.bincount(xs, minlength=31)
        p = 1 / 31
        assert np.all(np.abs(counts - 10_000 * p) <= 4 * math.sqrt(10_000 * p * (1 - p)))


class TestCounts:
    def test_degenerate_range(self):
        rng = RngStream.from_seed(1)
        assert sample_instance_counts([1, 2], 7, 7, rng) == {1: 7, 2: 7}

    def test_bad_range(self):
        with pytest.raises(ValueError):
            sample_instance_counts([1], 5, 4, RngStream.from_seed(1))

    def test_uniform_over_range(self):
        rng = RngStream.from_seed(2)
        draws = [sample_instance_counts([1], 5, 15, rng)[1] for _ in range(10_000)]
        counts = np.bincount(draws, minlength=16)[5:]
        assert len(counts) == 11 and counts.min() > 0
        p = 1 / 11
        assert np.all(np.abs(counts - 10_000 * p) <= 4 * math.sqrt(10_000 * p * (1 - p)))
        assert abs(np.mean(draws) - 10) < 0.1


class TestPasteOne:
    def setup_method(self):
        self.image = np.zeros((100, 100, 3), np.uint8)

    def test_no_overlap(self):
        inst = rect_instance(1, 0, 0, 20, 20)
        img, out, ev = paste_one(self.image, [inst], square_crop(1, 10), (50, 50),
                                 IdAllocator(100))
        assert [i.local_id for i in out] == [1, 100]
        assert out[0].area == 400 and ev.occluded_ids == () and ev.dropped_ids == ()
        assert out[0].segmentation == inst.segmentation  # untouched annotation kept verbatim
        assert ev.pasted_area == 100 and ev.resulting_annotation_id == 100

    def test_exact_cover_is_dropped(self):
        inst = rect_instance(1, 30, 30, 10, 10)
        _, out, ev = paste_one(self.image, [inst], square_crop(1, 10), (30, 30), IdAllocator(5))
        assert [i.local_id for i in out] == [5]
        assert ev.occluded_ids == ((1, 100, 0),) and ev.dropped_ids == (1,)

    def test_partial_overlap_loses_intersection(self):
        inst = rect_instance(1, 10, 10, 40, 30)
        _, out, ev = paste_one(self.image, [inst], square_crop(1, 20), (40, 30), IdAllocator(9))
        overlap = 10 * 10  # x in [40, 50), y in [30, 40)
        assert out[0].area == 1200 - overlap
        assert ev.occluded_ids == ((1, 1200, 1100),)
        assert out[0].edited
        ann = out[0].to_annotation(1, 1)
        assert ann.area == 1100.0 and ann.bbox == (10, 10, 40, 30)
        assert np.count_nonzero(rasterize(ann.segmentation, 100, 100).bits) == 1100

    def test_visibility_threshold_and_min_pixels(self):
        inst = rect_instance(1, 0, 0, 10, 10)
        # 91 of 100 pixels covered leaves 9 < 10 visible
        bits = np.ones((10, 10), bool)
        bits[7:, 7:] = False
        crop = ObjectCrop(1, 1, np.zeros((10, 10, 3), np.uint8), BinaryMask(bits), 1, 1)
        _, out, ev = paste_one(self.image, [inst], crop, (0, 0), IdAllocator(2))
        assert ev.dropped_ids == (1,)
        _, out, ev = paste_one(self.image, [inst], crop, (0, 0), IdAllocator(2),
                               visibility_threshold=0.05, min_visible_pixels=1)
        assert ev.dropped_ids == () and out[0].area == 9

    def test_pixel_provenance(self):
        rng = np.random.default_rng(0)
        image = rng.integers(0, 256, size=(60, 80, 3), dtype=np.uint8)
        bits = rng.random((15, 12)) < 0.6
        bits[0, :] = bits[-1, :] = True
        bits[:, 0] = bits[:, -1] = True
        patch = rng.integers(0, 256, size=(15, 12, 3), dtype=np.uint8)
        crop = ObjectCrop(4, 2, patch, BinaryMask(bits), 1, 1)
        out, _, _ = paste_one(image, [], crop, (33, 21), IdAllocator(1))
        for j in range(60):
            for i in range(80):
                inside = 33 <= i < 45 and 21 <= j < 36 and bits[j - 21, i - 33]
                want = patch[j - 21, i - 33] if inside else image[j, i]
                assert np.array_equal(out[j, i], want)

    def test_inputs_untouched(self):
        inst = rect_instance(1, 10, 10, 40, 30)
        before = inst.bits.copy()
        paste_one(self.image, [inst], square_crop(1, 20), (40, 30), IdAllocator(9))
        assert np.array_equal(inst.bits, before) and inst.area == 1200
        assert not self.image.any()

    def test_off_raster_position(self):
        with pytest.raises(CompositingError):
            paste_one(self.image, [], square_crop(1, 20), (90, 0), IdAllocator(1))

    def test_occlusion_conservation(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            instances = [rect_instance(k + 1, *rng.integers(0, 60, 2), *rng.integers(5, 40, 2))
                         for k in range(4)]
            crop = square_crop(1, int(rng.integers(5, 30)))
            pos = tuple(int(v) for v in rng.integers(0, 100 - crop.width, 2))
            cover = np.zeros((100, 100), bool)
            cover[pos[1]:pos[1] + crop.height, pos[0]:pos[0] + crop.width] = True
            _, out, ev = paste_one(self.image, instances, crop, pos, IdAllocator(50),
                                   visibility_threshold=0.0, min_visible_pixels=0)
            after = {i.local_id: i for i in out}
            for inst in instances:
                full = inst.full_mask(100, 100).bits
                lost = int(np.count_nonzero(full & cover))
                assert after[inst.local_id].area == inst.area - lost
                assert np.array_equal(after[inst.local_id].full_mask(100, 100).bits,
                                      full & ~cover)


def make_bank(rng, n=6):
    crops = []
    for k in range(n):
        h, w = int(rng.integers(8, 30)), int(rng.integers(5, 20))
        bits = rng.random((h, w)) < 0.7
        bits[0, :] = bits[-1, :] = bits[:, 0] = bits[:, -1] = True
        patch = rng.integers(0, 256, size=(h, w, 3), dtype=np.uint8)
        crops.append(ObjectCrop(k + 1, 1 + k % 2, patch, BinaryMask(bits), 1, k + 1))
    return ObjectBank(tuple(crops), {1: "player", 2: "ball"})


class TestAugment:
    config = AugmentConfig(margin=20, count_range=(3, 6))

    def run(self, seed):
        rng = np.random.default_rng(1)
        bank = make_bank(rng)
        image = rng.integers(0, 256, size=(120, 200, 3), dtype=np.uint8)
        instances = [rect_instance(1, 50, 50, 40, 40, 200, 120)]
        return augment_with_copy_paste(image, instances, bank, self.config,
                                       RngStream.from_seed(seed), IdAllocator(10))

    def test_counts_add_up(self):
        _, instances, events, summary = self.run(0)
        for cid in (1, 2):
            assert 3 <= summary.requested[cid] <= 6
            assert summary.pasted[cid] + summary.skipped[cid] == summary.requested[cid]
        assert len(events) == sum(summary.pasted.values())
        assert len(instances) == 1 + len(events) - summary.dropped
        for ev in events:
            assert summary.constraint.contains(*ev.position)

    def test_deterministic(self):
        a, b = self.run(5), self.run(5)
        assert np.array_equal(a[0], b[0])
        assert [e.to_json() for e in a[2]] == [e.to_json() for e in b[2]]
        assert not np.array_equal(a[0], self.run(6)[0])

    def test_default_config_on_full_hd(self):
        rng = np.random.default_rng(2)
        bank = make_bank(rng, 10)
        image = np.zeros((1080, 1920, 3), np.uint8)
        for seed in range(5):
            _, _, events, summary = augment_with_copy_paste(
                image, [], bank, AugmentConfig(), RngStream.from_seed(seed), IdAllocator(1))
            assert 0 <= len(events) <= 30
            assert all(5 <= n <= 15 for n in summary.requested.values())
            assert all(256 <= e.position[0] <= 1664 for e in events)

    def test_infeasible_constraint_skips_everything(self):
        rng = np.random.default_rng(1)
        bank = make_bank(rng)
        image = np.zeros((108, 192, 3), np.uint8)
        cfg = AugmentConfig(margin=26, constraint_mode="literal")
        out, inst, events, summary = augment_with_copy_paste(
            image, [], bank, cfg, RngStream.from_seed(0), IdAllocator(1))
        assert events == [] and not out.any()
        assert summary.skipped == summary.requested
