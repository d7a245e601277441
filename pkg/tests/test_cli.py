import json

import pytest

from tscopypaste.cli import category_color, main
from tscopypaste.coco_io import load_dataset

from synth import make_dataset


@pytest.fixture
def scene(tmp_path):
    path = make_dataset(tmp_path, n_images=2, seed=3)
    return tmp_path, path, tmp_path / "images"


def test_extract_then_augment(scene, capsys):
    root, path, images = scene
    assert main(["extract-bank", "--annotations", str(path), "--images", str(images),
                 "--out", str(root / "bank")]) == 0
    assert "crops" in capsys.readouterr().out
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"duplication_factor": 2, "margin": 40, "count_range": [1, 2]}))
    assert main(["augment", "--annotations", str(path), "--images", str(images),
                 "--bank", str(root / "bank"), "--config", str(cfg), "--out", str(root / "out"),
                 "--seed", "4", "--pure-python"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["images_written"] == 4 and report["seed"] == 4
    assert report["backend"] == "python"
    assert main(["validate", "--annotations", str(root / "out" / "annotations.json"),
                 "--images", str(root / "out" / "images")]) == 0


def test_validate_reports_violations(scene, capsys):
    root, path, images = scene
    raw = json.loads(path.read_text())
    raw["annotations"][0]["area"] = 0
    bad = root / "bad.json"
    bad.write_text(json.dumps(raw))
    assert main(["validate", "--annotations", str(bad)]) == 1
    assert "non-positive-area" in capsys.readouterr().out


def test_runtime_errors(scene, capsys):
    root, path, images = scene
    (root / "broken.json").write_text("{")
    assert main(["validate", "--annotations", str(root / "broken.json")]) == 3
    assert main(["stats", "--annotations", str(root / "missing.json")]) == 3
    assert main(["augment", "--annotations", str(path), "--images", str(images),
                 "--bank", str(root / "nobank"), "--out", str(root / "out")]) == 3
    assert "error:" in capsys.readouterr().err


def test_strict_mode_error_is_runtime(scene):
    root, path, images = scene
    # default config pastes every category, but no bank means no crops
    assert main(["augment", "--annotations", str(path), "--images", str(images),
                 "--out", str(root / "out")]) == 3


def test_usage_errors():
    with pytest.raises(SystemExit) as err:
        main(["validate", "--annotations", "x.json", "--bogus"])
    assert err.value.code == 2
    with pytest.raises(SystemExit) as err:
        main([])
    assert err.value.code == 2


def test_stats_sums(scene, capsys):
    root, path, _ = scene
    assert main(["stats", "--annotations", str(path), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    d = load_dataset(path)
    assert stats["annotations"] == len(d.annotations)
    assert sum(stats["per_category"].values()) == len(d.annotations)
    assert sum(stats["instances_per_image"].values()) == len(d.images)
    q = stats["area_quartiles"]
    assert q["min"] <= q["q1"] <= q["median"] <= q["q3"] <= q["max"]
    assert main(["stats", "--annotations", str(path)]) == 0
    assert "area quartiles" in capsys.readouterr().out


def test_stats_with_audit(scene, capsys):
    root, path, images = scene
    main(["extract-bank", "--annotations", str(path), "--images", str(images),
          "--out", str(root / "bank")])
    cfg = root / "cfg.json"
    cfg.write_text(json.dumps({"duplication_factor": 2, "margin": 40}))
    main(["augment", "--annotations", str(path), "--images", str(images),
          "--bank", str(root / "bank"), "--config", str(cfg), "--out", str(root / "out")])
    capsys.readouterr()
    assert main(["stats", "--annotations", str(root / "out" / "annotations.json"),
                 "--audit", str(root / "out" / "audit.jsonl"), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    for s in stats["paste_requests_per_image"].values():
        assert 5 <= s["min"] <= s["mean"] <= s["max"] <= 15


def test_preview(scene, capsys):
    root, path, images = scene
    assert main(["preview", "--annotations", str(path), "--images", str(images),
                 "--out", str(root / "pv"), "--count", "0"]) == 0
    assert not (root / "pv").exists()
    assert main(["preview", "--annotations", str(path), "--images", str(images),
                 "--out", str(root / "pv"), "--count", "5"]) == 0
    assert sorted(p.name for p in (root / "pv").iterdir()) == ["preview_1.png", "preview_2.png"]
    assert main(["preview", "--annotations", str(path), "--images", str(images),
                 "--out", str(root / "pv"), "--count", "-1"]) == 2


def test_category_colors_are_stable():
    assert category_color(1) == category_color(1)
    assert category_color(1) != category_color(2)
    assert all(0 <= v <= 255 for v in category_color(7))


def test_extract_empty_dataset_warns(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"images": [], "annotations": [],
                                "categories": [{"id": 1, "name": "player"}]}))
    assert main(["extract-bank", "--annotations", str(path), "--images", str(tmp_path),
                 "--out", str(tmp_path / "bank")]) == 0
    assert "empty" in capsys.readouterr().err
    assert (tmp_path / "bank" / "manifest.json").exists()


def test_extract_missing_file(tmp_path):
    assert main(["extract-bank", "--annotations", str(tmp_path / "nope.json"),
                 "--images", str(tmp_path), "--out", str(tmp_path / "bank")]) == 3


def test_augment_identity_and_default_counts(scene, capsys):
    root, path, images = scene
    cfg = root / "identity.json"
    cfg.write_text(json.dumps({"duplication_factor": 1, "count_range": [0, 0],
                               "gridmask.apply_probability": 0.0,
                               "randaugment.num_ops": 0}))
    assert main(["augment", "--annotations", str(path), "--images", str(images),
                 "--config", str(cfg), "--out", str(root / "same")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["images_written"] == 2
    assert report["output_annotations"] == report["input_annotations"]


def test_augment_literal_mode_skips_everything(scene, capsys):
    root, path, images = scene
    main(["extract-bank", "--annotations", str(path), "--images", str(images),
          "--out", str(root / "bank")])
    capsys.readouterr()
    cfg = root / "literal.json"
    cfg.write_text(json.dumps({"duplication_factor": 2, "constraint_mode": "literal"}))
    assert main(["augment", "--annotations", str(path), "--images", str(images),
                 "--bank", str(root / "bank"), "--config", str(cfg),
                 "--out", str(root / "out")]) == 0
    captured = capsys.readouterr()
    report = json.loads(captured.out)
    assert report["instances_pasted"] == 0
    assert report["instances_skipped"] == report["instances_requested"] > 0
    assert "100% skip rate" in captured.err


def test_validate_one_bad_bbox(scene, capsys):
    root, path, _ = scene
    raw = json.loads(path.read_text())
    raw["annotations"][0]["bbox"][0] += 5
    bad = root / "bad.json"
    bad.write_text(json.dumps(raw))
    assert main(["validate", "--annotations", str(bad)]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 2 and "bbox-mismatch" in lines[0]


def test_stats_empty_and_small(tmp_path, capsys):
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"images": [], "annotations": [],
                                "categories": [{"id": 1, "name": "player"}]}))
    assert main(["stats", "--annotations", str(path), "--json"]) == 0
    stats = json.loads(capsys.readouterr().out)
    assert stats["images"] == 0 and stats["annotations"] == 0
    assert stats["per_category"] == {"player": 0}


def test_preview_leaves_unannotated_image_alone(tmp_path):
    from tscopypaste.raster_io import load_rgb, save_png
    import numpy as np
    pixels = np.random.default_rng(0).integers(0, 256, size=(20, 30, 3), dtype=np.uint8)
    save_png(tmp_path / "a.png", pixels)
    path = tmp_path / "d.json"
    path.write_text(json.dumps({"images": [{"id": 1, "file_name": "a.png", "width": 30,
                                            "height": 20}],
                                "annotations": [], "categories": [{"id": 1, "name": "p"}]}))
    assert main(["preview", "--annotations", str(path), "--images", str(tmp_path),
                 "--out", str(tmp_path / "pv"), "--count", "1"]) == 0
    assert np.array_equal(load_rgb(tmp_path / "pv" / "preview_1.png"), pixels)
