import json

import pytest

from tscopypaste.config import AugmentConfig, ConfigError, identity_config, load_config


def test_defaults():
    c = AugmentConfig()
    assert c.duplication_factor == 20 and c.count_range == (5, 15) and c.margin == 256
    assert c.visibility_threshold == 0.10 and c.gridmask.keep_ratio == 0.6
    assert c.randaugment.num_ops == 2 and c.randaugment.magnitude == 7


def test_nested_and_dotted_keys():
    c = AugmentConfig.from_dict({"margin": 10, "gridmask": {"keep_ratio": 0.5},
                                 "randaugment.num_ops": 1})
    assert c.margin == 10 and c.gridmask.keep_ratio == 0.5 and c.randaugment.num_ops == 1


def test_dict_round_trip():
    c = AugmentConfig(seed=7, count_range=(1, 2), categories=(2,))
    assert AugmentConfig.from_dict(json.loads(json.dumps(c.to_dict()))) == c


@pytest.mark.parametrize("raw", [
    {"margins": 1},
    {"gridmask.nope": 1},
    {"gridmask": 3},
    {"count_range": [5, 4]},
    {"constraint_mode": "anywhere"},
    {"stage_order": ["gridmask"]},
    {"randaugment": {"op_pool": ["shear"]}},
    {"gridmask": {"keep_ratio": 1.0}},
    {"seed": -1},
    [],
])
def test_rejects(raw):
    with pytest.raises(ConfigError):
        AugmentConfig.from_dict(raw)


def test_load_config(tmp_path):
    path = tmp_path / "c.json"
    path.write_text('{"seed": 3}')
    assert load_config(path).seed == 3
    path.write_text("{")
    with pytest.raises(ConfigError):
        load_config(path)


def test_identity_config():
    c = identity_config(5)
    assert c.duplication_factor == 1 and c.count_range == (0, 0) and c.seed == 5
    assert c.gridmask.apply_probability == 0.0 and c.randaugment.num_ops == 0
