import json

import pytest

from hiersal.config import RunConfig
from hiersal.estimators import HierarchicalPartitionSaliency, SaliencyOverHierarchy
from hiersal.exceptions import ConfigError


def test_round_trip(tmp_path):
    cfg = RunConfig(model="hp", fusion="lbp", regions=[60, 4], boundary_prior=False)
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg.to_dict()))
    assert RunConfig.load(p) == cfg
    assert RunConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_level_targets():
    assert RunConfig(model="hp").level_targets == [100, 50, 25, 12, 6, 3]
    assert RunConfig(model="hp", region_counts=[40, 10]).level_targets == [40, 10]


def test_overrides_skip_none():
    cfg = RunConfig().updated(model="hp", fusion=None, levels=4)
    assert cfg.model == "hp" and cfg.fusion == "mean" and cfg.levels == 4


@pytest.mark.parametrize(
    "bad",
    [
        {"model": "x"},
        {"fusion": "sum"},
        {"regions": [3, 100]},
        {"levels": 1},
        {"sigma_s2": 0},
        {"model": "soh", "hierarchy": "ucm"},
        {"unknown_key": 1},
        {"region_counts": [3, 10]},
    ],
)
def test_invalid(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_unreadable_file(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    with pytest.raises(ConfigError):
        RunConfig.load(p)


def test_estimators_follow_config():
    hp = RunConfig(model="hp", contrast="local", levels=4).estimator()
    assert isinstance(hp, HierarchicalPartitionSaliency)
    assert (hp.contrast, hp.n_levels) == ("local", 4)
    soh = RunConfig(soh_regions=50).estimator()
    assert isinstance(soh, SaliencyOverHierarchy) and soh.initial_regions == 50
