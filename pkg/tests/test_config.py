import numpy as np
import pytest
import yaml

from decom_alm import config
from decom_alm.errors import ConfigurationError
from decom_alm.liability import EconomicParams


def test_defaults():
    cfg = config.load()
    assert cfg.econ() == EconomicParams()
    assert cfg.model().kind == "bs"
    assert cfg.objective() == config.OBJECTIVE_PRESETS["g3"]
    np.testing.assert_array_equal(cfg.controls(), np.linspace(0, 1, 21))
    assert cfg.n_paths == 50_000 and cfg.n_inner == 4000
    assert len(cfg.schedule()) == 420


def test_file_then_overrides(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("economics: {a_L: 0.03}\nseed: 5\n")
    cfg = config.load(path, {"seed": 9, "objective.preset": "g1"})
    assert cfg.econ().a_L == 0.03
    assert cfg.seed == 9
    assert cfg.objective().c3 == 0.0


@pytest.mark.parametrize("override", [{"grid.a_stepp": 1}, {"nonsense": 1}, {"economics.r.x": 1}])
def test_unknown_override(override):
    with pytest.raises(ConfigurationError):
        config.load(None, override)


def test_unknown_file_key(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("model: {bs: {mu: 0.07, vol: 0.2}}\n")
    with pytest.raises(ConfigurationError, match="model.bs.vol"):
        config.load(path)


def test_mmm_s0_required():
    with pytest.raises(ConfigurationError, match="model.mmm.s0"):
        config.load(None, {"model.kind": "mmm"}).model()


def test_schema_version(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("schema_version: 2\n")
    with pytest.raises(ConfigurationError):
        config.load(path)


def test_relative_paths_resolve_against_config(tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("fit: {snapshots_csv: data/s.csv}\n")
    assert config.load(path)["fit"]["snapshots_csv"] == str(tmp_path / "data" / "s.csv")


def test_custom_objective():
    cfg = config.load(None, {"objective.preset": "custom", "objective.c2": 0.3, "objective.c3": 0.0, "objective.scale": 1.0})
    obj = cfg.objective()
    assert (obj.c2, obj.c3, obj.scale) == (0.3, 0.0, 1.0)


def test_bad_integer():
    with pytest.raises(ConfigurationError):
        _ = config.load(None, {"simulation.n_paths": 1.5}).n_paths


def test_dump_excludes_placement(tmp_path):
    cfg = config.load(None, {"workers": 8, "out": str(tmp_path)})
    cfg.dump(tmp_path / "r.yaml")
    dumped = yaml.safe_load((tmp_path / "r.yaml").read_text())
    assert "workers" not in dumped and "out" not in dumped
    assert config.load(tmp_path / "r.yaml").resolved() == cfg.resolved()
