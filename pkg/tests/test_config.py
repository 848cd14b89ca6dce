import pytest
import yaml

from nematic_gamma.config import ConfigError, RunConfig, from_dict, load


def test_defaults_are_valid():
    cfg = load()
    assert cfg.regime.beta == 1.0
    assert cfg.h == pytest.approx(0.0625)
    (reg,) = cfg.regimes()
    assert reg.eta == 0.3


def test_nested_override_and_unit_scaling():
    cfg = from_dict({"particle": {"radius": 2.0, "position_radii": [1, 0, 0]},
                     "grid": {"box_half_radii": 2.0}})
    lo, hi = cfg.box()
    assert lo == [-2.0, -4.0, -4.0] and hi == [6.0, 4.0, 4.0]
    assert cfg.shape().r0() == pytest.approx(2.0)


def test_eta_list_gives_a_schedule():
    cfg = from_dict({"regime": {"eta_list": [0.3, 0.2, 0.1]}})
    assert [r.eta for r in cfg.regimes()] == [0.3, 0.2, 0.1]


@pytest.mark.parametrize("data, msg", [
    ({"regime": {"betta": 1}}, "regime.betta"),
    ({"regime": {"eta": 1.5}}, "outside"),
    ({"regime": {"gamma": 0.3}}, "gamma"),
    ({"material": {"a": -1}}, "positive"),
    ({"solver": {"step_rule": "newton"}}, "step_rule"),
    ({"particle": {"shape": "cube"}}, "cube"),
    ({"grid": "fine"}, "mapping"),
])
def test_bad_configs_are_rejected(data, msg):
    with pytest.raises(ConfigError, match=msg):
        from_dict(data)


def test_dump_round_trip(tmp_path):
    cfg = from_dict({"regime": {"beta": 0.5, "eta": 0.2}})
    p = tmp_path / "resolved.yaml"
    cfg.dump(p, extra={"command": "relax"})
    data = yaml.safe_load(p.read_text())
    assert data["_run"]["command"] == "relax"
    assert load(p) == cfg


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1,\n")
    with pytest.raises(ConfigError):
        load(bad)


def test_runconfig_is_a_dataclass():
    assert RunConfig().validate().threads == 1
