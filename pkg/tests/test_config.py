import json

import pytest

from pcmlogic.config import DEFAULT_PRESET, load_config, load_preset
from pcmlogic.errors import ConfigError


def test_presets_differ_only_in_cp_and_timing():
    a, b = load_preset("experimental-setup").to_dict(), load_preset("integrated").to_dict()
    assert a["device"] == b["device"] and a["variability"] == b["variability"]
    diff = {k for k in a["circuit"] if a["circuit"][k] != b["circuit"][k]}
    assert diff == {"c_p"}
    assert a["timing"] != b["timing"]
    assert b["circuit"]["c_p"] < a["circuit"]["c_p"]


def test_default():
    p = load_config()
    assert p.name == DEFAULT_PRESET
    assert p.setup.v_app == 1.2 and p.setup.timing.ramp_rise == 70e-6


def test_override_file(tmp_path):
    f = tmp_path / "c.json"
    f.write_text(json.dumps({"preset": "integrated", "device": {"v_th": 0.9}, "circuit": {"r_fix": 20e3}}))
    p = load_config(f)
    assert p.device.v_th == 0.9 and p.setup.r_fix == 20e3 and p.setup.c_p == load_preset("integrated").setup.c_p
    assert load_config(f, preset="experimental-setup").setup.c_p == load_preset().setup.c_p


@pytest.mark.parametrize("payload", [
    {"devices": {}},
    {"circuit": {"cp": 1}},
    {"timing": {"rise": 1}},
    {"device": {"r_on": 1e7}},
    {"variability": {"sigma_v_th": 2.0}},
    {"preset": "nope"},
    [1, 2],
])
def test_bad_configs(tmp_path, payload):
    f = tmp_path / "c.json"
    f.write_text(json.dumps(payload))
    with pytest.raises(ConfigError):
        load_config(f)


def test_unreadable(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    (tmp_path / "x.json").write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "x.json")
