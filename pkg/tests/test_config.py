import json

import pytest

from infomax.config import (ChaseRun, ConfigError, SpikingRun, build, canonical, load_config,
                            save_config)


def write(tmp_path, text, name="cfg.json"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_file_fills_defaults(tmp_path):
    cfg = load_config(write(tmp_path, '{"steps": 10}'), "run-chase")
    assert cfg == ChaseRun(steps=10)
    assert load_config(write(tmp_path, "{}"), "run-spiking") == SpikingRun()


def test_unknown_key_named(tmp_path):
    with pytest.raises(ConfigError, match="stepz"):
        load_config(write(tmp_path, '{"stepz": 10}'), "run-chase")


def test_malformed_file_names_line(tmp_path):
    with pytest.raises(ConfigError, match="line 3"):
        load_config(write(tmp_path, '{\n  "nx": 3,\n  "ny": ,\n}'), "run-chase")
    with pytest.raises(ConfigError, match="JSON object"):
        load_config(write(tmp_path, "[1, 2]"), "run-chase")


def test_two_timescale_rule():
    with pytest.raises(ConfigError, match="two-timescale"):
        build("run-chase", {"eta_p": 0.5, "eta_q": 0.1})
    with pytest.raises(ConfigError, match="two-timescale"):
        build("run-meanfield", {"eta_code": 0.5, "eta_pred": 0.5})


def test_rates_positive_and_types_checked():
    with pytest.raises(ConfigError, match="eta_p"):
        build("run-chase", {"eta_p": 0.0})
    with pytest.raises(ConfigError, match="steps"):
        build("run-chase", {"steps": 1.5})
    with pytest.raises(ConfigError, match="spike_gated"):
        build("run-spiking", {"spike_gated": "maybe"})
    with pytest.raises(ConfigError, match="px"):
        build("run-chase", {"nx": 2, "px": [0.5, 0.6]})
    assert build("run-spiking", {"spike_gated": "false"}).spike_gated is False
    assert build("run-chase", {"steps": "7"}).steps == 7


@pytest.mark.parametrize("command,values", [
    ("run-chase", {"nx": 2, "ny": 2, "steps": 5, "px": [0.25, 0.75]}),
    ("run-meanfield", {"n": 3}),
    ("run-filter", {"env": "configs/tiny.json", "events": 3}),
    ("run-spiking", {"spike_gated": False, "gamma": 0.9}),
    ("capacity", {"px": [0.5, 0.5], "ny": 2}),
])
def test_round_trip_is_canonical(tmp_path, command, values):
    src = write(tmp_path, json.dumps(values))
    cfg = load_config(src, command)
    out = tmp_path / "saved.json"
    save_config(cfg, out)
    assert out.read_text() == canonical(cfg)
    assert load_config(out, command) == cfg
    save_config(load_config(out, command), tmp_path / "again.json")
    assert (tmp_path / "again.json").read_text() == out.read_text()


def test_validate_takes_no_keys():
    assert build("validate", {}) is None
    with pytest.raises(ConfigError):
        build("validate", {"seed": 1})
