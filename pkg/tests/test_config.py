import json

import pytest

from config import Config, Scheme, V2Choice, load_experiment, parse_experiment, steps_for
from errors import ConfigurationError


def minimal(**overrides):
    data = {"name": "t", "schemes": [{"scheme": "split_omega1", "tau": 0.006}]}
    data.update(overrides)
    return data


def test_defaults():
    cfg = parse_experiment(minimal())
    assert cfg.mesh.nx_fine == 100 and cfg.mesh.nx_coarse == 10
    assert cfg.T == pytest.approx(0.6)
    assert cfg.reference.tau == pytest.approx(1e-4)
    assert cfg.spaces.v2_choice == V2Choice.CHOICE2
    assert cfg.schemes[0].scheme == Scheme.SPLIT_OMEGA1
    assert cfg.snapshot_times == [0.3, 0.6]
    assert tuple(cfg.error_window) == (0.2, 0.6)


def test_empty_scheme_list():
    with pytest.raises(ConfigurationError):
        parse_experiment(minimal(schemes=[]))


def test_tau_must_divide_reference():
    with pytest.raises(ConfigurationError) as exc:
        parse_experiment(minimal(schemes=[{"scheme": "implicit_26", "tau": 0.00015}]))
    assert "not an integer multiple" in str(exc.value)


def test_invalid_fields_are_named():
    with pytest.raises(ConfigurationError) as exc:
        parse_experiment(minimal(mesh={"nx_fine": 100, "nx_coarse": 0}))
    assert "mesh.nx_coarse" in exc.value.fields
    with pytest.raises(ConfigurationError) as exc:
        parse_experiment(minimal(schemes=[{"scheme": "split_omega1", "tau": -1.0}]))
    assert "schemes.0.tau" in exc.value.fields


def test_unknown_keys_rejected():
    with pytest.raises(ConfigurationError):
        parse_experiment(minimal(colour="red"))


def test_indivisible_mesh():
    with pytest.raises(ConfigurationError):
        parse_experiment(minimal(mesh={"nx_fine": 100, "nx_coarse": 7}))


def test_unknown_case():
    with pytest.raises(ConfigurationError) as exc:
        parse_experiment(minimal(medium={"case": "case9"}))
    assert "medium.case" in exc.value.fields


def test_snapshot_outside_horizon():
    with pytest.raises(ConfigurationError):
        parse_experiment(minimal(snapshot_times=[0.7]))


def test_steps_for():
    assert steps_for(0.6, 0.006) == 100
    assert steps_for(0.6, 1e-4) == 6000
    with pytest.raises(ConfigurationError):
        steps_for(0.001, 1.0)


def test_load_experiment_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_experiment(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigurationError):
        load_experiment(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps(minimal()))
    assert load_experiment(good).name == "t"


@pytest.mark.parametrize("path", sorted(Config.CONFIGS_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_parse(path):
    cfg = load_experiment(path)
    assert cfg.schemes


def test_f0_one_config_overrides_amplitude():
    cfg = load_experiment(Config.CONFIGS_DIR / "case2_f0_one.json")
    assert cfg.source.f0 == 1.0
    assert cfg.source.amplitude not in (None, 0.0)
