import pytest

from pivnav.config import ConfigError, ExperimentConfig, config_lines, load_config, write_resolved


def test_defaults_complete():
    cfg = ExperimentConfig()
    assert cfg.world == "navworld-mini"
    assert cfg.demos == 500
    assert cfg.demo_length == 20
    assert cfg.fdn_d == 64
    assert cfg.eval_episodes == 100
    assert cfg.eval_distances == (2, 5, 10)
    assert cfg.eval_demo_counts == (100, 300, 500)


def test_file_values_override_defaults(tmp_path):
    f = tmp_path / "exp.cfg"
    f.write_text("demos=12\nfdn_hidden=64,32\naugment_reverse=0\n# comment\n")
    cfg = load_config(f)
    assert cfg.demos == 12
    assert cfg.fdn_hidden == (64, 32)
    assert cfg.augment_reverse is False


def test_overrides_beat_file(tmp_path):
    f = tmp_path / "exp.cfg"
    f.write_text("demos=12\n")
    cfg = load_config(f, {"demos": "99"})
    assert cfg.demos == 99


def test_unknown_key_rejected(tmp_path):
    f = tmp_path / "exp.cfg"
    f.write_text("wrldd=navworld-mini\n")
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(f)
    with pytest.raises(ConfigError, match="unknown config key"):
        load_config(None, {"nope": "1"})


def test_include_support(tmp_path):
    base = tmp_path / "base.cfg"
    base.write_text("demos=7\nfdn_steps=11\n")
    child = tmp_path / "child.cfg"
    child.write_text(f"include base.cfg\nfdn_steps=22\n")
    cfg = load_config(child)
    assert cfg.demos == 7
    assert cfg.fdn_steps == 22


def test_include_cycle_detected(tmp_path):
    a = tmp_path / "a.cfg"
    a.write_text("include a.cfg\n")
    with pytest.raises(ConfigError, match="depth"):
        load_config(a)


def test_bad_boolean_rejected(tmp_path):
    f = tmp_path / "exp.cfg"
    f.write_text("augment_reverse=maybe\n")
    with pytest.raises(ConfigError, match="boolean"):
        load_config(f)


def test_resolved_round_trips(tmp_path):
    cfg = load_config(None, {"demos": "3", "eval_distances": "1,2"})
    path = write_resolved(cfg, tmp_path)
    again = load_config(path)
    assert again == cfg
    assert len(config_lines(cfg)) == len(ExperimentConfig.__dataclass_fields__)
