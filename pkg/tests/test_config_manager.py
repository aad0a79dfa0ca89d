import pytest

from tritraj import config_manager
from tritraj.config_manager import DEFAULTS, load_config, parse_value, update_config
from tritraj.errors import ConfigError


@pytest.fixture
def user_file(tmp_path, monkeypatch):
    path = tmp_path / "user" / "config.toml"
    monkeypatch.setattr(config_manager, "CONFIG_FILE", path)
    return path


def test_defaults_without_files(user_file):
    config = load_config()
    assert config == DEFAULTS
    assert config is not DEFAULTS
    config["planner"]["degree"] = 9
    assert DEFAULTS["planner"]["degree"] == 3


def test_layers_merge_per_key(user_file, tmp_path):
    user_file.parent.mkdir(parents=True)
    user_file.write_text("[planner]\ndegree = 5\n", encoding="utf-8")
    run = tmp_path / "run.toml"
    run.write_text("[planner]\nworkers = 4\n[solver]\nbackend = \"slsqp\"\n", encoding="utf-8")
    config = load_config(run)
    assert config["planner"]["degree"] == 5
    assert config["planner"]["workers"] == 4
    assert config["planner"]["warm_start"] is True
    assert config["solver"]["backend"] == "slsqp"
    assert config["solver"]["feas_tol"] == DEFAULTS["solver"]["feas_tol"]


def test_missing_explicit_file(user_file, tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_malformed_file(user_file):
    user_file.parent.mkdir(parents=True)
    user_file.write_text("[planner\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_config()


def test_parse_value():
    assert parse_value("3") == 3
    assert parse_value("0.5") == 0.5
    assert parse_value("true") is True
    assert parse_value("slsqp") == "slsqp"


def test_update_config_writes_user_file(user_file):
    update_config("planner.degree", "5")
    update_config("objective.time_cap", "900")
    config = load_config()
    assert config["planner"]["degree"] == 5
    assert config["objective"]["time_cap"] == 900.0
    assert isinstance(config["objective"]["time_cap"], float)


@pytest.mark.parametrize("key,value", [
    ("planner.colour", "1"),
    ("nothing.degree", "1"),
    ("planner.degree", "high"),
    ("planner.degree", "true"),
    ("planner.warm_start", "1"),
])
def test_update_config_rejects(user_file, key, value):
    with pytest.raises(ConfigError):
        update_config(key, value)
    assert not user_file.exists()
