import copy
from pathlib import Path

import toml
from platformdirs import user_config_dir
from rich.console import Console

from tritraj.errors import ConfigError

console = Console(color_system="truecolor")

CONFIG_DIR = Path(user_config_dir("tritraj"))
CONFIG_FILE = CONFIG_DIR / "config.toml"

DEFAULTS = {
    "planner": {
        "degree": 3,
        "workers": 1,
        "prune_eps": 0.0,
        "warm_start": True,
    },
    "solver": {
        "backend": "ipm",
        "feas_tol": 1e-6,
        "opt_tol": 1e-5,
        "max_iter": 1000,
    },
    "objective": {
        "epsilon": 1e-6,
        "time_cap": 1200.0,
    },
    "transcription": {
        "dt_min": 1e-3,
        "dt_max": 1e4,
    },
    "output": {
        "samples_per_segment": 20,
    },
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | Path | None = None) -> dict:
    """
    Built-in defaults overlaid with the user config file, then with `path`
    when given. A missing user file is not an error; a missing `path` is.
    """
    config = copy.deepcopy(DEFAULTS)
    if CONFIG_FILE.exists():
        config = _merge(config, _read(CONFIG_FILE))
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        config = _merge(config, _read(path))
    return config


def _read(path: Path) -> dict:
    try:
        return toml.loads(path.read_text(encoding="utf-8"))
    except toml.TomlDecodeError as e:
        raise ConfigError(f"{path}: {e}") from None


def save_config(config: dict, path: str | Path | None = None) -> Path:
    path = Path(path) if path is not None else CONFIG_FILE
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        toml.dump(config, f)
    return path


def parse_value(raw: str):
    """Interpret a command-line value as a TOML scalar, falling back to a plain string."""
    try:
        return toml.loads(f"value = {raw}")["value"]
    except toml.TomlDecodeError:
        return raw


def update_config(dotted_key: str, raw_value: str, path: str | Path | None = None) -> dict:
    """Set `section.key` in the config file at `path` (the user file by default)."""
    section, _, key = dotted_key.partition(".")
    if section not in DEFAULTS or key not in DEFAULTS[section]:
        known = ", ".join(f"{s}.{k}" for s, keys in DEFAULTS.items() for k in keys)
        raise ConfigError(f"unknown config key {dotted_key!r}; known keys: {known}")
    value = parse_value(raw_value)
    expected = type(DEFAULTS[section][key])
    if expected is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if not isinstance(value, expected) or (expected is int and isinstance(value, bool)):
        raise ConfigError(f"{dotted_key} expects a {expected.__name__}, got {raw_value!r}")

    target = Path(path) if path is not None else CONFIG_FILE
    stored = _read(target) if target.exists() else {}
    stored.setdefault(section, {})[key] = value
    save_config(stored, target)
    console.print(f"[green][CONFIG][/green] {dotted_key} updated to {value!r} in {target}")
    return stored
