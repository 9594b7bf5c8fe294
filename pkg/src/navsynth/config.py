"""Run configuration: key = value files plus command-line overrides.

A config file looks like:

    # synthesis run
    graph = fixtures/grid.graph
    lexicon = fixtures/lexicon.txt
    templates = out/bank.txt
    backend = mock
    seed = 7
    count = 100
    out = out/dataset.jsonl

Relative paths are resolved against the config file's directory. The
PROBES_CONFIG environment variable names a default config file used when a
command gets no --config flag. Seeds are never defaulted from the clock;
commands that need one require it explicitly.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ConfigError

CONFIG_ENV_VAR = "PROBES_CONFIG"

_PATH_KEYS = {"graph", "lexicon", "templates", "backend_table", "out"}


@dataclass
class RunConfig:
    graph: str | None = None
    lexicon: str | None = None
    templates: str | None = None
    backend: str = "mock"
    backend_url: str | None = None
    backend_table: str | None = None
    backend_seed: int | None = None
    count: int = 1
    negatives_k: int = 3
    eps: float = 3.0
    seed: int | None = None
    out: str | None = None
    n_prompt: int = 4
    d_p: int = 8
    d_h: int = 8
    d_m: int = 8
    d_t: int = 8
    d_img: int = 16
    learning_rate: float = 0.3
    steps: int = 200

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"missing required config value {name!r}")
        if "count" in names and self.count < 1:
            raise ConfigError("count must be at least 1")

    def require_paths(self, *names: str) -> None:
        self.require(*names)
        for name in names:
            path = getattr(self, name)
            if not os.path.exists(path):
                raise ConfigError(f"{name} path does not exist: {path}")


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    kind = _FIELD_TYPES[key]
    if kind in ("int", "int | None"):
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"config value {key!r} must be an integer, got {raw!r}") from None
    if kind == "float":
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(f"config value {key!r} must be a number, got {raw!r}") from None
    return raw


def parse_config_text(text: str, base_dir: Path | None = None) -> dict:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        parsed = _coerce(key, value)
        if key in _PATH_KEYS and base_dir is not None and not os.path.isabs(parsed):
            parsed = str(base_dir / parsed)
        values[key] = parsed
    return values


def load_config(path: str | None, overrides: dict | None = None) -> RunConfig:
    """Config from file (explicit, or PROBES_CONFIG, or none) plus overrides."""
    values: dict = {}
    effective = path or os.environ.get(CONFIG_ENV_VAR)
    if effective:
        try:
            text = Path(effective).read_text(encoding="utf-8")
        except OSError as e:
            raise ConfigError(f"cannot read config file {effective}: {e}") from None
        values.update(parse_config_text(text, base_dir=Path(effective).resolve().parent))
    for key, value in (overrides or {}).items():
        if value is not None:
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
    return RunConfig(**values)
