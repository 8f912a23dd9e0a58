"""Declarative platform configuration: YAML file plus environment overrides.

Every field of ``PlatformConfig`` can be set in a YAML mapping and overridden
by an environment variable named ``CVSOPS_<FIELD>`` (upper case). Types are
coerced from the dataclass annotations, so ``CVSOPS_BUCKET_SIZE=10`` works.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Any, Mapping

import yaml


@dataclass(frozen=True)
class PlatformConfig:
    bucket_size: int = 20
    required_coverage: int = 3
    cadence_days: int = 14
    timestamp_tolerance_s: float = 2.0
    backoff_base_s: float = 3600.0
    backoff_factor: float = 2.0
    max_attempts: int = 3
    tick_seed_base: int = 97
    api_token: str | None = None
    store_dir: str | None = None

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}


class ConfigError(ValueError):
    pass


def _coerce(name: str, annotation: str, raw: Any) -> Any:
    if raw is None:
        return None
    text = str(raw)
    if annotation.startswith("int"):
        try:
            return int(text)
        except ValueError as exc:
            raise ConfigError(f"{name} must be an integer, got {raw!r}") from exc
    if annotation.startswith("float"):
        try:
            return float(text)
        except ValueError as exc:
            raise ConfigError(f"{name} must be a number, got {raw!r}") from exc
    return text


def load_config(
    path: str | Path | None = None, env: Mapping[str, str] | None = None
) -> PlatformConfig:
    """Build a config from defaults, then the YAML file, then the environment."""
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    known = {f.name: f for f in fields(PlatformConfig)}

    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"config file must hold a mapping, got {type(loaded).__name__}")
        for key, raw in loaded.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, str(known[key].type), raw)

    for name, f in known.items():
        env_key = f"CVSOPS_{name.upper()}"
        if env_key in env:
            values[name] = _coerce(name, str(f.type), env[env_key])

    return PlatformConfig(**values)
