"""One JSON document configuring every module.

Each top-level section maps onto one module's config dataclass; nested
dataclasses become nested objects.  Unknown keys are rejected with the
offending path so typos never silently fall back to defaults.  Secrets
stay out of the file: the inference bearer token is read from the
environment variable named in pipeline.backends.token_env.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, is_dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .affect import AffectConfig
from .intent import IntentEngineConfig
from .pipeline import PipelineConfig
from .wbc import PDGains, RandomizationRanges, RewardWeights, SimConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class AppConfig:
    affect: AffectConfig = field(default_factory=AffectConfig)
    engine: IntentEngineConfig = field(default_factory=IntentEngineConfig)
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    gains: PDGains = field(default_factory=PDGains)
    sim: SimConfig = field(default_factory=SimConfig)
    rewards: RewardWeights = field(default_factory=RewardWeights)
    randomization: RandomizationRanges = field(default_factory=RandomizationRanges)
    vocabulary_path: str | None = None


def _build(dc_type, doc, where: str):
    if not isinstance(doc, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(dc_type)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {', '.join(unknown)}")
    defaults = dc_type()
    kwargs = {}
    for name, value in doc.items():
        current = getattr(defaults, name)
        path = f"{where}.{name}" if where else name
        if is_dataclass(current) and not isinstance(current, type):
            kwargs[name] = _build(type(current), value, path)
        elif isinstance(current, tuple) and isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return dc_type(**kwargs)
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"{where or dc_type.__name__}: {exc}") from exc


def config_from_dict(doc: dict) -> AppConfig:
    return _build(AppConfig, doc, "")


def load_config(path) -> AppConfig:
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"no such config file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    return config_from_dict(doc)


def default_config() -> AppConfig:
    return AppConfig()


def bundled_config_path():
    return resources.files("hiaer.data") / "default_config.json"


def _jsonable(value):
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: _jsonable(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, tuple):
        return [_jsonable(v) for v in value]
    return value


def config_to_dict(cfg: AppConfig) -> dict:
    return _jsonable(cfg)


def dump_config(cfg: AppConfig, path) -> None:
    Path(path).write_text(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True) + "\n")
