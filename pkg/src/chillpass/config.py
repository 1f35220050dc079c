"""Harness configuration: one JSON document with four sections.

Key names match the dataclass fields exactly; unknown keys are an error so
typos do not silently fall back to defaults.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .detector import DetectorConfig
from .errors import ConfigError
from .scoring import ScoringConfig
from .synth import SimulationConfig
from .trace import ValidationConfig

SECTIONS = {
    "validation": ValidationConfig,
    "detector": DetectorConfig,
    "scoring": ScoringConfig,
    "simulation": SimulationConfig,
}


@dataclass(frozen=True)
class Config:
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    scoring: ScoringConfig = field(default_factory=ScoringConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)

    def with_scoring(self, **changes) -> "Config":
        return dataclasses.replace(self, scoring=dataclasses.replace(self.scoring, **changes))


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if hasattr(value, "value") and not isinstance(value, (int, float, str)):
        return value.value
    return value


def config_to_dict(cfg: Config) -> dict:
    out = {}
    for name in SECTIONS:
        section = getattr(cfg, name)
        out[name] = {f.name: _plain(getattr(section, f.name)) for f in dataclasses.fields(section)}
    return out


def config_from_dict(doc: dict) -> Config:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    built = {}
    for name, cls in SECTIONS.items():
        raw = doc.get(name) or {}
        names = {f.name for f in dataclasses.fields(cls)}
        bad = set(raw) - names
        if bad:
            raise ConfigError(f"unknown keys in [{name}]: {sorted(bad)}")
        kwargs = {k: tuple(v) if isinstance(v, list) else v for k, v in raw.items()}
        try:
            built[name] = cls(**kwargs)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"[{name}]: {exc}") from None
    return Config(**built)


def load_config(path=None) -> Config:
    if path is None:
        return Config()
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(doc)


def dump_config(cfg: Config) -> str:
    return json.dumps(config_to_dict(cfg), indent=2) + "\n"
