"""Layered configuration: built-in defaults, then a JSON file, then overrides."""

from __future__ import annotations

import dataclasses
import json
import os
from pathlib import Path
from typing import Any, Mapping

from .exceptions import ParseError, UnknownKey
from .training import TrainConfig

RESOLVED_NAME = "resolved_config.json"

# published best settings for RotatE, keyed by dataset directory name
PRESETS: dict[str, dict[str, Any]] = {
    "FB15k": dict(dim=1000, batch_size=2048, negatives=128, alpha=1.0, gamma=24.0),
    "WN18": dict(dim=500, batch_size=512, negatives=1024, alpha=0.5, gamma=12.0),
    "FB15k-237": dict(dim=1000, batch_size=1024, negatives=256, alpha=1.0, gamma=9.0),
    "WN18RR": dict(dim=500, batch_size=512, negatives=1024, alpha=0.5, gamma=6.0),
    "countries_S1": dict(dim=500, batch_size=512, negatives=64, alpha=1.0, gamma=0.1),
    "countries_S2": dict(dim=500, batch_size=512, negatives=64, alpha=1.0, gamma=0.1),
    "countries_S3": dict(dim=500, batch_size=512, negatives=64, alpha=1.0, gamma=0.1),
    "YAGO3-10": dict(dim=500, batch_size=1024, negatives=400, alpha=1.0, gamma=24.0),
}


def read_config_file(path: str | os.PathLike) -> dict[str, Any]:
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return {}
    try:
        values = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(values, dict):
        raise ParseError(f"{path}: expected a JSON object")
    return values


def load_config(path: str | os.PathLike | None = None, overrides: Mapping[str, Any] | None = None) -> TrainConfig:
    """Resolve defaults <- file <- overrides into a :class:`TrainConfig`.

    Overrides whose value is ``None`` are ignored.
    """
    known = {f.name for f in dataclasses.fields(TrainConfig)}
    values: dict[str, Any] = {}
    if path is not None:
        values.update(read_config_file(path))
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    unknown = set(values) - known
    if unknown:
        raise UnknownKey(f"unknown config keys: {sorted(unknown)}")
    return TrainConfig(**values)


def write_resolved_config(config: TrainConfig, out_dir: str | os.PathLike) -> Path:
    path = Path(out_dir) / RESOLVED_NAME
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
