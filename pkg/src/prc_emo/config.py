"""Run configuration shared by the CLI subcommands.

Precedence: CLI flag > config file > built-in default. Defaults mirror the
shipped experiment settings: history window 5, two difficulty buckets over
four epochs, top-3 retrieval.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

from .errors import DataError


@dataclass
class RunConfig:
    wheel: Optional[str] = None  # wheel config path; None -> bundled default
    k: float = 1.0
    b: float = 1.0
    mode: str = "shift_required"
    buckets: int = 2
    epochs: int = 4
    window: int = 5
    retrieval_k: int = 3
    embed_dim: int = 256
    embedder: str = "stub"  # stub | http
    chat: str = "stub"  # stub | http
    chat_model: str = "stub-chat"
    embed_model: str = "stub-embed"
    cache: Optional[str] = None
    max_retries: int = 3
    concurrency: int = 4
    seeds: int = 1

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def load_config_file(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise DataError(f"config file {path} must contain a JSON object")
    unknown = set(data) - set(_FIELDS)
    if unknown:
        raise DataError(f"unknown config keys in {path}: {sorted(unknown)}")
    return data


def resolve_config(
    file_values: Optional[Mapping] = None, flag_values: Optional[Mapping] = None
) -> RunConfig:
    """Merge the three layers; flag values of None mean 'not set'."""
    merged = RunConfig().to_dict()
    for layer in (file_values or {}), (flag_values or {}):
        for key, value in layer.items():
            if key not in _FIELDS:
                raise DataError(f"unknown config key {key!r}")
            if value is not None:
                merged[key] = value
    config = RunConfig(**merged)
    if config.chat not in ("stub", "http"):
        raise DataError(f"chat backend must be stub or http, got {config.chat!r}")
    if config.embedder not in ("stub", "http"):
        raise DataError(f"embedder backend must be stub or http, got {config.embedder!r}")
    return config
