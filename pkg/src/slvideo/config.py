"""Application configuration: one JSON file describing a corpus deployment.

Schema::

    {
      "corpus_dir": "path",
      "frames_dir": "path",          // default: <corpus_dir>/frames
      "index_path": "path",          // default: <corpus_dir>/signs.idx
      "encoder": {"kind": "mock" | "remote", "endpoint": url, "dim": 512},
      "default_k": 10,
      "eval": {"median_options": "seven" | "six"},
      "workers": 4,
      "host": "127.0.0.1",
      "port": 8000
    }

The SLVIDEO_CONFIG environment variable overrides the config path given
on the command line.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigInvalid
from .evaluation import MEDIAN_OPTION_SETS

ENV_VAR = "SLVIDEO_CONFIG"


@dataclass(frozen=True)
class EncoderSettings:
    kind: str = "mock"
    endpoint: str | None = None
    dim: int = 512

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ConfigInvalid(
                f"encoder.kind must be 'mock' or 'remote', got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigInvalid("encoder.kind 'remote' requires encoder.endpoint")
        if self.dim <= 0:
            raise ConfigInvalid(f"encoder.dim must be positive, got {self.dim}")


@dataclass(frozen=True)
class AppConfig:
    corpus_dir: Path
    frames_dir: Path
    index_path: Path
    encoder: EncoderSettings = field(default_factory=EncoderSettings)
    default_k: int = 10
    median_options: str = "seven"
    workers: int = 4
    host: str = "127.0.0.1"
    port: int = 8000

    def __post_init__(self):
        if self.default_k <= 0:
            raise ConfigInvalid(f"default_k must be positive, got {self.default_k}")
        if self.median_options not in MEDIAN_OPTION_SETS:
            raise ConfigInvalid(
                f"eval.median_options must be one of "
                f"{sorted(MEDIAN_OPTION_SETS)}, got {self.median_options!r}")
        if self.workers <= 0:
            raise ConfigInvalid(f"workers must be positive, got {self.workers}")
        if not 0 < self.port < 65536:
            raise ConfigInvalid(f"port must be in 1..65535, got {self.port}")


def config_from_dict(raw: dict, base_dir: Path | None = None) -> AppConfig:
    if "corpus_dir" not in raw:
        raise ConfigInvalid("config requires 'corpus_dir'")

    def as_path(value: str) -> Path:
        p = Path(value)
        if base_dir is not None and not p.is_absolute():
            p = base_dir / p
        return p

    corpus_dir = as_path(raw["corpus_dir"])
    try:
        encoder = EncoderSettings(**raw.get("encoder", {}))
        return AppConfig(
            corpus_dir=corpus_dir,
            frames_dir=as_path(raw["frames_dir"]) if "frames_dir" in raw
            else corpus_dir / "frames",
            index_path=as_path(raw["index_path"]) if "index_path" in raw
            else corpus_dir / "signs.idx",
            encoder=encoder,
            default_k=raw.get("default_k", 10),
            median_options=raw.get("eval", {}).get("median_options", "seven"),
            workers=raw.get("workers", 4),
            host=raw.get("host", "127.0.0.1"),
            port=raw.get("port", 8000),
        )
    except TypeError as exc:
        raise ConfigInvalid(f"bad config structure: {exc}") from exc


def load_config(path: Path | str | None = None) -> AppConfig:
    """Read config from ``path``, or from $SLVIDEO_CONFIG when set."""
    env_path = os.environ.get(ENV_VAR)
    chosen = env_path or path
    if chosen is None:
        raise ConfigInvalid(
            f"no config path given and {ENV_VAR} is not set")
    chosen = Path(chosen)
    if not chosen.is_file():
        raise ConfigInvalid(f"config file not found: {chosen}")
    try:
        raw = json.loads(chosen.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigInvalid(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigInvalid("config root must be a JSON object")
    return config_from_dict(raw, base_dir=chosen.parent)
