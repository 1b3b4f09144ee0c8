"""Application configuration: every stage's knobs in one validated object.

Invalid configuration is a startup failure. Files may be YAML or JSON; the
root must be a mapping whose sections mirror the field names below, and any
omitted section takes the stage defaults.
"""

from __future__ import annotations

import json
from pathlib import Path

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .ergonomics import ErgoConfig
from .ingest import IngestConfig
from .ppe import PPEConfig
from .tracking import TrackerConfig
from .vlm.protocol import ProtocolConfig

__all__ = ["ConfigError", "ClientConfig", "AppConfig", "load_config"]


class ConfigError(ValueError):
    pass


class ClientConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    base_url: str = "http://127.0.0.1:8900/v1"
    model: str = "site-vlm"
    api_key: str | None = None
    timeout_s: float = Field(default=120.0, gt=0)


class AppConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    ingest: IngestConfig = IngestConfig()
    tracker: TrackerConfig = TrackerConfig()
    ppe: PPEConfig = PPEConfig()
    ergo: ErgoConfig = ErgoConfig()
    protocol: ProtocolConfig = ProtocolConfig()
    client: ClientConfig = ClientConfig()
    store_path: str = "shiftwatch.db"
    audit_dir: str | None = None
    annotated_frames_per_chunk: int = Field(default=4, ge=1)
    max_concurrent_jobs: int = Field(default=2, ge=1)
    service_token: str | None = None


def load_config(path: str | Path) -> AppConfig:
    """Parse and validate a YAML or JSON config file.

    Raises:
        ConfigError: unreadable file, unsupported extension, non-mapping
            root, or any field failing validation.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    suffix = path.suffix.lower()
    if suffix in (".yaml", ".yml"):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"invalid YAML: {exc}") from exc
    elif suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    else:
        raise ConfigError(f"unsupported config format: {suffix or '(none)'}")
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    try:
        return AppConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
