"""Service configuration: JSON file plus environment variable overrides."""

import json
import logging
import os
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import List, Optional

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

DEFAULT_GUIDELINE_URL = (
    "https://www.who.int/emergencies/diseases/novel-coronavirus-2019"
)

ENV_PREFIX = "MEDGRAPHBOT_"


@dataclass
class ServiceConfig:
    port: int = 8000
    data_dir: str = "./data"
    graph_path: Optional[str] = None
    guideline_url: str = DEFAULT_GUIDELINE_URL
    session_gap_seconds: int = 3600
    intent_threshold: float = 0.35
    similarity_threshold: float = 0.5
    prediction_k: int = 5
    alert_threshold: float = 0.8
    fringe_k: int = 5
    cors_origins: List[str] = field(default_factory=lambda: ["*"])
    ui_dir: Optional[str] = None


_FIELD_TYPES = {f.name: f for f in fields(ServiceConfig)}


def _coerce(name: str, value, current):
    """Coerce a raw JSON/env value onto the type of the current default."""
    if name == "cors_origins":
        if isinstance(value, str):
            return [v.strip() for v in value.split(",") if v.strip()]
        if isinstance(value, list):
            return [str(v) for v in value]
        raise ConfigurationError(f"bad value for config key 'cors_origins': {value!r}")
    if name in ("graph_path", "ui_dir", "data_dir", "guideline_url"):
        return None if value is None else str(value)
    if name in ("port", "session_gap_seconds", "prediction_k", "fringe_k"):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"bad value for config key {name!r}: {value!r}"
            ) from None
    if name in ("intent_threshold", "similarity_threshold", "alert_threshold"):
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigurationError(
                f"bad value for config key {name!r}: {value!r}"
            ) from None
    return value


def load_config(path=None, env: Optional[dict] = None) -> ServiceConfig:
    """Build the config from defaults, then a JSON file, then environment.

    Unknown keys in the file are a hard error naming the key; environment
    overrides use MEDGRAPHBOT_<KEY> (uppercased field name).
    """
    config = ServiceConfig()
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file not found: {path}")
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config file is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigurationError("config file must contain a JSON object")
        for key, value in payload.items():
            if key not in _FIELD_TYPES:
                raise ConfigurationError(f"unknown config key: {key}")
            setattr(config, key, _coerce(key, value, getattr(config, key)))
    env = os.environ if env is None else env
    for name in _FIELD_TYPES:
        env_key = ENV_PREFIX + name.upper()
        if env_key in env:
            setattr(config, name, _coerce(name, env[env_key], getattr(config, name)))
    return config
