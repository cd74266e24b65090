"""Service configuration: TOML file, then environment overrides.

The config file is a flat TOML table::

    host = "127.0.0.1"
    port = 8100
    model = "models/my_detector.py"
    max_request_bytes = 8388608
    token = "secret"           # optional; enables bearer auth

``SCOREBRIDGE_PORT`` and ``SCOREBRIDGE_TOKEN`` override the file values, so
deployments can rebind without editing configs.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

ONE_MIB = 1024 * 1024

_KEYS = ("host", "port", "model", "max_request_bytes", "token")


@dataclass(frozen=True)
class AdapterConfig:
    model_path: str
    host: str = "127.0.0.1"
    port: int = 8100
    max_request_bytes: int = 8 * ONE_MIB
    token: str | None = None

    def __post_init__(self):
        if not self.model_path:
            raise ValueError("model_path is required")
        if not isinstance(self.port, int) or not 1 <= self.port <= 65535:
            raise ValueError(f"port must be in [1, 65535], got {self.port}")
        if self.max_request_bytes < ONE_MIB:
            raise ValueError(
                f"max_request_bytes must be at least {ONE_MIB}, got {self.max_request_bytes}"
            )
        if self.token is not None and not self.token:
            raise ValueError("token must be non-empty when given")


def load_config(path) -> AdapterConfig:
    with open(path, "rb") as f:
        data = tomllib.load(f)
    unknown = set(data) - set(_KEYS)
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    if "model" not in data:
        raise ValueError("config must set 'model' (path to the scoring script)")
    kwargs = {"model_path": data["model"]}
    for key in ("host", "port", "max_request_bytes", "token"):
        if key in data:
            kwargs[key] = data[key]
    return AdapterConfig(**kwargs)


def apply_env_overrides(cfg: AdapterConfig, environ=None) -> AdapterConfig:
    """SCOREBRIDGE_PORT and SCOREBRIDGE_TOKEN beat the config file."""
    env = os.environ if environ is None else environ
    overrides = {}
    port = env.get("SCOREBRIDGE_PORT")
    if port is not None:
        try:
            overrides["port"] = int(port)
        except ValueError:
            raise ValueError(f"SCOREBRIDGE_PORT must be an integer, got {port!r}")
    token = env.get("SCOREBRIDGE_TOKEN")
    if token is not None:
        overrides["token"] = token
    return replace(cfg, **overrides) if overrides else cfg
