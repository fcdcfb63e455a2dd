"""TOML configuration with environment overrides.

Precedence, lowest first: config file, command-line flags, environment.
The file is found via ``--config`` or ``$CAMO_CONFIG``.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Any

import tomli

from camo.errors import CamoError

CONFIG_ENV = "CAMO_CONFIG"
COMPILE_COMMAND_KEY = "compile.command"
COMPILE_COMMAND_ENV = "CAMO_COMPILE_COMMAND"


class ConfigError(CamoError):
    pass


def load_config(path: str | os.PathLike | None = None) -> dict[str, Any]:
    """Read the config file named by ``path`` or ``$CAMO_CONFIG``; ``{}`` if neither is set."""
    path = path or os.environ.get(CONFIG_ENV)
    if not path:
        return {}
    p = Path(path)
    try:
        with p.open("rb") as fh:
            return tomli.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{p}: {exc}") from exc


def lookup(config: dict[str, Any], dotted: str, default: Any = None) -> Any:
    node: Any = config
    for part in dotted.split("."):
        if not isinstance(node, dict) or part not in node:
            return default
        node = node[part]
    return node


def resolve(config: dict[str, Any], dotted: str, flag: Any = None, env: str | None = None) -> Any:
    """Config value, replaced by ``flag`` when given, replaced by ``$env`` when set."""
    value = lookup(config, dotted)
    if flag is not None:
        value = flag
    if env and os.environ.get(env):
        value = os.environ[env]
    return value


def compile_command(config: dict[str, Any], flag: str | None = None) -> str | None:
    return resolve(config, COMPILE_COMMAND_KEY, flag, COMPILE_COMMAND_ENV)
