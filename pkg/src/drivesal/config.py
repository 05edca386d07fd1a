"""Flat key=value run configuration.

Every CLI subcommand resolves its settings in one fixed order — schema
default, then config file, then command-line flag — and echoes the merged
result into its output directory as ``config.txt`` so a run can always be
reproduced from its artifacts alone. Keys absent from the subcommand's
schema are rejected rather than ignored.
"""

from __future__ import annotations

import os
import re

from drivesal.errors import ConfigError
from drivesal.imio import atomic_write_bytes

_KEY_RE = re.compile(r"^[a-z][a-z0-9_]*$")
_BOOL_WORDS = {"true": True, "1": True, "false": False, "0": False}

ECHO_FILENAME = "config.txt"


def parse_kv_text(text: str, source: str = "<config>") -> dict:
    """Strict key=value lines; '#' comments and blank lines are allowed."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not _KEY_RE.match(key):
            raise ConfigError(f"{source}:{lineno}: bad key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = value
    return values


def read_kv_file(path) -> dict:
    path = os.fspath(path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_kv_text(text, source=path)


def coerce_value(key: str, raw, kind):
    """Turn a raw string (or an already-typed flag value) into `kind`."""
    if isinstance(raw, kind) and not (kind is int and isinstance(raw, bool)):
        return raw
    if not isinstance(raw, str):
        raise ConfigError(f"{key}: expected {kind.__name__}, got {type(raw).__name__}")
    if kind is bool:
        if raw.lower() in _BOOL_WORDS:
            return _BOOL_WORDS[raw.lower()]
        raise ConfigError(f"{key}: expected true/false, got {raw!r}")
    try:
        return kind(raw)
    except ValueError as exc:
        raise ConfigError(f"{key}: expected {kind.__name__}, got {raw!r}") from exc


def resolve_config(schema: dict, file_values: dict = None, flag_values: dict = None) -> dict:
    """schema: {key: (type, default)}. Precedence: default < file < flag."""
    values = {key: default for key, (_, default) in schema.items()}
    for layer, label in ((file_values, "config file"), (flag_values, "flag")):
        if not layer:
            continue
        unknown = sorted(set(layer) - set(schema))
        if unknown:
            raise ConfigError(
                f"unknown {label} key(s) {', '.join(unknown)}; "
                f"allowed: {', '.join(sorted(schema))}")
        for key, raw in layer.items():
            values[key] = coerce_value(key, raw, schema[key][0])
    return values


def format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_text(values: dict) -> str:
    return "".join(f"{k}={format_value(values[k])}\n" for k in sorted(values))


def write_config_echo(out_dir, values: dict) -> str:
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, ECHO_FILENAME)
    atomic_write_bytes(path, config_text(values).encode())
    return path
