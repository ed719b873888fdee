"""Flat dotted key=value configuration files.

Format: one ``section.key=value`` pair per line, ``#`` comments, blank
lines ignored.  Values are parsed as int, float, bool, comma-separated
lists of the same, or left as strings.  Unknown keys are rejected so a
typo cannot silently fall back to a default.
"""

from __future__ import annotations

__all__ = ["ConfigError", "parse_value", "parse_config", "load_config", "get"]


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""


_KNOWN_PREFIXES = (
    "model.", "drift.", "set.", "sim.", "audit.", "ratio.", "slope.",
    "cjk.", "solver.", "witness.",
)
_KNOWN_KEYS = {
    "eps", "n_samples", "seed", "threads", "out", "format",
}


def parse_value(text: str):
    text = text.strip()
    if "," in text:
        return [parse_value(part) for part in text.split(",") if part.strip() != ""]
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config(text: str) -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key not in _KNOWN_KEYS and not key.startswith(_KNOWN_PREFIXES):
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = parse_value(value)
    return out


def load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    return parse_config(text)


def get(cfg: dict, key: str, default=None, required=False):
    if key in cfg:
        return cfg[key]
    if required:
        raise ConfigError(f"missing required config key {key!r}")
    return default


def section(cfg: dict, prefix: str) -> dict:
    """All keys under ``prefix.`` with the prefix stripped."""
    tag = prefix + "."
    return {k[len(tag):]: v for k, v in cfg.items() if k.startswith(tag)}
