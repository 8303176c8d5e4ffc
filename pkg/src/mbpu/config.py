"""Flat ``section.key = value`` run configuration.

Blank lines and ``#`` comments are ignored; unknown keys, repeated keys and
unparsable values are errors.  ``format_config`` prints every resolved value
in the same syntax, so its output is itself a valid config file.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from .extractor import ExtractorConfig
from .losses import LossConfig
from .network import NetworkConfig
from .renderer import RenderConfig
from .training import TrainConfig
from .upsampler import RefinementConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    train: TrainConfig = field(default_factory=TrainConfig)
    loss: LossConfig = field(default_factory=LossConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    refine: RefinementConfig = field(default_factory=RefinementConfig)
    extractor: ExtractorConfig = field(default_factory=ExtractorConfig)
    net: NetworkConfig = field(default_factory=NetworkConfig)

    @property
    def network(self) -> NetworkConfig:
        return replace(self.net, extractor=self.extractor)


def _keys(section_obj):
    return [f.name for f in fields(section_obj) if f.name != "extractor"]


def _parse_value(text, default, key):
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if default and isinstance(default[0], int):
                return tuple(int(s) for s in items)
            return tuple(items)
        return text
    except ValueError:
        raise ConfigError(f"{key}: cannot parse value {text!r}") from None


def parse_config(text: str, base: RunConfig = RunConfig(), source: str = "<config>") -> RunConfig:
    updates: dict = {}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        section, _, name = key.partition(".")
        if section not in {f.name for f in fields(RunConfig)} or name not in _keys(getattr(base, section)):
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        default = getattr(getattr(base, section), name)
        updates.setdefault(section, {})[name] = _parse_value(value, default, f"{source}:{lineno}: {key}")
    try:
        return replace(base, **{s: replace(getattr(base, s), **kv) for s, kv in updates.items()})
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{source}: {e}") from None


def load_config(path, base: RunConfig = RunConfig()) -> RunConfig:
    path = os.fspath(path)
    try:
        with open(path, encoding="ascii") as fh:
            text = fh.read()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except (OSError, UnicodeDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    return parse_config(text, base, source=path)


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_config(cfg: RunConfig) -> str:
    lines = []
    for f in fields(cfg):
        sec = getattr(cfg, f.name)
        for name in _keys(sec):
            lines.append(f"{f.name}.{name} = {_fmt(getattr(sec, name))}")
    return "\n".join(lines) + "\n"


def as_flat_dict(cfg: RunConfig) -> dict:
    out = {}
    for f in fields(cfg):
        sec = getattr(cfg, f.name)
        for name in _keys(sec):
            out[f"{f.name}.{name}"] = getattr(sec, name)
    return out


__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "format_config", "as_flat_dict"]
