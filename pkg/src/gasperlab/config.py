"""Scenario files: INI-style sections of ``key = value`` settings.

Recognized sections are ``[simulation]``, ``[network]``, ``[equiv_game]``
and ``[liveness]``. Their keys are the field names of :class:`SimConfig`,
:class:`NetworkParams`, :class:`EquivGameConfig` and
:class:`LivenessParams`. A top-level ``seed`` may sit in ``[scenario]``.
Unknown sections or keys, unparsable values and out-of-range settings all
raise :class:`ConfigError` naming the offending key.

Example::

    [simulation]
    validator_count = 32
    slots_per_epoch = 4
    byz_count = 8
    strategy = smoke_bomb

    [network]
    a = 0.1
    eps2 = 0.1
"""

from __future__ import annotations

import configparser
import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .analytics import LivenessParams
from .equiv_game import EquivGameConfig
from .simulator.engine import NetworkParams, SimConfig


class ConfigError(ValueError):
    """A scenario setting is unknown, malformed or out of range."""


SECTIONS = {
    "simulation": SimConfig,
    "network": NetworkParams,
    "equiv_game": EquivGameConfig,
    "liveness": LivenessParams,
}


@dataclass
class Scenario:
    seed: Optional[int] = None
    simulation: dict = field(default_factory=dict)
    network: dict = field(default_factory=dict)
    equiv_game: dict = field(default_factory=dict)
    liveness: dict = field(default_factory=dict)

    def sim_config(self, **overrides) -> SimConfig:
        kw = dict(self.simulation)
        kw.update(overrides)
        return _build(SimConfig, kw, extra={"network": self.network_params()})

    def network_params(self) -> NetworkParams:
        return _build(NetworkParams, dict(self.network))

    def equiv_config(self, **overrides) -> EquivGameConfig:
        kw = dict(self.equiv_game)
        kw.update(overrides)
        return _build(EquivGameConfig, kw)

    def liveness_params(self, **overrides) -> LivenessParams:
        kw = dict(self.liveness)
        kw.update(overrides)
        return _build(LivenessParams, kw)


def _build(cls, kw: dict, extra: Optional[dict] = None):
    args = dict(kw)
    if extra:
        args.update(extra)
    try:
        return cls(**args)
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__}: {exc}") from exc


def _parse_value(key: str, raw: str, annotation) -> Any:
    text = raw.strip()
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is typing.Union:
        if text.lower() in ("none", ""):
            return None
        inner = [a for a in args if a is not type(None)]
        return _parse_value(key, text, inner[0])
    if annotation is bool:
        low = text.lower()
        if low in ("true", "yes", "on", "1"):
            return True
        if low in ("false", "no", "off", "0"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    if annotation is int:
        try:
            return int(text)
        except ValueError:
            raise ConfigError(f"{key}: expected an integer, got {raw!r}") from None
    if annotation is float:
        try:
            return float(text)
        except ValueError:
            raise ConfigError(f"{key}: expected a number, got {raw!r}") from None
    if annotation is tuple:
        try:
            return tuple(float(x) for x in text.replace(",", " ").split())
        except ValueError:
            raise ConfigError(f"{key}: expected a list of numbers, got {raw!r}") from None
    if annotation is str:
        return text
    raise ConfigError(f"{key}: unsupported setting")


def _fields(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls) if f.name != "network"}


def parse_scenario(text: str) -> Scenario:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed scenario file: {exc}") from exc
    scen = Scenario()
    for section in parser.sections():
        if section == "scenario":
            for key, raw in parser.items(section):
                if key != "seed":
                    raise ConfigError(f"unknown key scenario.{key}")
                scen.seed = _parse_value("scenario.seed", raw, int)
            continue
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        known = _fields(SECTIONS[section])
        out = getattr(scen, section)
        for key, raw in parser.items(section):
            if key not in known:
                raise ConfigError(f"unknown key {section}.{key}")
            out[key] = _parse_value(f"{section}.{key}", raw, known[key])
    # surface range errors at load time, with the section named
    for section in SECTIONS:
        try:
            {"simulation": scen.sim_config, "network": scen.network_params,
             "equiv_game": scen.equiv_config, "liveness": scen.liveness_params}[section]()
        except ConfigError as exc:
            raise ConfigError(f"[{section}] {exc}") from exc
    return scen


def load_scenario(path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read scenario file {path}: {exc}") from exc
    return parse_scenario(text)
