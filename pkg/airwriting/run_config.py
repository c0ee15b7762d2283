"""Laufkonfiguration: flache ``key = value``-Datei mit ``#``-Kommentaren.

Schlüssel sind nach Bereich benannt (``synth.*``, ``train.*``, ``eval.*``,
``paths.*``) plus ``seed``. Unbekannte Schlüssel werden abgelehnt.
"""
from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, fields, replace
from typing import Callable, Dict, Optional

from .evaluation import EvalOptions
from .exceptions import ConfigError
from .synth import SynthConfig
from .training import TrainConfig
from .utils import resolve_path

_SECTION = "run"


def _boolean(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered not in configparser.ConfigParser.BOOLEAN_STATES:
        raise ValueError(f"kein Wahrheitswert: {value}")
    return configparser.ConfigParser.BOOLEAN_STATES[lowered]


def _optional_int(value: str) -> Optional[int]:
    return None if value.strip().lower() in ("", "none") else int(value)


def _converter(annotation) -> Callable[[str], object]:
    text = str(annotation)
    if "Optional[int]" in text:
        return _optional_int
    if "bool" in text:
        return _boolean
    if "int" in text:
        return int
    if "float" in text:
        return float
    return str


def _schema(prefix: str, cls) -> Dict[str, Callable[[str], object]]:
    return {f"{prefix}.{f.name}": _converter(f.type) for f in fields(cls) if f.name != "seed"}


SCHEMA: Dict[str, Callable[[str], object]] = {
    "seed": int,
    **_schema("synth", SynthConfig),
    **_schema("train", TrainConfig),
    **_schema("eval", EvalOptions),
    "paths.inertia": str,
    "paths.trajectory": str,
    "paths.pairs": str,
    "paths.out_dir": str,
    "paths.checkpoint": str,
    "paths.report": str,
}


@dataclass
class RunConfig:
    seed: int = 0
    synth: SynthConfig = field(default_factory=SynthConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalOptions = field(default_factory=EvalOptions)
    paths: Dict[str, str] = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str, base_dir: Optional[str] = None) -> "RunConfig":
        parser = configparser.ConfigParser(
            comment_prefixes=("#",), inline_comment_prefixes=("#",),
            delimiters=("=",), interpolation=None,
        )
        parser.optionxform = str
        try:
            parser.read_string(f"[{_SECTION}]\n{text}")
        except configparser.Error as e:
            raise ConfigError(f"Konfiguration nicht lesbar: {e}") from e

        values: Dict[str, object] = {}
        for key, raw in parser.items(_SECTION):
            if key not in SCHEMA:
                raise ConfigError(f"Unbekannter Konfigurationsschlüssel: {key}")
            try:
                values[key] = SCHEMA[key](raw)
            except ValueError as e:
                raise ConfigError(f"Ungültiger Wert für {key}: {raw!r} ({e})") from e

        config = cls()
        for section in ("synth", "train", "eval"):
            updates = {k.split(".", 1)[1]: v for k, v in values.items() if k.startswith(section + ".")}
            if updates:
                setattr(config, section, replace(getattr(config, section), **updates))
        config.paths = {
            k.split(".", 1)[1]: resolve_path(v, base_dir)
            for k, v in values.items() if k.startswith("paths.")
        }
        return config.with_seed(int(values.get("seed", 0)))

    @classmethod
    def from_file(cls, path: str) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"Konfigurationsdatei {path} nicht lesbar: {e}") from e
        return cls.from_text(text, os.path.dirname(os.path.abspath(path)))

    def with_seed(self, seed: int) -> "RunConfig":
        """Setzt den Seed in allen Teilkonfigurationen."""
        return RunConfig(
            seed=seed,
            synth=replace(self.synth, seed=seed),
            train=replace(self.train, seed=seed),
            eval=replace(self.eval, seed=seed),
            paths=dict(self.paths),
        )

    def path(self, key: str, override: Optional[str] = None) -> Optional[str]:
        if override is not None:
            return resolve_path(override)
        return self.paths.get(key)
