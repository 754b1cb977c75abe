"""Sectioned plain-text pipeline configuration."""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields
from importlib import resources
from pathlib import Path
from typing import Sequence

from . import models
from .ingest import LabelPolicy
from .optimize import GaConfig, GeneDecoder, GeneSpec
from .preprocess import Sampling

DEFAULT_CONFIG = "default_config.ini"
SYNTHETIC_INPUT = "synthetic"


class ConfigError(ValueError):
    pass


def _parser() -> configparser.ConfigParser:
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=None)
    p.optionxform = str
    return p


def default_text() -> str:
    return resources.files("readmit.data").joinpath(DEFAULT_CONFIG).read_text(encoding="utf-8")


def _csv_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


@dataclass
class PipelineConfig:
    """Typed view over the INI sections; ``raw`` keeps the full parsed file."""

    raw: configparser.ConfigParser
    base_dir: Path

    # -- loading

    @classmethod
    def load(cls, path: str | Path | None = None, overrides: Sequence[str] = ()) -> "PipelineConfig":
        parser = _parser()
        parser.read_string(default_text())
        base = Path.cwd()
        if path is not None:
            path = Path(path)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            user = _parser()
            user.read_string(path.read_text(encoding="utf-8"))
            for sec in user.sections():
                if sec.startswith("decoder.") and parser.has_section(sec):
                    parser.remove_section(sec)
                if not parser.has_section(sec):
                    parser.add_section(sec)
                for k, v in user.items(sec):
                    parser.set(sec, k, v)
            base = path.parent.resolve()
        for item in overrides:
            key, sep, value = item.partition("=")
            section, dot, option = key.strip().rpartition(".")
            if not sep or not dot:
                raise ConfigError(f"override must look like section.key=value: {item!r}")
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, option, value.strip())
        cfg = cls(parser, base)
        cfg.validate()
        return cfg

    def to_text(self, include_output_dir: bool = True) -> str:
        buf = io.StringIO()
        raw = self.raw
        if not include_output_dir:
            raw = _parser()
            raw.read_dict(self.raw)
            raw.remove_option("output", "directory")
        raw.write(buf)
        return buf.getvalue()

    def set(self, section: str, key: str, value) -> None:
        if not self.raw.has_section(section):
            self.raw.add_section(section)
        self.raw.set(section, key, str(value))

    # -- accessors

    def get(self, section, key, fallback=None):
        return self.raw.get(section, key, fallback=fallback)

    def getint(self, section, key):
        return self.raw.getint(section, key)

    def getfloat(self, section, key):
        return self.raw.getfloat(section, key)

    def getbool(self, section, key):
        return self.raw.getboolean(section, key)

    def getlist(self, section, key) -> list[str]:
        return _csv_list(self.raw.get(section, key, fallback=""))

    @property
    def input_path(self) -> str:
        value = self.get("data", "input")
        if value == SYNTHETIC_INPUT:
            return value
        p = Path(value)
        return str(p if p.is_absolute() else (self.base_dir / p))

    @property
    def output_dir(self) -> Path:
        p = Path(self.get("output", "directory"))
        return p if p.is_absolute() else Path.cwd() / p

    @property
    def label_policy(self) -> LabelPolicy:
        return LabelPolicy(self.get("data", "label_policy"))

    @property
    def families(self) -> list[str]:
        return self.getlist("models", "families")

    @property
    def tune_families(self) -> list[str]:
        return [f for f in self.getlist("tune", "families") if f in self.families]

    def model_params(self, family: str):
        cls = models.params.PARAM_TYPES[family]
        kinds = {f.name: f.type for f in fields(cls)}
        values = {}
        if self.raw.has_section(family):
            for k, v in self.raw.items(family):
                if k not in kinds:
                    raise ConfigError(f"[{family}] unknown hyperparameter {k!r}")
                values[k] = _coerce(v, kinds[k])
        try:
            return models.make_params(family, **values)
        except ValueError as exc:
            raise ConfigError(f"[{family}] {exc}") from exc

    def ga_config(self) -> GaConfig:
        s = "tune"
        return GaConfig(self.getint(s, "population"), self.getint(s, "generations"),
                        self.getfloat(s, "crossover_p"), self.getfloat(s, "mutation_p"),
                        self.getfloat(s, "elite_fraction"), self.getfloat(s, "pressure"),
                        (-10.0, 10.0), self.getint(s, "seed"))

    def decoder(self, family: str) -> GeneDecoder:
        sec = f"decoder.{family}"
        if not self.raw.has_section(sec):
            raise ConfigError(f"no [{sec}] section for tuned family {family}")
        genes = []
        for name, spec in self.raw.items(sec):
            parts = _csv_list(spec)
            if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "int"):
                raise ConfigError(f"[{sec}] {name}: expected 'low, high, affine|log[, int]'")
            genes.append(GeneSpec(name, float(parts[0]), float(parts[1]), parts[2], len(parts) == 4))
        tuned = {g.name for g in genes}
        fixed = {k: v for k, v in models.params_to_dict(self.model_params(family)).items()
                 if k not in tuned}
        return GeneDecoder(family, tuple(genes), fixed=fixed)

    # -- validation

    def validate(self) -> None:
        try:
            self.label_policy
            Sampling(self.get("preprocess", "sampling"))
            ratio = self.getfloat("preprocess", "split_ratio")
            if not 0 < ratio < 1:
                raise ConfigError("preprocess.split_ratio must lie in (0, 1)")
            for fam in self.families:
                if fam not in models.FAMILIES:
                    raise ConfigError(f"unknown model family {fam!r}")
                self.model_params(fam)
            for fam in self.tune_families:
                self.decoder(fam)
            self.ga_config()
            if self.get("features", "use") not in ("consensus", "boruta", "stepwise", "union", "all"):
                raise ConfigError("features.use must be consensus|boruta|stepwise|union|all")
            if not self.getfloat("features", "alpha_enter") < self.getfloat("features", "alpha_remove"):
                raise ConfigError("features.alpha_enter must be below features.alpha_remove")
            for sec, key in (("preprocess", "split_seed"), ("preprocess", "balance_seed"),
                             ("features", "boruta_seed"), ("models", "seed"), ("tune", "seed"),
                             ("tune", "holdout_seed")):
                self.getint(sec, key)
        except (ValueError, configparser.Error) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc
        if self.input_path != SYNTHETIC_INPUT and not Path(self.input_path).is_file():
            raise ConfigError(f"input file not found: {self.input_path}")


def _coerce(value: str, kind) -> object:
    kind = str(kind)
    if value.strip().lower() in ("none", ""):
        return None
    if "bool" in kind:
        return value.strip().lower() in ("1", "true", "yes", "on")
    if "int" in kind and "float" not in kind:
        return int(value)
    if "float" in kind:
        return float(value)
    return value.strip()
