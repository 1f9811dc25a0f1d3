# SPDX-License-Identifier: GPL-2.0-or-later
#
# Experiment configuration. The file format is
#
#   # comment
#   [section]
#   key = value
#
# Values may reference other keys as ${section.key}; keys of the global
# section may be referenced without the prefix. Precedence, lowest first:
# built-in defaults, the file, CHRONO_<SECTION>_<KEY> environment variables,
# command-line flags.
#

import argparse
import os
import os.path
import re

from collections.abc import Generator
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping as TMapping, Optional, Tuple

import chrono
import chrono.evaluation
import chrono.model
import chrono.parameters
import chrono.synthscene
import chrono.training

logger = chrono.logger

RawConfig = Dict[str, Dict[str, str]]


class Mapping:
    def __init__(self, arg: Dict[str, Any]):
        self.arg = arg

    def __walk(self, d: Dict[str, Any], p: List[str]) -> Generator[Tuple[str, Any], None, None]:
        for k, v in d.items():
            n = p + [k]
            if isinstance(v, dict):
                yield from self.__walk(v, n)
            yield ".".join(n), v

    def walk(self) -> Generator[Tuple[str, Any], None, None]:
        return self.__walk(self.arg, [])


def subst_str(mapping: Mapping, value: str) -> str | chrono.Error:
    seen: List[List[str]] = []

    while varlist := re.findall(r'\$\{(?P<name>[A-Za-z0-9_.-]+)\}', value):
        if varlist in seen:
            return chrono.Error(f"unresolvable reference in '{value}'", "bad-config")

        seen.append(varlist)

        for k, v in mapping.walk():
            if isinstance(v, dict):
                continue
            for name in (k, k[len("global."):] if k.startswith("global.") else None):
                if name and name in varlist:
                    value = value.replace(f"${{{name}}}", str(v))

    return value


def expandvars(config: RawConfig) -> RawConfig | chrono.Error:
    mapping = Mapping(config)
    ret: RawConfig = {}

    for section, values in config.items():
        ret[section] = {}
        for k, v in values.items():
            value = subst_str(mapping, v)
            if isinstance(value, chrono.Error):
                return chrono.Error(f"{section}.{k}: {value.message}", value.kind)
            ret[section][k] = value

    return ret


def add_value(config: RawConfig, section: str, name: str, value: str,
              origin: str) -> None | chrono.Error:
    if chrono.parameters.lookup(section, name) is None:
        return chrono.Error(f"{origin}: unknown key '{section}.{name}'", "bad-config")

    config.setdefault(section, {})[name] = value
    return None


def defaults() -> RawConfig:
    config: RawConfig = {s: {} for s in chrono.parameters.SECTIONS}

    for p in chrono.parameters.PARAMS:
        config[p.section][p.name] = chrono.parameters.format_value(p.default)

    return config


def read_file(filename: str, config: RawConfig) -> RawConfig | chrono.Error:
    section = "global"

    try:
        with open(filename, "r", encoding="utf-8") as f:
            lineno = 0
            while line := f.readline():
                lineno += 1
                line = line.rstrip()
                where = f"{filename}:{lineno}"

                if not line:
                    continue

                if m := re.match(r"^\s*#.*", line):
                    continue

                if m := re.match(r"^\s*\[(?P<name>[A-Za-z0-9_-]+)\]\s*$", line):
                    section = m.group("name")
                    if section not in chrono.parameters.SECTIONS:
                        return chrono.Error(f"{where}: unknown section '{section}'", "bad-config")
                    continue

                if m := re.match(r"^\s*(?P<name>[A-Za-z0-9_.-]+)\s*=\s*(?P<value>.*?)\s*$", line):
                    if err := add_value(config, section, m.group("name"), m.group("value"), where):
                        return err
                    continue

                return chrono.Error(f"{where}: unexpected config line: '{line}'", "bad-config")

    except FileNotFoundError:
        return chrono.Error(f"config file not found: {filename}", "missing-file")
    except OSError as e:
        return chrono.Error(f"unable to read {filename}: {e}", "io")

    logger.info("config has been read from %s", filename)
    return config


def add_environment(config: RawConfig, environ: TMapping[str, str]) -> None:
    for p in chrono.parameters.PARAMS:
        if (value := environ.get(p.envname)) is not None:
            logger.debug("%s overridden by %s", p.confname, p.envname)
            config[p.section][p.name] = value


def typed(config: RawConfig) -> Dict[str, Dict[str, Any]] | chrono.Error:
    values: Dict[str, Dict[str, Any]] = {s: {} for s in chrono.parameters.SECTIONS}

    for p in chrono.parameters.PARAMS:
        raw = config[p.section][p.name]
        try:
            values[p.section][p.name] = p.parse(raw)
        except ValueError as e:
            return chrono.Error(f"{p.confname}: invalid value '{raw}': {e}", "bad-config")

    return values


@dataclass
class Paths:
    out: str
    data: str
    checkpoint: str


@dataclass
class ExperimentConfig:
    seed: int
    deterministic: bool
    scene: chrono.synthscene.SceneDistribution
    n_samples: int
    n_val: int
    n_test: int
    workers: int
    model: chrono.model.ModelConfig
    train: chrono.training.TrainConfig
    eval: chrono.evaluation.EvalConfig
    paths: Paths
    values: Dict[str, Dict[str, Any]] = field(default_factory=dict, repr=False)

    def validate(self) -> None:
        self.scene.validate()
        self.model.validate()
        self.train.validate()
        self.eval.validate()
        if not 0 <= self.n_val + self.n_test <= self.n_samples:
            raise ValueError("data.n_val plus data.n_test exceeds data.n_samples")
        if self.workers < 1:
            raise ValueError("data.workers must be positive")


def pair(values: List[int], name: str) -> Tuple[int, int]:
    if len(values) != 2:
        raise ValueError(f"{name} needs two values")
    return values[0], values[1]


def build(values: Dict[str, Dict[str, Any]]) -> ExperimentConfig:
    g, d, m, t, e, p = (values[s] for s in chrono.parameters.SECTIONS)

    scene = chrono.synthscene.SceneDistribution(
            **{k: d[k] for k in chrono.synthscene.SceneDistribution.__dataclass_fields__})

    model = chrono.model.ModelConfig(**{**m, "spp_scales": tuple(m["spp_scales"])})

    train = chrono.training.TrainConfig(
            **{**t,
               "seed"         : g["seed"],
               "deterministic": g["deterministic"],
               "min_gap_days" : pair(t["min_gap_days"], "train.min_gap_days"),
               "truncation"   : pair(t["truncation"], "train.truncation")})

    evaluation = chrono.evaluation.EvalConfig(
            **{**e, "levels": tuple(e["levels"]), "strata": tuple(e["strata"])})

    return ExperimentConfig(seed=g["seed"], deterministic=g["deterministic"], scene=scene,
                            n_samples=d["n_samples"], n_val=d["n_val"], n_test=d["n_test"],
                            workers=d["workers"], model=model, train=train, eval=evaluation,
                            paths=Paths(out=p["out"], data=p["data"], checkpoint=p["checkpoint"]),
                            values=values)


def load(filename: Optional[str], cmdargs: Optional[argparse.Namespace] = None,
         environ: Optional[TMapping[str, str]] = None) -> ExperimentConfig | chrono.Error:
    config = defaults()

    if filename:
        ret = read_file(filename, config)
        if isinstance(ret, chrono.Error):
            return ret

    add_environment(config, os.environ if environ is None else environ)

    if cmdargs is not None:
        for param in chrono.parameters.PARAMS:
            param.add_config(cmdargs, config)

    expanded = expandvars(config)

    if isinstance(expanded, chrono.Error):
        return expanded

    values = typed(expanded)

    if isinstance(values, chrono.Error):
        return values

    for key in ("out", "data", "checkpoint"):
        values["paths"][key] = os.path.expanduser(values["paths"][key])

    try:
        cfg = build(values)
        cfg.validate()
    except (TypeError, ValueError) as e:
        return chrono.Error(f"invalid configuration: {e}", "bad-config")

    for section, items in values.items():
        for k, v in items.items():
            logger.debug("config %s.%s = %s", section, k, v)

    return cfg


def snapshot(cfg: ExperimentConfig) -> str:
    """The resolved configuration in the file format; loading it reproduces cfg."""
    lines = [f"# chrono {chrono.__VERSION__} resolved configuration"]

    for section in chrono.parameters.SECTIONS:
        lines += ["", f"[{section}]"]
        for p in chrono.parameters.PARAMS:
            if p.section == section:
                lines.append(f"{p.name} = {chrono.parameters.format_value(cfg.values[section][p.name])}")

    return "\n".join(lines) + "\n"
