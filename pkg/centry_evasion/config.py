#!/usr/bin/python3
# coding=utf-8

#   Copyright 2024 getcarrier.io
#
#   Licensed under the Apache License, Version 2.0 (the "License");
#   you may not use this file except in compliance with the License.
#   You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

""" Run configuration """

import os
import json
import tomllib

import pydantic  # pylint: disable=E0401
from pydantic import BaseModel, ConfigDict, Field  # pylint: disable=E0401

from .errors import ConfigError
from .internal import constants


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ForestConfig(_Section):
    """ Random forest hyperparameters """

    n_trees: int = Field(300, ge=1)
    max_depth: int = Field(32, ge=1)
    min_samples_leaf: int = Field(1, ge=1)
    n_jobs: int = 1


class LogisticConfig(_Section):
    """ Multinomial logistic regression """

    l2: float = Field(1e-4, ge=0.0)
    lr: float = Field(0.01, gt=0.0)
    max_iters: int = Field(500, ge=1)
    tolerance: float = Field(1e-7, ge=0.0)


class EncoderConfig(_Section):
    """ MLP encoder with ArcFace + SupCon objective """

    hidden: tuple[int, int] = (1024, 512)
    embedding_dim: int = Field(128, ge=2)
    dropout: float = Field(0.3, ge=0.0, lt=1.0)
    arcface_scale: float = Field(30.0, gt=0.0)
    arcface_margin: float = Field(0.30, ge=0.0)
    supcon_temperature: float = Field(0.1, gt=0.0)
    supcon_weight: float = Field(0.1, ge=0.0)
    epochs: int = Field(200, ge=1)
    batch_size: int = Field(128, ge=2)
    lr: float = Field(1e-3, gt=0.0)
    patience: int = Field(20, ge=1)


class EnsembleConfig(_Section):
    """ Member configs and soft-vote weight search """

    forest: ForestConfig = ForestConfig()
    logistic: LogisticConfig = LogisticConfig()
    encoder: EncoderConfig = EncoderConfig()
    grid_units: int = Field(20, ge=1)
    n_jobs: int = 1


class DistillConfig(_Section):
    """ Proxy distillation """

    temperature: float = Field(5.0, gt=0.0)
    alpha: float = Field(0.9, ge=0.0, le=1.0)
    epochs: int = Field(700, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    batch_size: int = Field(128, ge=2)
    hidden: tuple[int, ...] = (2048, 1024, 512)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)


class CvaeConfig(_Section):
    """ Conditional VAE loss weights, dims and schedule """

    lambda_r: float = Field(1.0, ge=0.0)
    beta: float = Field(0.01, ge=0.0)
    lambda_s: float = Field(1e-3, ge=0.0)
    lambda_c: float = Field(1.0, ge=0.0)
    latent_dim: int = Field(32, ge=1)
    embed_dim: int = Field(16, ge=1)
    encoder_hidden: tuple[int, int] = (1024, 512)
    decoder_hidden: tuple[int, int, int] = (1024, 1024, 2048)
    leaky_slope: float = Field(0.2, ge=0.0)
    lr: float = Field(1e-3, gt=0.0)
    betas: tuple[float, float] = (0.5, 0.999)
    clip_norm: float = Field(5.0, gt=0.0)
    epochs: int = Field(300, ge=1)
    patience: int = Field(15, ge=1)
    batch_size: int = Field(64, ge=2)
    objective_ks: tuple[int, ...] = (10, 20)
    objective_weights: tuple[float, float, float] = (0.5, 0.3, 0.2)


class TuningConfig(_Section):
    """ Random search over CvaeConfig """

    trials: int = Field(30, ge=1)
    n_jobs: int = 1
    lambda_r: tuple[float, float] = (0.1, 10.0)
    beta: tuple[float, float] = (1e-4, 1.0)
    lambda_s: tuple[float, float] = (1e-4, 0.1)
    lambda_c: tuple[float, float] = (0.1, 10.0)
    lr: tuple[float, float] = (1e-4, 3e-3)
    latent_dim: tuple[int, ...] = (16, 32, 64)
    embed_dim: tuple[int, ...] = (8, 16, 32)


class AttackConfig(_Section):
    """ Attack sweep """

    methods: tuple[str, ...] = constants.ATTACK_METHODS
    split: str = "test"

    @pydantic.field_validator("methods")
    @classmethod
    def _known_methods(cls, value):
        unknown = sorted(set(value) - set(constants.ATTACK_METHODS))
        if unknown:
            raise ValueError(f"unknown attack methods: {unknown}")
        return value

    @pydantic.field_validator("split")
    @classmethod
    def _known_split(cls, value):
        if value not in constants.SPLIT_NAMES:
            raise ValueError(f"unknown split '{value}'")
        return value


class ExportConfig(_Section):
    """ Embedding export """

    split: str = "test"
    method: str = "cvae"
    k: int | None = None


class RunConfig(_Section):
    """ One experiment record """

    dataset: str
    dataset_format: str = "csv"
    class_count: int | None = None
    seeds: tuple[int, ...] = (1,)
    k_grid: tuple[int, ...] = constants.DEFAULT_K_GRID
    split_fractions: tuple[float, float, float, float] = constants.DEFAULT_SPLIT_FRACTIONS
    out_dir: str = "runs"
    n_jobs: int = 1
    ensemble: EnsembleConfig = EnsembleConfig()
    distill: DistillConfig = DistillConfig()
    cvae: CvaeConfig = CvaeConfig()
    tuning: TuningConfig = TuningConfig()
    attack: AttackConfig = AttackConfig()
    export: ExportConfig = ExportConfig()
    logging: dict = Field(default_factory=dict)

    @pydantic.field_validator("seeds")
    @classmethod
    def _seeds_nonempty(cls, value):
        if not value:
            raise ValueError("seeds must not be empty")
        return value

    @pydantic.field_validator("k_grid")
    @classmethod
    def _k_grid_ascending(cls, value):
        if not value:
            raise ValueError("k_grid must not be empty")
        if value[0] <= 0 or any(left >= right for left, right in zip(value, value[1:])):
            raise ValueError("k_grid must be positive and strictly ascending")
        return value

    @pydantic.field_validator("split_fractions")
    @classmethod
    def _fractions_sum(cls, value):
        if any(item <= 0 for item in value) or abs(sum(value) - 1.0) > 1e-9:
            raise ValueError("split_fractions must be positive and sum to 1")
        return value

#
# Loading
#

def parse_override(text):
    """ 'section.key=value' -> (path list, value); value parsed as JSON, else string """
    if "=" not in text:
        raise ConfigError(f"Override '{text}' is not of the form section.key=value")
    #
    key, raw = text.split("=", 1)
    path = [item for item in key.strip().split(".") if item]
    if not path:
        raise ConfigError(f"Override '{text}' has an empty key")
    #
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    #
    return path, value


def apply_override(data, path, value):
    """ Set nested key in plain dict tree """
    node = data
    for key in path[:-1]:
        child = node.setdefault(key, {})
        if not isinstance(child, dict):
            raise ConfigError(f"Override path {'.'.join(path)} crosses non-table '{key}'")
        node = child
    node[path[-1]] = value


def load_config(path=None, overrides=(), environ=None):
    """ Read TOML, apply overrides and env, validate into RunConfig """
    environ = os.environ if environ is None else environ
    data = {}
    #
    if path is not None:
        try:
            with open(path, "rb") as file:
                data = tomllib.load(file)
        except FileNotFoundError as exc:
            raise ConfigError(f"Config file not found: {path}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"Config file {path} is not valid TOML: {exc}") from exc
    #
    for item in overrides:
        apply_override(data, *parse_override(item))
    #
    if environ.get(constants.OUT_DIR_ENV):
        data["out_dir"] = environ[constants.OUT_DIR_ENV]
    #
    if path is not None and isinstance(data.get("dataset"), str) and not os.path.isabs(data["dataset"]):
        data["dataset"] = os.path.join(os.path.dirname(os.path.abspath(path)), data["dataset"])
    #
    try:
        return RunConfig.model_validate(data)
    except pydantic.ValidationError as exc:
        raise ConfigError(f"Invalid configuration: {exc}") from exc


def section_dump(section):
    """ JSON-safe dict of a config section """
    return section.model_dump(mode="json")
