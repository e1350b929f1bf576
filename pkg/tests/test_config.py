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

""" Run configuration: TOML, overrides, environment, CLI flags """

import os

import pytest  # pylint: disable=E0401

from centry_evasion.config import (
    RunConfig, load_config, parse_override, apply_override, section_dump,
)
from centry_evasion.errors import ConfigError
from centry_evasion.harness.cli import build_parser, resolve_config
from centry_evasion.internal import constants


def test_defaults():
    config = RunConfig(dataset="data.csv")
    assert config.k_grid == (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
    assert config.split_fractions == (0.70, 0.10, 0.05, 0.15)
    assert config.attack.methods == ("cvae", "most_popular", "random")
    assert config.seeds == (1,)
    assert config.distill.temperature == 5.0
    assert config.distill.alpha == 0.9


def test_toml_matches_fixture_config(tiny_config_file, tiny_run_config):
    assert load_config(tiny_config_file, environ={}).model_dump() == tiny_run_config.model_dump()


def test_relative_dataset_resolved_against_config_dir(tmp_path):
    path = tmp_path / "sub" / "experiment.toml"
    path.parent.mkdir()
    path.write_text('dataset = "data.csv"\n', encoding="utf-8")
    #
    config = load_config(path, environ={})
    assert config.dataset == os.path.join(str(tmp_path / "sub"), "data.csv")


def test_overrides_apply_to_nested_sections(tiny_config_file):
    config = load_config(
        tiny_config_file,
        ["ensemble.forest.n_trees=7", "attack.split=val_es", "k_grid=[5, 20]"],
        environ={},
    )
    assert config.ensemble.forest.n_trees == 7
    assert config.ensemble.forest.max_depth == 8
    assert config.attack.split == "val_es"
    assert config.k_grid == (5, 20)


def test_parse_override():
    assert parse_override("a.b=[1,2]") == (["a", "b"], [1, 2])
    assert parse_override("attack.split=test") == (["attack", "split"], "test")
    assert parse_override("x=1=2") == (["x"], "1=2")
    with pytest.raises(ConfigError):
        parse_override("no-equals")
    with pytest.raises(ConfigError):
        parse_override("=3")


def test_apply_override_rejects_non_table():
    data = {"seeds": [1]}
    with pytest.raises(ConfigError):
        apply_override(data, ["seeds", "first"], 2)
    apply_override(data, ["cvae", "beta"], 0.5)
    assert data["cvae"] == {"beta": 0.5}


def test_environment_sets_out_dir(tiny_config_file, tmp_path):
    target = str(tmp_path / "elsewhere")
    config = load_config(tiny_config_file, environ={constants.OUT_DIR_ENV: target})
    assert config.out_dir == target


@pytest.mark.parametrize("override", [
    "k_grid=[10, 5]",
    "k_grid=[]",
    "k_grid=[0, 5]",
    "seeds=[]",
    "split_fractions=[0.5, 0.5, 0.1, 0.1]",
    'attack.methods=["cvae", "genetic"]',
    "attack.split=holdout",
    "distill.alpha=1.5",
    "ensemble.unknown=1",
])
def test_invalid_values_raise(tiny_config_file, override):
    with pytest.raises(ConfigError):
        load_config(tiny_config_file, [override], environ={})


def test_missing_and_malformed_files(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "absent.toml", environ={})
    #
    path = tmp_path / "broken.toml"
    path.write_text("dataset = \n", encoding="utf-8")
    with pytest.raises(ConfigError, match="not valid TOML"):
        load_config(path, environ={})
    #
    with pytest.raises(ConfigError):
        load_config(environ={})


def test_section_dump_is_json_safe(tiny_run_config):
    dumped = section_dump(tiny_run_config.cvae)
    assert dumped["encoder_hidden"] == [16, 8]
    assert dumped["objective_ks"] == [5]


def test_cli_flags_override_config(tiny_config_file, tmp_path):
    args = build_parser().parse_args([
        "attack", "-c", str(tiny_config_file),
        "--method", "random", "--method", "random",
        "--k", "10", "--k", "5", "--seed", "3", "--seed", "4",
        "--out-dir", str(tmp_path / "cli"),
    ])
    config = resolve_config(args, environ={constants.OUT_DIR_ENV: str(tmp_path / "env")})
    assert config.attack.methods == ("random",)
    assert config.k_grid == (5, 10)
    assert config.seeds == (3, 4)
    assert config.out_dir == str(tmp_path / "cli")


def test_cli_dataset_flag(dataset_csv):
    args = build_parser().parse_args(["split", "--dataset", str(dataset_csv), "--set", "n_jobs=2"])
    config = resolve_config(args, environ={})
    assert config.dataset == str(dataset_csv)
    assert config.n_jobs == 2
