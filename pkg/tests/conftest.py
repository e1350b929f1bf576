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

""" Shared fixtures """

import json
import logging

import numpy as np  # pylint: disable=E0401
import pytest  # pylint: disable=E0401

from centry_evasion.config import (
    RunConfig, EnsembleConfig, ForestConfig, LogisticConfig, EncoderConfig,
    DistillConfig, CvaeConfig, TuningConfig,
)
from centry_evasion.data.dataset import ApiVocabulary, LabeledDataset, write_dataset
from centry_evasion.internal import state


def build_dataset(per_class=10, n_features=40, class_count=6, block=5, noise=0.05, seed=0):
    """ Separable synthetic import vectors: class c owns a block of always-set features """
    rng = np.random.default_rng(seed)
    samples, labels = [], []
    for class_id in range(1, class_count + 1):
        start = (class_id - 1) * block
        for _ in range(per_class):
            row = (rng.random(n_features) < noise).astype(np.uint8)
            row[start:start + block] = 1
            samples.append(row)
            labels.append(class_id)
    return LabeledDataset(
        vocabulary=ApiVocabulary(tuple(f"api_{index}" for index in range(n_features))),
        samples=np.asarray(samples, dtype=np.uint8),
        labels=np.asarray(labels, dtype=np.int64),
        class_count=class_count,
    )


def tiny_ensemble_config():
    """ Ensemble members small enough for unit tests """
    return EnsembleConfig(
        forest=ForestConfig(n_trees=5, max_depth=8),
        logistic=LogisticConfig(max_iters=100),
        encoder=EncoderConfig(
            hidden=(16, 8), embedding_dim=8, dropout=0.0, epochs=3, batch_size=16, patience=2,
        ),
        grid_units=4,
    )


def tiny_cvae_config(**update):
    """ CVAE small enough for unit tests """
    values = {
        "latent_dim": 4, "embed_dim": 4, "encoder_hidden": (16, 8), "decoder_hidden": (16, 16, 16),
        "epochs": 2, "patience": 2, "batch_size": 8, "objective_ks": (5,),
    }
    values.update(update)
    return CvaeConfig(**values)


@pytest.fixture
def small_dataset():
    """ 60 samples, 6 classes, 40 features """
    return build_dataset()


@pytest.fixture
def dataset_csv(tmp_path, small_dataset):
    """ small_dataset written as canonical CSV """
    path = tmp_path / "dataset.csv"
    write_dataset(small_dataset, path)
    return path


@pytest.fixture
def tiny_run_config(tmp_path, dataset_csv):
    """ End-to-end run config on the 60-sample dataset """
    return RunConfig(
        dataset=str(dataset_csv),
        seeds=(1,),
        k_grid=(5,),
        out_dir=str(tmp_path / "runs"),
        ensemble=tiny_ensemble_config(),
        distill=DistillConfig(hidden=(16, 8), epochs=2, batch_size=16),
        cvae=tiny_cvae_config(),
        tuning=TuningConfig(trials=2, latent_dim=(4,), embed_dim=(4,)),
        logging={"console": False},
    )


@pytest.fixture
def restore_root():
    """ Keep root logger handlers intact across init() calls """
    handlers = list(logging.root.handlers)
    level = logging.root.level
    initialized = state.initialized
    yield
    for handler in list(logging.root.handlers):
        logging.root.removeHandler(handler)
        if handler not in handlers:
            handler.close()
    for handler in handlers:
        logging.root.addHandler(handler)
    logging.root.setLevel(level)
    state.initialized = initialized


TINY_TOML = """
dataset = "dataset.csv"
seeds = [1]
k_grid = [5]
out_dir = {out_dir}

[ensemble]
grid_units = 4

[ensemble.forest]
n_trees = 5
max_depth = 8

[ensemble.logistic]
max_iters = 100

[ensemble.encoder]
hidden = [16, 8]
embedding_dim = 8
dropout = 0.0
epochs = 3
batch_size = 16
patience = 2

[distill]
hidden = [16, 8]
epochs = 2
batch_size = 16

[cvae]
latent_dim = 4
embed_dim = 4
encoder_hidden = [16, 8]
decoder_hidden = [16, 16, 16]
epochs = 2
patience = 2
batch_size = 8
objective_ks = [5]

[tuning]
trials = 2
latent_dim = [4]
embed_dim = [4]

[logging]
console = false
"""


@pytest.fixture
def tiny_config_file(tmp_path, dataset_csv):
    """ tiny_run_config as a TOML file next to the dataset """
    path = tmp_path / "experiment.toml"
    path.write_text(TINY_TOML.format(out_dir=json.dumps(str(tmp_path / "runs"))), encoding="utf-8")
    return path
