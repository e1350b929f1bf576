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

""" Stratified four-way split """

import dataclasses

import numpy as np  # pylint: disable=E0401

from .. import log
from ..errors import StratificationError, DatasetError
from ..internal import constants
from ..tools import files


@dataclasses.dataclass(frozen=True)
class SplitManifest:
    """ Disjoint row-position sets covering the dataset """

    train_idx: np.ndarray
    val_tune_idx: np.ndarray
    val_es_idx: np.ndarray
    test_idx: np.ndarray
    seed: int

    def indices(self, name):
        """ Positions of named split (train, val_tune, val_es, test) """
        if name not in constants.SPLIT_NAMES:
            raise KeyError(name)
        return getattr(self, f"{name}_idx")

    def to_dict(self):
        """ JSON-ready form """
        data = {"seed": int(self.seed)}
        for name in constants.SPLIT_NAMES:
            data[name] = [int(item) for item in self.indices(name)]
        return data

    @classmethod
    def from_dict(cls, data):
        """ Build from JSON form """
        return cls(
            train_idx=np.asarray(data["train"], dtype=np.int64),
            val_tune_idx=np.asarray(data["val_tune"], dtype=np.int64),
            val_es_idx=np.asarray(data["val_es"], dtype=np.int64),
            test_idx=np.asarray(data["test"], dtype=np.int64),
            seed=int(data["seed"]),
        )


def allocate(count, fractions):
    """ Floor real-valued targets, hand remainders to largest fractional parts (ties: earlier split) """
    targets = count * np.asarray(fractions, dtype=np.float64)
    sizes = np.floor(targets).astype(np.int64)
    remainder = int(count - sizes.sum())
    #
    order = np.argsort(-(targets - sizes), kind="stable")
    sizes[order[:remainder]] += 1
    return sizes


def stratified_split(dataset, fractions=constants.DEFAULT_SPLIT_FRACTIONS, seed=0):
    """ Per-class 70/10/5/15 split, deterministic for a seed """
    fractions = tuple(float(item) for item in fractions)
    if len(fractions) != len(constants.SPLIT_NAMES):
        raise DatasetError(f"Expected {len(constants.SPLIT_NAMES)} split fractions, got {len(fractions)}")
    if min(fractions) < 0 or abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"Split fractions must be non-negative and sum to 1, got {fractions}")
    #
    rng = np.random.default_rng(seed)
    parts = [[] for _ in constants.SPLIT_NAMES]
    #
    for class_id in np.unique(dataset.labels):
        positions = dataset.class_indices(class_id)
        if positions.size < len(constants.SPLIT_NAMES):
            raise StratificationError(
                f"Class {class_id} has {positions.size} samples, need at least {len(constants.SPLIT_NAMES)}",
            )
        #
        shuffled = rng.permutation(positions)
        bounds = np.cumsum(allocate(positions.size, fractions))[:-1]
        for part, chunk in zip(parts, np.split(shuffled, bounds)):
            part.append(chunk)
    #
    arrays = [np.sort(np.concatenate(part)) for part in parts]
    manifest = SplitManifest(*arrays, seed=int(seed))
    #
    log.info(
        "Split created",
        extra={name: len(array) for name, array in zip(constants.SPLIT_NAMES, arrays)},
    )
    return manifest


def save_manifest(manifest, path):
    """ Write SplitManifest JSON """
    files.write_json(path, manifest.to_dict())


def load_manifest(path):
    """ Read SplitManifest JSON """
    return SplitManifest.from_dict(files.read_json(path))
