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

""" Stratified split """

import numpy as np  # pylint: disable=E0401
import pytest  # pylint: disable=E0401

from centry_evasion.data.dataset import ApiVocabulary, LabeledDataset
from centry_evasion.data.split import allocate, stratified_split, save_manifest, load_manifest
from centry_evasion.errors import StratificationError, DatasetError
from centry_evasion.internal import constants

from conftest import build_dataset


def test_allocate_divisible_count():
    assert allocate(100, constants.DEFAULT_SPLIT_FRACTIONS).tolist() == [70, 10, 5, 15]


def test_allocate_remainders_go_to_largest_fractions():
    sizes = allocate(667, constants.DEFAULT_SPLIT_FRACTIONS)
    assert sizes.tolist() == [467, 67, 33, 100]
    targets = 667 * np.asarray(constants.DEFAULT_SPLIT_FRACTIONS)
    assert np.all(np.abs(sizes - targets) <= 1)


def test_allocate_tie_prefers_train():
    assert allocate(3, (0.5, 0.5, 0.0, 0.0)).tolist() == [2, 1, 0, 0]


def test_split_is_disjoint_cover_and_stratified():
    dataset = build_dataset(per_class=20)
    manifest = stratified_split(dataset, seed=3)
    #
    parts = [manifest.indices(name) for name in constants.SPLIT_NAMES]
    joined = np.concatenate(parts)
    assert len(joined) == len(dataset)
    assert np.array_equal(np.sort(joined), np.arange(len(dataset)))
    #
    expected = allocate(20, constants.DEFAULT_SPLIT_FRACTIONS)
    for part, size in zip(parts, expected):
        for class_id in dataset.classes:
            assert np.sum(dataset.labels[part] == class_id) == size


def test_same_seed_same_manifest(small_dataset):
    first = stratified_split(small_dataset, seed=7)
    second = stratified_split(small_dataset, seed=7)
    assert first.to_dict() == second.to_dict()


def test_different_seed_differs(small_dataset):
    first = stratified_split(small_dataset, seed=1).to_dict()
    second = stratified_split(small_dataset, seed=2).to_dict()
    assert first["train"] != second["train"]


def test_class_too_small():
    dataset = LabeledDataset(
        vocabulary=ApiVocabulary(("a",)),
        samples=np.ones((3, 1)),
        labels=np.ones(3, dtype=np.int64),
        class_count=1,
    )
    with pytest.raises(StratificationError):
        stratified_split(dataset)


def uneven_dataset(sizes, seed=0):
    """ One row per sample, class c repeated sizes[c - 1] times """
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes).astype(np.int64)
    rng.shuffle(labels)
    return LabeledDataset(
        vocabulary=ApiVocabulary(tuple(f"api_{index}" for index in range(8))),
        samples=(rng.random((len(labels), 8)) < 0.5).astype(np.uint8),
        labels=labels,
        class_count=len(sizes),
    )


@pytest.mark.parametrize("seed", range(8))
def test_uneven_classes_follow_allocation(seed):
    sizes = np.random.default_rng([seed, 99]).integers(4, 61, size=6)
    dataset = uneven_dataset(sizes, seed)
    manifest = stratified_split(dataset, seed=seed)
    #
    parts = [manifest.indices(name) for name in constants.SPLIT_NAMES]
    joined = np.concatenate(parts)
    assert len(joined) == len(set(joined.tolist())) == len(dataset)
    assert np.array_equal(np.sort(joined), np.arange(len(dataset)))
    #
    for class_id, count in zip(dataset.classes, sizes):
        expected = allocate(int(count), constants.DEFAULT_SPLIT_FRACTIONS)
        observed = [int(np.sum(dataset.labels[part] == class_id)) for part in parts]
        assert observed == expected.tolist()
        assert sum(observed) == count


@pytest.mark.parametrize("size", [1, 2, 3])
def test_classes_under_four_samples_rejected(size):
    dataset = uneven_dataset([10, size])
    with pytest.raises(StratificationError):
        stratified_split(dataset)


def test_fractions_must_sum_to_one(small_dataset):
    with pytest.raises(DatasetError):
        stratified_split(small_dataset, fractions=(0.5, 0.2, 0.2, 0.2))


def test_manifest_save_load(tmp_path, small_dataset):
    manifest = stratified_split(small_dataset, seed=4)
    path = tmp_path / "split.json"
    save_manifest(manifest, path)
    loaded = load_manifest(path)
    assert loaded.to_dict() == manifest.to_dict()
    assert loaded.indices("test").dtype == np.int64
