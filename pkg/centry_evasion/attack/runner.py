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

""" Batch generation and labeling of adversarial samples """

import dataclasses

import numpy as np  # pylint: disable=E0401

from .. import log
from ..classical.common import predict_labels
from ..cvae.model import score_features
from ..errors import ShapeError
from ..tools import files
from .injection import AdversarialSample, select_top_k, attack_most_popular, attack_random


def generate_batch(method, X, sample_ids, targets, k, *, cvae=None, frequencies=None, seed=0):  # pylint: disable=R0913
    """ One AdversarialSample per row; frequencies maps class id -> frequency vector """
    X = np.asarray(X, dtype=np.uint8)
    targets = np.asarray(targets, dtype=np.int64)
    if X.shape[0] != targets.shape[0] or X.shape[0] != len(sample_ids):
        raise ShapeError("Rows, sample ids and targets differ in length")
    #
    if method == "cvae":
        scores = score_features(cvae, X, targets)
        samples = [
            AdversarialSample(int(sample_id), "cvae", k, int(target), row, select_top_k(row_scores, row, k))
            for sample_id, target, row, row_scores in zip(sample_ids, targets, X, scores)
        ]
    elif method == "most_popular":
        samples = [
            attack_most_popular(frequencies[int(target)], row, k, target=int(target), sample_id=int(sample_id))
            for sample_id, target, row in zip(sample_ids, targets, X)
        ]
    elif method == "random":
        samples = [
            attack_random(row, k, [seed, int(sample_id), k], target=int(target), sample_id=int(sample_id))
            for sample_id, target, row in zip(sample_ids, targets, X)
        ]
    else:
        raise ValueError(f"Unknown attack method '{method}'")
    #
    log.debug("Adversarial batch generated", extra={"method": method, "k": k, "samples": len(samples)})
    return samples


def label_batch(samples, predict_proba, classes):
    """ Fill before/after labels and distributions from a classifier (ensemble A) """
    if not samples:
        return []
    before = predict_proba(np.stack([item.original for item in samples]).astype(np.float64))
    after = predict_proba(np.stack([item.perturbed for item in samples]).astype(np.float64))
    before_labels = predict_labels(before, classes)
    after_labels = predict_labels(after, classes)
    return [
        dataclasses.replace(
            item,
            before_label=int(before_labels[position]),
            after_label=int(after_labels[position]),
            before_probs=tuple(float(value) for value in before[position]),
            after_probs=tuple(float(value) for value in after[position]),
        )
        for position, item in enumerate(samples)
    ]


def write_batch(path, samples):
    """ JSON-lines, one sample per line """
    files.write_jsonl(path, [item.to_record() for item in samples])


def read_batch(path):
    """ JSON-lines records """
    return files.read_jsonl(path)
