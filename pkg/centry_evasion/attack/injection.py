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

""" Additive top-k feature injection """

import dataclasses

import numpy as np  # pylint: disable=E0401

from ..cvae.model import score_features
from ..errors import InsufficientAbsentFeaturesError, ShapeError


@dataclasses.dataclass(frozen=True)
class AdversarialSample:  # pylint: disable=R0902
    """ Original vector plus exactly k added feature indices """

    sample_id: int
    method: str
    k: int
    target: int
    original: np.ndarray
    added: tuple
    before_label: int = None
    after_label: int = None
    before_probs: tuple = None
    after_probs: tuple = None

    @property
    def perturbed(self):
        """ Original with added bits set """
        return inject(self.original, self.added)

    def to_record(self):
        """ JSON-lines record """
        return {
            "sample_id": int(self.sample_id),
            "method": self.method,
            "k": int(self.k),
            "target": None if self.target is None else int(self.target),
            "added_indices": [int(item) for item in self.added],
            "before_label": self.before_label,
            "after_label": self.after_label,
            "before_probs": None if self.before_probs is None else list(self.before_probs),
            "after_probs": None if self.after_probs is None else list(self.after_probs),
        }


def absent_indices(x):
    """ Indices j with x_j = 0 """
    return np.flatnonzero(np.asarray(x) == 0)


def _check_k(x, k):
    absent = int(np.count_nonzero(np.asarray(x) == 0))
    if k < 0 or k > absent:
        raise InsufficientAbsentFeaturesError(f"k={k} but only {absent} absent features")


def select_top_k(scores, x, k):
    """ k absent indices with highest score; ties go to the lowest index """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    x = np.asarray(x).reshape(-1)
    if scores.shape != x.shape:
        raise ShapeError(f"Scores {scores.shape} do not match vector {x.shape}")
    _check_k(x, k)
    #
    present = (x != 0).astype(np.int64)
    order = np.lexsort((np.arange(x.shape[0]), -scores, present))
    return tuple(int(item) for item in order[:k])


def inject(x, indices):
    """ Copy of x with the given bits set to 1 """
    perturbed = np.array(x, dtype=np.uint8, copy=True).reshape(-1)
    perturbed[list(indices)] = 1
    return perturbed


def attack_cvae(model, x, target, k, sample_id=-1):
    """ Top-k absent features by inference-mode CVAE scores """
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    _check_k(x, k)
    scores = score_features(model, x[None, :], [target])[0]
    return AdversarialSample(sample_id, "cvae", k, target, x, select_top_k(scores, x, k))


def attack_most_popular(frequency, x, k, target=None, sample_id=-1):  # pylint: disable=R0913
    """ Top-k absent features by target-class training frequency """
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    return AdversarialSample(sample_id, "most_popular", k, target, x, select_top_k(frequency, x, k))


def attack_random(x, k, seed, target=None, sample_id=-1):  # pylint: disable=R0913
    """ k absent features drawn uniformly without replacement """
    x = np.asarray(x, dtype=np.uint8).reshape(-1)
    _check_k(x, k)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(absent_indices(x), size=k, replace=False)
    return AdversarialSample(sample_id, "random", k, target, x, tuple(int(item) for item in chosen))
