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

""" Soft-vote weight search on the simplex grid """

import numpy as np  # pylint: disable=E0401
import joblib  # pylint: disable=E0401
from sklearn.metrics import f1_score  # pylint: disable=E0401

from .. import log
from ..errors import ShapeError


def compositions(total, parts):
    """ Nonnegative integer vectors of length parts summing to total, lexicographic order """
    if parts == 1:
        return [(total,)]
    result = []
    for head in range(total + 1):
        result.extend((head,) + tail for tail in compositions(total - head, parts - 1))
    return result


def simplex_grid(parts, units=20):
    """ Grid points of step 1/units on the (parts-1)-simplex """
    return np.asarray(compositions(units, parts), dtype=np.float64) / units


def _score_points(stacked, truth, classes, labels, points):
    scores = []
    for point in points:
        combined = np.tensordot(point, stacked, axes=1)
        predicted = classes[np.argmax(combined, axis=1)]
        scores.append(f1_score(truth, predicted, labels=labels, average="macro", zero_division=0))
    return scores


def optimize_weights(member_probs, truth, classes, units=20, n_jobs=1):
    """ Grid point maximizing validation macro-F1; first (lexicographically smallest) maximum wins """
    stacked = np.stack([np.asarray(item, dtype=np.float64) for item in member_probs])
    truth = np.asarray(truth, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    if stacked.shape[1] != truth.shape[0] or stacked.shape[2] != classes.shape[0]:
        raise ShapeError(f"Member predictions {stacked.shape} do not match {truth.shape[0]} labels / {classes.shape[0]} classes")
    #
    grid = simplex_grid(stacked.shape[0], units)
    labels = [int(item) for item in classes if np.any(truth == item)]
    chunks = np.array_split(grid, max(1, n_jobs) * 4)
    #
    parts = joblib.Parallel(n_jobs=n_jobs)(
        joblib.delayed(_score_points)(stacked, truth, classes, labels, chunk) for chunk in chunks if len(chunk)
    )
    scores = np.concatenate([np.asarray(item) for item in parts])
    #
    best = int(np.argmax(scores))
    weights = grid[best]
    log.info(
        "Ensemble weights selected",
        extra={"weights": ",".join(f"{item:.2f}" for item in weights), "val_macro_f1": float(scores[best]), "grid": len(grid)},
    )
    return weights
