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

""" Shared helpers for probability models """

import numpy as np  # pylint: disable=E0401

from ..errors import ShapeError, UnknownClassError


def as_matrix(X):
    """ Feature matrix as 2-D float64 """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"Expected a 2-D feature matrix, got shape {X.shape}")
    return X


def check_width(model, X):
    """ Raise on feature width mismatch """
    if X.shape[1] != model.n_features:
        raise ShapeError(f"Model expects {model.n_features} features, got {X.shape[1]}")


def resolve_classes(y, classes=None):
    """ Sorted class ids (from labels when not given) """
    if classes is None:
        classes = np.unique(np.asarray(y, dtype=np.int64))
    return tuple(int(item) for item in sorted(classes))


def class_positions(y, classes):
    """ Map class ids to positions in classes """
    y = np.asarray(y, dtype=np.int64)
    lookup = np.asarray(classes, dtype=np.int64)
    positions = np.searchsorted(lookup, y)
    positions = np.minimum(positions, lookup.size - 1)
    unknown = lookup[positions] != y
    if np.any(unknown):
        raise UnknownClassError(f"Labels {sorted(set(y[unknown].tolist()))} not in class set {list(classes)}")
    return positions


def check_distributions(probs, atol=1e-9):
    """ Rows are nonnegative and sum to one """
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 2:
        raise ShapeError(f"Distributions must be 2-D, got shape {probs.shape}")
    if np.any(probs < 0.0) or not np.allclose(probs.sum(axis=1), 1.0, rtol=0.0, atol=atol):
        raise ShapeError("Rows are not probability distributions")
    return probs


def predict_proba(model, X):
    """ Per-sample class distributions over model.classes """
    X = as_matrix(X)
    check_width(model, X)
    return model.predict_proba(X)


def predict_labels(probs, classes):
    """ Argmax class ids; ties go to the lowest class id """
    probs = np.asarray(probs, dtype=np.float64)
    return np.asarray(classes, dtype=np.int64)[np.argmax(probs, axis=1)]
