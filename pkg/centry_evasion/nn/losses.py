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

""" Composite losses """

import numpy as np  # pylint: disable=E0401

from ..internal import constants
from . import ops


def one_hot(positions, count):
    """ (n, count) indicator matrix """
    positions = np.asarray(positions, dtype=np.int64)
    matrix = np.zeros((positions.shape[0], count))
    matrix[np.arange(positions.shape[0]), positions] = 1.0
    return matrix


def cross_entropy(logits, positions):
    """ Mean CE of row logits against class positions """
    targets = one_hot(positions, logits.cols)
    picked = ops.sum(ops.mul(ops.log_softmax(logits), targets))
    return ops.mul(picked, -1.0 / logits.rows)


def binary_cross_entropy(probs, targets, weights=None, eps=constants.BCE_CLAMP):
    """ Sum of weighted elementwise BCE (probs clamped to [eps, 1-eps]) """
    targets = np.asarray(targets, dtype=np.float64)
    clamped = ops.clip(probs, eps, 1.0 - eps)
    positive = ops.mul(ops.log(clamped), targets)
    negative = ops.mul(ops.log(ops.sub(1.0, clamped)), 1.0 - targets)
    elementwise = ops.mul(ops.add(positive, negative), -1.0)
    if weights is not None:
        elementwise = ops.mul(elementwise, weights)
    return ops.sum(elementwise)
