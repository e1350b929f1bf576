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

""" Central finite-difference gradient oracle """

import dataclasses

import numpy as np  # pylint: disable=E0401

from .tensor import Tape


@dataclasses.dataclass
class GradCheckResult:
    """ Analytic vs numeric gradients per checked tensor """

    analytic: list
    numeric: list
    relative_errors: list

    @property
    def max_relative_error(self):
        """ Worst relative error over tensors """
        return max(self.relative_errors) if self.relative_errors else 0.0


def relative_error(analytic, numeric, floor=0.0):
    """ ||a - n|| / (||a|| + ||n||), 0 when the difference is within floor """
    difference = np.linalg.norm(analytic - numeric)
    if difference <= floor:
        return 0.0
    return float(difference / (np.linalg.norm(analytic) + np.linalg.norm(numeric)))


def numeric_gradient(fn, tensor, step=1e-5):
    """ d fn() / d tensor by central differences """
    grad = np.zeros(tensor.shape)
    for index in np.ndindex(*tensor.shape):
        original = tensor.value[index]
        tensor.value[index] = original + step
        upper = fn().item()
        tensor.value[index] = original - step
        lower = fn().item()
        tensor.value[index] = original
        grad[index] = (upper - lower) / (2.0 * step)
    return grad


def check_gradients(fn, tensors, step=1e-5, noise_ratio=1e-7):
    """ Compare reverse-mode gradients of scalar fn() against finite differences

    Differences below noise_ratio times the largest per-tensor gradient norm
    count as exact
    """
    for tensor in tensors:
        tensor.grad = None
    #
    with Tape() as tape:
        loss = fn()
    tape.backward(loss)
    #
    analytic = [
        np.zeros(tensor.shape) if tensor.grad is None else tensor.grad.copy() for tensor in tensors
    ]
    numeric = [numeric_gradient(fn, tensor, step=step) for tensor in tensors]
    scale = max(
        (np.linalg.norm(a) + np.linalg.norm(n) for a, n in zip(analytic, numeric)), default=0.0,
    )
    floor = noise_ratio * scale
    #
    return GradCheckResult(
        analytic=analytic,
        numeric=numeric,
        relative_errors=[relative_error(a, n, floor) for a, n in zip(analytic, numeric)],
    )
