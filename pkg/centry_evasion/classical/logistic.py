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

""" Multinomial logistic regression """

import dataclasses

import numpy as np  # pylint: disable=E0401
from scipy import special  # pylint: disable=E0401

from .. import log
from ..config import LogisticConfig
from ..errors import ShapeError, NonFiniteError, TrainingDivergedError
from ..nn import ops, container
from ..nn.losses import cross_entropy
from ..nn.optim import Adam
from ..nn.tensor import Tape, Tensor, Parameter
from . import common


@dataclasses.dataclass(frozen=True)
class LinearModel:
    """ Softmax regression: weight (C x d), bias (C,) """

    weight: np.ndarray
    bias: np.ndarray
    l2: float
    classes: tuple

    @property
    def n_features(self):
        """ Input width d """
        return self.weight.shape[1]

    def logits(self, X):
        """ Raw class scores """
        return X @ self.weight.T + self.bias

    def predict_proba(self, X):
        """ Softmax of logits """
        X = common.as_matrix(X)
        common.check_width(self, X)
        return special.softmax(self.logits(X), axis=1)


def train_logistic(X, y, cfg=None, classes=None):  # pylint: disable=R0914
    """ Full-batch Adam on cross-entropy + l2 * ||W||^2 """
    cfg = cfg or LogisticConfig()
    X = common.as_matrix(X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0 or X.shape[0] != y.shape[0]:
        raise ShapeError(f"train_logistic needs equal nonzero sample counts, got {X.shape[0]} and {y.shape[0]}")
    #
    classes = common.resolve_classes(y, classes)
    positions = common.class_positions(y, classes)
    inputs = Tensor(X)
    weight = Parameter(np.zeros((X.shape[1], len(classes))), name="weight")
    bias = Parameter(np.zeros((1, len(classes))), name="bias")
    optimizer = Adam([weight, bias], lr=cfg.lr)
    #
    previous = None
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        optimizer.zero_grad()
        try:
            with Tape() as tape:
                logits = ops.add_bias(ops.matmul(inputs, weight), bias)
                loss = ops.add(cross_entropy(logits, positions), ops.mul(ops.sum(ops.mul(weight, weight)), cfg.l2))
        except NonFiniteError as exc:
            raise TrainingDivergedError("logistic", iteration, exc.op_name) from exc
        #
        value = loss.item()
        if previous is not None and abs(previous - value) < cfg.tolerance:
            break
        tape.backward(loss)
        optimizer.step()
        previous = value
    #
    log.debug("Logistic trained", extra={"iterations": iteration, "loss": previous, "classes": len(classes)})
    return LinearModel(
        weight=weight.value.T.copy(),
        bias=bias.value.reshape(-1).copy(),
        l2=cfg.l2,
        classes=classes,
    )


def save_logistic(path, model):
    """ Write parameter container """
    return container.save_parameters(
        path, "logistic",
        {"weight": model.weight, "bias": model.bias.reshape(1, -1)},
        metadata={"classes": list(model.classes), "l2": model.l2},
    )


def load_logistic(path):
    """ Read parameter container """
    _, tensors, metadata = container.load_parameters(path)
    return LinearModel(
        weight=tensors["weight"],
        bias=tensors["bias"].reshape(-1),
        l2=float(metadata["l2"]),
        classes=tuple(int(item) for item in metadata["classes"]),
    )
