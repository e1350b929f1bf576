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

""" Differentiable proxy MLP """

import numpy as np  # pylint: disable=E0401

from ..config import DistillConfig
from ..errors import ShapeError
from ..classical import common
from ..nn import container
from ..nn.batching import batched
from ..nn.layers import Module, Linear, DenseBlock
from ..nn.tensor import Tensor


class ProxyModel(Module):
    """ Dense blocks 2048 -> 1024 -> 512, linear head emitting raw logits """

    def __init__(self, n_features, classes, cfg=None, rng=None):
        super().__init__()
        cfg = cfg or DistillConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        #
        self.n_features = n_features
        self.classes = tuple(int(item) for item in classes)
        self.cfg = cfg
        self.history = []
        #
        widths = (n_features,) + tuple(cfg.hidden)
        self.blocks = [
            DenseBlock(fan_in, fan_out, cfg.dropout, rng) for fan_in, fan_out in zip(widths, widths[1:])
        ]
        self.head = Linear(widths[-1], len(self.classes), rng, init="xavier")

    def forward(self, x):  # pylint: disable=W0221
        if x.cols != self.n_features:
            raise ShapeError(f"Proxy expects {self.n_features} features, got {x.cols}")
        for block in self.blocks:
            x = block(x)
        return self.head(x)


def proxy_logits(model, X, batch_size=1024):
    """ Eval-mode logits as array """
    X = common.as_matrix(X)
    was_training = model.training
    model.eval()
    try:
        parts = [model(Tensor(X[rows])).value for rows in batched(X.shape[0], batch_size)]
    finally:
        model.train(was_training)
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, len(model.classes)))


def proxy_labels(model, X):
    """ Argmax class ids """
    return common.predict_labels(proxy_logits(model, X), model.classes)


def save_proxy(path, model):
    """ Write proxy container """
    return container.save_module(
        path, "proxy", model,
        metadata={
            "n_features": model.n_features,
            "classes": list(model.classes),
            "config": model.cfg.model_dump(mode="json"),
        },
    )


def load_proxy(path):
    """ Read frozen proxy """
    _, tensors, metadata = container.load_parameters(path)
    model = ProxyModel(
        int(metadata["n_features"]), metadata["classes"], DistillConfig.model_validate(metadata["config"]),
    )
    model.load_state_dict(tensors)
    return model.freeze()
