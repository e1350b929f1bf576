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

""" MLP encoder: FC1024 -> FC512 -> residual 512 -> FC128 -> L2 norm """

import numpy as np  # pylint: disable=E0401

from ..config import EncoderConfig
from ..errors import ShapeError, EmbeddingNormError
from ..nn import ops, container
from ..nn.batching import batched
from ..nn.layers import Module, Linear, BatchNorm, Dropout, DenseBlock
from ..nn.tensor import Tensor


NORM_TOLERANCE = 1e-9


class ResidualBlock(Module):
    """ [FC+BN+ReLU+Dropout, FC+BN] + input, then ReLU """

    def __init__(self, features, dropout, rng):
        super().__init__()
        self.first = DenseBlock(features, features, dropout, rng)
        self.linear = Linear(features, features, rng)
        self.norm = BatchNorm(features)

    def forward(self, x):  # pylint: disable=W0221
        return ops.relu(ops.add(x, self.norm(self.linear(self.first(x)))))


class EncoderModel(Module):
    """ Feature vector -> unit-norm embedding """

    def __init__(self, n_features, cfg=None, rng=None):
        super().__init__()
        cfg = cfg or EncoderConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        #
        self.n_features = n_features
        self.cfg = cfg
        self.history = []
        #
        self.input_block = DenseBlock(n_features, cfg.hidden[0], cfg.dropout, rng)
        self.hidden_block = DenseBlock(cfg.hidden[0], cfg.hidden[1], cfg.dropout, rng)
        self.residual = ResidualBlock(cfg.hidden[1], cfg.dropout, rng)
        self.projection = Linear(cfg.hidden[1], cfg.embedding_dim, rng, init="xavier")

    @property
    def embedding_dim(self):
        """ Output width """
        return self.cfg.embedding_dim

    def forward(self, x):  # pylint: disable=W0221
        if x.cols != self.n_features:
            raise ShapeError(f"Encoder expects {self.n_features} features, got {x.cols}")
        hidden = self.residual(self.hidden_block(self.input_block(x)))
        return ops.l2_normalize(self.projection(hidden))


def check_unit_norm(embeddings, tolerance=NORM_TOLERANCE):
    """ Raise unless every row has unit L2 norm """
    norms = np.linalg.norm(np.asarray(embeddings), axis=1)
    if norms.size and np.max(np.abs(norms - 1.0)) > tolerance:
        raise EmbeddingNormError(f"Embedding norms deviate from 1 by up to {np.max(np.abs(norms - 1.0)):.3e}")


def embed(model, X, batch_size=1024):
    """ Deterministic eval-mode embeddings """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise ShapeError(f"Encoder expects {model.n_features} features, got shape {X.shape}")
    #
    was_training = model.training
    model.eval()
    try:
        parts = [model(Tensor(X[rows])).value for rows in batched(X.shape[0], batch_size)]
    finally:
        model.train(was_training)
    #
    embeddings = np.concatenate(parts, axis=0) if parts else np.zeros((0, model.embedding_dim))
    check_unit_norm(embeddings)
    return embeddings


def save_encoder(path, model):
    """ Write encoder parameters and stats """
    return container.save_module(
        path, "encoder", model,
        metadata={"n_features": model.n_features, "config": model.cfg.model_dump(mode="json")},
    )


def load_encoder(path):
    """ Read frozen encoder """
    _, tensors, metadata = container.load_parameters(path)
    model = EncoderModel(
        int(metadata["n_features"]), EncoderConfig.model_validate(metadata["config"]),
    )
    model.load_state_dict(tensors)
    return model.freeze()
