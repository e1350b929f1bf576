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

""" Conditional VAE with additive decoder """

import numpy as np  # pylint: disable=E0401

from ..config import CvaeConfig
from ..errors import ShapeError, UnknownClassError
from ..internal import constants
from ..nn import ops, container
from ..nn.batching import batched
from ..nn.layers import Module, Linear
from ..nn.losses import one_hot
from ..nn.tensor import Tensor, Parameter, as_tensor


class CvaeModel(Module):
    """ Encoder E(x, e_c) -> (mu, logvar); decoder G(x, z, e_c) -> per-feature scores """

    def __init__(self, n_features, cfg=None, rng=None, target_classes=constants.BENIGN_CLASSES):
        super().__init__()
        cfg = cfg or CvaeConfig()
        rng = rng if rng is not None else np.random.default_rng(0)
        #
        self.n_features = n_features
        self.cfg = cfg
        self.target_classes = tuple(int(item) for item in target_classes)
        self.history = []
        #
        self.class_embedding = Parameter(rng.uniform(-0.05, 0.05, size=(len(self.target_classes), cfg.embed_dim)))
        #
        first, second = cfg.encoder_hidden
        self.encoder_layers = [
            Linear(n_features + cfg.embed_dim, first, rng),
            Linear(first, second, rng),
        ]
        self.mu_head = Linear(second, cfg.latent_dim, rng, init="xavier")
        self.logvar_head = Linear(second, cfg.latent_dim, rng, init="xavier")
        #
        widths = (n_features + cfg.latent_dim + cfg.embed_dim,) + tuple(cfg.decoder_hidden) + (n_features,)
        self.decoder_layers = [
            Linear(fan_in, fan_out, rng, init="he" if position < len(widths) - 2 else "xavier")
            for position, (fan_in, fan_out) in enumerate(zip(widths, widths[1:]))
        ]

    @property
    def latent_dim(self):
        """ d """
        return self.cfg.latent_dim

    def class_vectors(self, targets):
        """ e_c rows for target class ids """
        targets = np.asarray(targets, dtype=np.int64).reshape(-1)
        unknown = sorted(set(targets.tolist()) - set(self.target_classes))
        if unknown:
            raise UnknownClassError(f"Target classes {unknown} not in {list(self.target_classes)}")
        positions = np.searchsorted(np.asarray(self.target_classes), targets)
        return ops.matmul(one_hot(positions, len(self.target_classes)), self.class_embedding)

    def forward(self, x, targets, noise=None):  # pylint: disable=W0221
        mu, logvar = encode(self, x, targets)
        z = reparameterize(mu, logvar, noise)
        scores, relaxed = decode_additive(self, x, z, targets)
        return mu, logvar, scores, relaxed


def _check_input(model, x):
    x = as_tensor(x)
    if x.cols != model.n_features:
        raise ShapeError(f"CVAE expects {model.n_features} features, got {x.cols}")
    return x


def encode(model, x, targets):
    """ (mu, logvar) from concat(x, e_c) """
    x = _check_input(model, x)
    hidden = ops.concat([x, model.class_vectors(targets)])
    for layer in model.encoder_layers:
        hidden = ops.leaky_relu(layer(hidden), model.cfg.leaky_slope)
    return model.mu_head(hidden), model.logvar_head(hidden)


def reparameterize(mu, logvar, noise=None):
    """ z = mu + exp(logvar / 2) * eps; noise None means inference (z = mu) """
    if noise is None:
        return mu
    if isinstance(noise, np.random.Generator):
        noise = noise.standard_normal(mu.shape)
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != mu.shape:
        raise ShapeError(f"Noise shape {noise.shape} does not match latent {mu.shape}")
    return ops.add(mu, ops.mul(ops.exp(ops.mul(logvar, 0.5)), noise))


def decode_additive(model, x, z, targets):
    """ s = sigmoid(G(x, z, e_c)); x_tilde = x + (1 - x) * s """
    x = _check_input(model, x)
    hidden = ops.concat([x, z, model.class_vectors(targets)])
    for layer in model.decoder_layers[:-1]:
        hidden = ops.leaky_relu(layer(hidden), model.cfg.leaky_slope)
    scores = ops.sigmoid(model.decoder_layers[-1](hidden))
    relaxed = ops.add(x, ops.mul(scores, 1.0 - x.value))
    return scores, relaxed


def score_features(model, X, targets, batch_size=512):
    """ Inference-mode scores (z = mu) as array """
    X = np.asarray(X, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != targets.shape[0]:
        raise ShapeError(f"Need one target per row, got {X.shape} and {targets.shape}")
    #
    was_training = model.training
    model.eval()
    try:
        parts = []
        for rows in batched(X.shape[0], batch_size):
            x = Tensor(X[rows])
            mu, _ = encode(model, x, targets[rows])
            scores, _ = decode_additive(model, x, mu, targets[rows])
            parts.append(scores.value)
    finally:
        model.train(was_training)
    return np.concatenate(parts, axis=0) if parts else np.zeros((0, model.n_features))


def save_cvae(path, model):
    """ Write CVAE container """
    return container.save_module(
        path, "cvae", model,
        metadata={
            "n_features": model.n_features,
            "target_classes": list(model.target_classes),
            "config": model.cfg.model_dump(mode="json"),
        },
    )


def load_cvae(path):
    """ Read CVAE in eval mode """
    _, tensors, metadata = container.load_parameters(path)
    model = CvaeModel(
        int(metadata["n_features"]), CvaeConfig.model_validate(metadata["config"]),
        target_classes=metadata["target_classes"],
    )
    model.load_state_dict(tensors)
    return model.eval()
