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

""" Proxy distillation from ensemble A """

import os

import numpy as np  # pylint: disable=E0401

from .. import log
from ..config import DistillConfig
from ..errors import NonFiniteError, TrainingDivergedError, ShapeError
from ..classical.common import class_positions
from ..ensemble.model import ensemble_predict, ensemble_labels
from ..nn import container
from ..nn.batching import minibatches
from ..nn.optim import Adam
from ..nn.tensor import Tape, Tensor
from ..tools import seeding
from .loss import distill_loss
from .proxy import ProxyModel, proxy_labels


def compute_teacher_matrix(ensemble, X):
    """ Q[i] = ensemble-A distribution of sample i (eval mode) """
    return ensemble_predict(ensemble, X)


def save_teacher_matrix(path, matrix, key):
    """ Cache Q keyed by ensemble manifest hash """
    return container.save_parameters(path, "teacher_matrix", {"q": matrix}, metadata={"ensemble_hash": key})


def load_teacher_matrix(path, key=None):
    """ Cached Q, or None when absent or keyed to another ensemble """
    if not os.path.exists(path):
        return None
    _, tensors, metadata = container.load_parameters(path)
    if key is not None and metadata.get("ensemble_hash") != key:
        log.info("Teacher cache stale", extra={"cached": metadata.get("ensemble_hash"), "expected": key})
        return None
    return tensors["q"]


def cached_teacher_matrix(path, ensemble, X, key):
    """ Load Q from cache or compute and store it """
    matrix = load_teacher_matrix(path, key)
    if matrix is not None and matrix.shape[0] == X.shape[0]:
        log.info("Teacher cache hit", extra={"rows": matrix.shape[0]})
        return matrix
    matrix = compute_teacher_matrix(ensemble, X)
    save_teacher_matrix(path, matrix, key)
    return matrix


def train_proxy(ensemble, ds_train, cfg=None, seed=0, teacher_q=None):  # pylint: disable=R0914
    """ Distill ensemble soft outputs into the proxy, then freeze it """
    cfg = cfg or DistillConfig()
    classes = tuple(ensemble.classes)
    X = ds_train.features()
    positions = class_positions(ds_train.labels, classes)
    teacher_q = compute_teacher_matrix(ensemble, X) if teacher_q is None else np.asarray(teacher_q)
    if teacher_q.shape != (X.shape[0], len(classes)):
        raise ShapeError(f"Teacher matrix shape {teacher_q.shape} does not match {(X.shape[0], len(classes))}")
    #
    proxy = ProxyModel(X.shape[1], classes, cfg, seeding.make_rng(seed, "proxy", "init"))
    optimizer = Adam(proxy.parameters(), lr=cfg.lr)
    batch_rng = seeding.make_rng(seed, "proxy", "batches")
    #
    for epoch in range(1, cfg.epochs + 1):
        proxy.train()
        losses = []
        for rows in minibatches(X.shape[0], cfg.batch_size, batch_rng):
            optimizer.zero_grad()
            try:
                with Tape() as tape:
                    loss = distill_loss(proxy(Tensor(X[rows])), teacher_q[rows], positions[rows], cfg)
            except NonFiniteError as exc:
                raise TrainingDivergedError("proxy", epoch, exc.op_name) from exc
            tape.backward(loss)
            optimizer.step()
            losses.append(loss.item())
        #
        epoch_loss = float(np.mean(losses))
        proxy.history.append({"epoch": epoch, "loss": epoch_loss})
        log.info("Proxy epoch", extra={"epoch": epoch, "loss": epoch_loss})
    #
    return proxy.freeze()


def agreement_rate(proxy, ensemble, X):
    """ Fraction of samples where proxy and ensemble argmax agree """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        return float("nan")
    return float(np.mean(proxy_labels(proxy, X) == ensemble_labels(ensemble, X)))
