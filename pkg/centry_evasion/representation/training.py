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

""" Encoder training: ArcFace CE + weighted SupCon """

import numpy as np  # pylint: disable=E0401

from .. import log
from ..config import EncoderConfig
from ..errors import NonFiniteError, TrainingDivergedError, ShapeError
from ..classical.common import resolve_classes, class_positions
from ..nn import ops
from ..nn.batching import minibatches
from ..nn.losses import cross_entropy
from ..nn.optim import Adam
from ..nn.tensor import Tape, Tensor
from ..tools import seeding
from .encoder import EncoderModel, embed
from .losses import ArcFaceHead, arcface_logits, supcon_loss
from .probe import NearestCentroidProbe


def encoder_loss(encoder, head, x, positions, cfg):
    """ (total, ce, supcon) tensors for one batch """
    h = encoder(x)
    ce = cross_entropy(arcface_logits(h, positions, head), positions)
    contrastive = supcon_loss(h, positions, cfg.supcon_temperature)
    return ops.add(ce, ops.mul(contrastive, cfg.supcon_weight)), ce, contrastive


def probe_score(encoder, ds_train, ds_val):
    """ Validation macro-F1 of nearest-centroid on embeddings """
    probe = NearestCentroidProbe().fit(embed(encoder, ds_train.features()), ds_train.labels)
    return probe.macro_f1(embed(encoder, ds_val.features()), ds_val.labels)


def train_encoder(ds_train, ds_val, cfg=None, seed=0, classes=None):  # pylint: disable=R0914
    """ Train encoder, early-stop on probe macro-F1, discard head, return frozen encoder """
    cfg = cfg or EncoderConfig()
    classes = resolve_classes(ds_train.labels, classes)
    if len(np.unique(ds_train.labels)) < 2:
        raise ShapeError("Encoder training needs at least two classes")
    #
    X = ds_train.features()
    positions = class_positions(ds_train.labels, classes)
    #
    encoder = EncoderModel(ds_train.n_features, cfg, seeding.make_rng(seed, "encoder", "init"))
    head = ArcFaceHead(
        len(classes), cfg.embedding_dim, seeding.make_rng(seed, "encoder", "head"),
        scale=cfg.arcface_scale, margin=cfg.arcface_margin,
    )
    optimizer = Adam(encoder.parameters() + head.parameters(), lr=cfg.lr)
    batch_rng = seeding.make_rng(seed, "encoder", "batches")
    #
    best_score = -np.inf
    best_state = None
    stale = 0
    #
    for epoch in range(1, cfg.epochs + 1):
        encoder.train()
        losses = []
        for rows in minibatches(X.shape[0], cfg.batch_size, batch_rng):
            optimizer.zero_grad()
            try:
                with Tape() as tape:
                    loss, _, _ = encoder_loss(encoder, head, Tensor(X[rows]), positions[rows], cfg)
            except NonFiniteError as exc:
                raise TrainingDivergedError("encoder", epoch, exc.op_name) from exc
            tape.backward(loss)
            optimizer.step()
            head.renormalize()
            losses.append(loss.item())
        #
        epoch_loss = float(np.mean(losses))
        score = probe_score(encoder, ds_train, ds_val) if len(ds_val) else -epoch_loss
        encoder.history.append({"epoch": epoch, "loss": epoch_loss, "probe_f1": score})
        log.info("Encoder epoch", extra={"epoch": epoch, "loss": epoch_loss, "probe_f1": score})
        #
        if score > best_score:
            best_score = score
            best_state = encoder.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("Encoder early stop", extra={"epoch": epoch, "best_probe_f1": best_score})
                break
    #
    encoder.load_state_dict(best_state)
    return encoder.freeze()
