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

""" ArcFace head and supervised contrastive loss """

import math

import numpy as np  # pylint: disable=E0401

from ..errors import EmbeddingNormError
from ..internal import constants
from ..nn import ops
from ..nn.layers import Module, xavier_uniform
from ..nn.losses import one_hot
from ..nn.tensor import Parameter


INPUT_NORM_TOLERANCE = 1e-6
SELF_MASK = -1e9


def _check_unit_rows(h):
    norms = np.linalg.norm(h.value, axis=1)
    if np.any(np.abs(norms - 1.0) > INPUT_NORM_TOLERANCE):
        raise EmbeddingNormError("ArcFace/SupCon input embeddings must be unit-norm")


class ArcFaceHead(Module):
    """ Class centers on the unit sphere with additive angular margin """

    def __init__(self, class_count, embedding_dim, rng, scale=30.0, margin=0.30):  # pylint: disable=R0913
        super().__init__()
        self.scale = scale
        self.margin = margin
        self.weight = Parameter(xavier_uniform(rng, class_count, embedding_dim))
        self.renormalize()

    @property
    def class_count(self):
        """ C """
        return self.weight.rows

    def renormalize(self):
        """ Rescale center rows to unit length """
        norms = np.linalg.norm(self.weight.value, axis=1, keepdims=True)
        self.weight.value = self.weight.value / np.maximum(norms, 1e-12)

    def forward(self, h, positions=None):  # pylint: disable=W0221
        return arcface_logits(h, positions, self)


def arcface_logits(h, positions, head):
    """ s * cos(theta + m * [c == y]); no margin when positions is None """
    _check_unit_rows(h)
    centers = ops.l2_normalize(head.weight)
    cosine = ops.clip(
        ops.matmul(h, ops.transpose(centers)),
        -1.0 + constants.COSINE_CLAMP, 1.0 - constants.COSINE_CLAMP,
    )
    #
    if positions is None or head.margin == 0.0:
        return ops.mul(cosine, head.scale)
    #
    mask = one_hot(positions, head.class_count)
    sine = ops.pow(ops.sub(1.0, ops.mul(cosine, cosine)), 0.5)
    shifted = ops.sub(ops.mul(cosine, math.cos(head.margin)), ops.mul(sine, math.sin(head.margin)))
    logits = ops.add(cosine, ops.mul(ops.sub(shifted, cosine), mask))
    return ops.mul(logits, head.scale)


def supcon_loss(h, positions, temperature=0.1):
    """ Mean over anchors of -mean log p(positive | anchor); anchors without positives give 0 """
    _check_unit_rows(h)
    positions = np.asarray(positions)
    count = h.rows
    #
    self_mask = np.eye(count) * SELF_MASK
    similarity = ops.add(ops.mul(ops.matmul(h, ops.transpose(h)), 1.0 / temperature), self_mask)
    log_prob = ops.log_softmax(similarity)
    #
    positives = (positions[:, None] == positions[None, :]).astype(np.float64)
    np.fill_diagonal(positives, 0.0)
    per_anchor = positives.sum(axis=1, keepdims=True)
    weights = positives / np.maximum(per_anchor, 1.0)
    #
    total = ops.sum(ops.mul(log_prob, weights))
    return ops.mul(total, -1.0 / count)
