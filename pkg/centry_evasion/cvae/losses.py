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

""" CVAE loss terms """

import collections

import numpy as np  # pylint: disable=E0401

from ..classical.common import class_positions
from ..errors import NonFiniteError
from ..nn import ops
from ..nn.losses import binary_cross_entropy, cross_entropy
from .model import encode, reparameterize, decode_additive


ReconstructionLoss = collections.namedtuple("ReconstructionLoss", ["value", "all_present"])
LossTerms = collections.namedtuple(
    "LossTerms", ["total", "reconstruction", "kl", "sparsity", "classification"],
)

TERM_NAMES = ("reconstruction", "kl", "sparsity", "classification")


def loss_reconstruction(relaxed, x, x_ref):
    """ Per sample mean BCE(x_tilde, x_ref) over absent features, averaged over batch """
    x = np.asarray(getattr(x, "value", x), dtype=np.float64)
    x_ref = np.asarray(getattr(x_ref, "value", x_ref), dtype=np.float64)
    absent = 1.0 - x
    absent_count = absent.sum(axis=1, keepdims=True)
    weights = absent / np.maximum(absent_count, 1.0) / x.shape[0]
    return ReconstructionLoss(
        value=binary_cross_entropy(relaxed, x_ref, weights),
        all_present=bool(np.all(absent_count == 0)),
    )


def loss_kl(mu, logvar):
    """ -1/2 sum(1 + logvar - mu^2 - exp(logvar)), averaged over batch """
    inner = ops.sub(ops.add(logvar, 1.0), ops.add(ops.mul(mu, mu), ops.exp(logvar)))
    return ops.mul(ops.sum(inner), -0.5 / mu.rows)


def loss_sparsity(relaxed, x):
    """ sum_j (x_tilde_j - x_j), averaged over batch """
    return ops.mul(ops.sum(ops.sub(relaxed, x)), 1.0 / relaxed.rows)


def loss_classification(relaxed, targets, proxy):
    """ CE(proxy(binarize(x_tilde)), c*) with straight-through rounding """
    logits = proxy(ops.straight_through_binarize(relaxed, 0.5))
    return cross_entropy(logits, class_positions(targets, proxy.classes))


def combine_terms(reconstruction, kl, sparsity, classification, cfg):
    """ lambda_r * rec + beta * kl + lambda_s * sp + lambda_c * cls """
    return ops.add(
        ops.add(ops.mul(reconstruction, cfg.lambda_r), ops.mul(kl, cfg.beta)),
        ops.add(ops.mul(sparsity, cfg.lambda_s), ops.mul(classification, cfg.lambda_c)),
    )


def _term(name, fn, *args):
    try:
        return fn(*args)
    except NonFiniteError as exc:
        exc.term = name
        raise


def cvae_losses(model, proxy, x, targets, x_ref, cfg, noise=None):  # pylint: disable=R0913
    """ All four terms and the weighted total for one batch """
    mu, logvar = _term("encode", encode, model, x, targets)
    z = _term("reparameterize", reparameterize, mu, logvar, noise)
    _, relaxed = _term("decode", decode_additive, model, x, z, targets)
    #
    reconstruction = _term("reconstruction", loss_reconstruction, relaxed, x, x_ref).value
    kl = _term("kl", loss_kl, mu, logvar)
    sparsity = _term("sparsity", loss_sparsity, relaxed, x)
    classification = _term("classification", loss_classification, relaxed, targets, proxy)
    total = _term("total", combine_terms, reconstruction, kl, sparsity, classification, cfg)
    return LossTerms(total, reconstruction, kl, sparsity, classification)
