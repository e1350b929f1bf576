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

""" Temperature-softened distillation loss """

import numpy as np  # pylint: disable=E0401
from scipy import special  # pylint: disable=E0401

from .. import log
from ..internal import constants
from ..nn import ops
from ..nn.losses import cross_entropy
from ..nn.tensor import Tensor


def soften_teacher(q, temperature):
    """ q^(1/T) renormalized; zeros floored first """
    q = np.asarray(q, dtype=np.float64)
    floored = q < constants.PROBABILITY_FLOOR
    if np.any(floored):
        log.debug("Teacher probabilities floored", extra={"entries": int(np.count_nonzero(floored))})
        q = np.maximum(q, constants.PROBABILITY_FLOOR)
    #
    powered = np.exp(np.log(q) / temperature)
    return powered / powered.sum(axis=-1, keepdims=True)


def soften_student(logits, temperature):
    """ softmax(logits / T); tensors stay on the tape """
    if isinstance(logits, Tensor):
        return ops.softmax(ops.mul(logits, 1.0 / temperature))
    return special.softmax(np.asarray(logits, dtype=np.float64) / temperature, axis=-1)


def distill_loss(student_logits, teacher_q, positions, cfg):
    """ alpha * T^2 * KL(q_soft || p_soft) + (1 - alpha) * CE(logits, y), batch means """
    temperature, alpha = cfg.temperature, cfg.alpha
    q_soft = soften_teacher(teacher_q, temperature)
    rows = student_logits.rows
    #
    log_p_soft = ops.log_softmax(ops.mul(student_logits, 1.0 / temperature))
    entropy_term = float(np.sum(q_soft * np.log(q_soft)))
    cross_term = ops.sum(ops.mul(log_p_soft, q_soft))
    kl = ops.mul(ops.sub(entropy_term, cross_term), 1.0 / rows)
    #
    soft = ops.mul(kl, alpha * temperature * temperature)
    if alpha == 1.0:
        return soft
    hard = ops.mul(cross_entropy(student_logits, positions), 1.0 - alpha)
    return ops.add(soft, hard)
