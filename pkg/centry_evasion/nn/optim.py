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

""" Adam optimizer and gradient clipping """

import dataclasses

import numpy as np  # pylint: disable=E0401

from ..errors import ShapeError


@dataclasses.dataclass
class AdamState:  # pylint: disable=R0902
    """ Moment estimates and hyperparameters """

    first: list
    second: list
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def create(cls, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        """ Zero moments shaped like params """
        return cls(
            first=[np.zeros(tensor.shape) for tensor in params],
            second=[np.zeros(tensor.shape) for tensor in params],
            lr=lr, beta1=betas[0], beta2=betas[1], eps=eps,
        )


def global_norm(grads):
    """ L2 norm of all gradients concatenated """
    return float(np.sqrt(sum(float(np.sum(grad * grad)) for grad in grads)))


def clip_gradients(grads, clip_norm):
    """ Scale gradients so their global norm is <= clip_norm """
    norm = global_norm(grads)
    if clip_norm is None or norm <= clip_norm or norm == 0.0:
        return grads, norm
    scale = clip_norm / norm
    return [grad * scale for grad in grads], norm


def adam_step(params, grads, state, clip_norm=None):
    """ One bias-corrected Adam update applied to params in place """
    if len(params) != len(grads) or len(params) != len(state.first):
        raise ShapeError("adam_step: params, grads and state differ in length")
    #
    grads = [
        np.zeros(tensor.shape) if grad is None else np.asarray(grad, dtype=np.float64)
        for tensor, grad in zip(params, grads)
    ]
    for tensor, grad in zip(params, grads):
        if grad.shape != tensor.shape:
            raise ShapeError(f"adam_step: gradient {grad.shape} for parameter {tensor.shape}")
    #
    grads, norm = clip_gradients(grads, clip_norm)
    #
    state.step += 1
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    #
    for position, (tensor, grad) in enumerate(zip(params, grads)):
        first = state.first[position]
        second = state.second[position]
        first *= state.beta1
        first += (1.0 - state.beta1) * grad
        second *= state.beta2
        second += (1.0 - state.beta2) * grad * grad
        #
        update = (first / correction1) / (np.sqrt(second / correction2) + state.eps)
        tensor.value = tensor.value - state.lr * update
    #
    return norm


class Adam:
    """ Adam over a fixed parameter list, reading .grad """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, clip_norm=None):  # pylint: disable=R0913
        self.params = list(params)
        self.clip_norm = clip_norm
        self.state = AdamState.create(self.params, lr=lr, betas=betas, eps=eps)

    def zero_grad(self):
        """ Drop gradients of managed params """
        for tensor in self.params:
            tensor.grad = None

    def step(self):
        """ Apply update; returns pre-clip gradient norm """
        return adam_step(
            self.params, [tensor.grad for tensor in self.params], self.state, clip_norm=self.clip_norm,
        )
