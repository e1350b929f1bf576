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

""" Neural building blocks """

import numpy as np  # pylint: disable=E0401

from ..errors import ShapeError
from . import ops
from .tensor import Parameter


class Module:
    """ Parameter holder with train/eval mode """

    buffer_names = ()

    def __init__(self):
        self.training = True

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        """ Compute outputs """
        raise NotImplementedError

    def children(self):
        """ Direct sub-modules in attribute order """
        for name, value in vars(self).items():
            if isinstance(value, Module):
                yield name, value
            elif isinstance(value, (list, tuple)):
                for position, item in enumerate(value):
                    if isinstance(item, Module):
                        yield f"{name}.{position}", item

    def named_parameters(self, prefix=""):
        """ (dotted name, Tensor) for every parameter, deterministic order """
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                yield prefix + name, value
        for name, child in self.children():
            yield from child.named_parameters(prefix=f"{prefix}{name}.")

    def parameters(self):
        """ Parameter tensors """
        return [tensor for _, tensor in self.named_parameters()]

    def named_buffers(self, prefix=""):
        """ (dotted name, array) for non-trainable state """
        for name in self.buffer_names:
            yield prefix + name, getattr(self, name)
        for name, child in self.children():
            yield from child.named_buffers(prefix=f"{prefix}{name}.")

    def train(self, mode=True):
        """ Set training mode recursively """
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self):
        """ Set evaluation mode recursively """
        return self.train(False)

    def freeze(self):
        """ Stop gradient tracking for all parameters, switch to eval """
        for tensor in self.parameters():
            tensor.requires_grad = False
            tensor.grad = None
        return self.eval()

    def zero_grad(self):
        """ Drop accumulated gradients """
        for tensor in self.parameters():
            tensor.grad = None

    def state_dict(self):
        """ Copies of parameters and buffers by name """
        state = {name: tensor.value.copy() for name, tensor in self.named_parameters()}
        state.update({name: np.array(array, copy=True) for name, array in self.named_buffers()})
        return state

    def load_state_dict(self, state):
        """ Restore parameters and buffers in place """
        expected = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        #
        missing = (set(expected) | set(buffers)) - set(state)
        if missing:
            raise ShapeError(f"State is missing entries: {sorted(missing)}")
        #
        for name, tensor in expected.items():
            array = np.asarray(state[name], dtype=np.float64)
            if array.shape != tensor.shape:
                raise ShapeError(f"{name}: expected {tensor.shape}, got {array.shape}")
            tensor.value = array.copy()
        for name, buffer in buffers.items():
            array = np.asarray(state[name], dtype=np.float64)
            if array.shape != buffer.shape:
                raise ShapeError(f"{name}: expected {buffer.shape}, got {array.shape}")
            buffer[...] = array


def he_uniform(rng, fan_in, fan_out):
    """ He-uniform init for ReLU-family layers """
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def xavier_uniform(rng, fan_in, fan_out):
    """ Xavier-uniform init for linear heads """
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


INITIALIZERS = {
    "he": he_uniform,
    "xavier": xavier_uniform,
}


class Linear(Module):
    """ Fully connected layer y = x W + b """

    def __init__(self, in_features, out_features, rng, init="he"):
        super().__init__()
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(INITIALIZERS[init](rng, in_features, out_features))
        self.bias = Parameter(np.zeros((1, out_features)))

    def forward(self, x):  # pylint: disable=W0221
        if x.cols != self.in_features:
            raise ShapeError(f"Linear expects {self.in_features} inputs, got {x.cols}")
        return ops.add_bias(ops.matmul(x, self.weight), self.bias)


class BatchNorm(Module):
    """ Batch normalization with running statistics """

    buffer_names = ("running_mean", "running_var")

    def __init__(self, features, momentum=0.1, eps=1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones((1, features)))
        self.beta = Parameter(np.zeros((1, features)))
        self.running_mean = np.zeros((1, features))
        self.running_var = np.ones((1, features))

    def forward(self, x):  # pylint: disable=W0221
        return ops.batchnorm(
            x, self.gamma, self.beta, self.running_mean, self.running_var,
            training=self.training, momentum=self.momentum, eps=self.eps,
        )


class Dropout(Module):
    """ Inverted dropout """

    def __init__(self, rate, rng):
        super().__init__()
        self.rate = rate
        self.rng = rng

    def forward(self, x):  # pylint: disable=W0221
        return ops.dropout(x, self.rate, self.training, self.rng)


class DenseBlock(Module):
    """ FC + BN + ReLU + Dropout """

    def __init__(self, in_features, out_features, dropout, rng):
        super().__init__()
        self.linear = Linear(in_features, out_features, rng, init="he")
        self.norm = BatchNorm(out_features)
        self.dropout = Dropout(dropout, rng)

    def forward(self, x):  # pylint: disable=W0221
        return self.dropout(ops.relu(self.norm(self.linear(x))))
