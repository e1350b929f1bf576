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

""" Differentiable primitives over 2-D float64 tensors """

import numpy as np  # pylint: disable=E0401
from scipy import special  # pylint: disable=E0401

from ..errors import ShapeError, NonFiniteError
from .tensor import Tensor, as_tensor, current_tape


def _emit(name, value, inputs, backward):
    """ Wrap op output, enforce finiteness, record on active tape """
    if not np.all(np.isfinite(value)):
        raise NonFiniteError(name)
    #
    requires_grad = any(item.requires_grad for item in inputs)
    output = Tensor(value, requires_grad=requires_grad)
    #
    tape = current_tape()
    if tape is not None and requires_grad:
        tape.record(name, output, inputs, backward)
    #
    return output


def _unbroadcast(grad, shape):
    """ Sum gradient back onto a broadcast operand shape """
    for axis in (0, 1):
        if shape[axis] == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(name, left, right):
    try:
        return np.broadcast_shapes(left.shape, right.shape)
    except ValueError as exc:
        raise ShapeError(f"{name}: cannot broadcast {left.shape} with {right.shape}") from exc

#
# Linear algebra
#

def matmul(a, b):
    """ (n,k) @ (k,m) """
    a, b = as_tensor(a), as_tensor(b)
    if a.cols != b.rows:
        raise ShapeError(f"matmul: {a.shape} @ {b.shape}")
    #
    def backward(grad):
        return grad @ b.value.T, a.value.T @ grad
    #
    return _emit("matmul", a.value @ b.value, (a, b), backward)


def transpose(x):
    """ (n,m) -> (m,n) """
    x = as_tensor(x)
    return _emit("transpose", x.value.T.copy(), (x,), lambda grad: (grad.T,))


def add_bias(x, bias):
    """ Row-wise bias (n,m) + (1,m) """
    x, bias = as_tensor(x), as_tensor(bias)
    if bias.rows != 1 or bias.cols != x.cols:
        raise ShapeError(f"add_bias: {x.shape} + {bias.shape}")
    #
    def backward(grad):
        return grad, grad.sum(axis=0, keepdims=True)
    #
    return _emit("add_bias", x.value + bias.value, (x, bias), backward)


def concat(tensors):
    """ Column-wise concatenation """
    tensors = [as_tensor(item) for item in tensors]
    rows = {item.rows for item in tensors}
    if len(rows) != 1:
        raise ShapeError(f"concat: row counts differ {sorted(rows)}")
    #
    bounds = np.cumsum([item.cols for item in tensors])[:-1]
    #
    def backward(grad):
        return tuple(np.split(grad, bounds, axis=1))
    #
    return _emit("concat", np.concatenate([item.value for item in tensors], axis=1), tensors, backward)

#
# Elementwise
#

def add(a, b):
    """ a + b with 2-D broadcasting """
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("add", a, b)
    #
    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)
    #
    return _emit("add", a.value + b.value, (a, b), backward)


def sub(a, b):
    """ a - b with 2-D broadcasting """
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("sub", a, b)
    #
    def backward(grad):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)
    #
    return _emit("sub", a.value - b.value, (a, b), backward)


def mul(a, b):
    """ a * b with 2-D broadcasting """
    a, b = as_tensor(a), as_tensor(b)
    _broadcast_shape("mul", a, b)
    #
    def backward(grad):
        return _unbroadcast(grad * b.value, a.shape), _unbroadcast(grad * a.value, b.shape)
    #
    return _emit("mul", a.value * b.value, (a, b), backward)


def pow(x, exponent):  # pylint: disable=W0622
    """ x ** exponent for scalar exponent """
    x = as_tensor(x)
    exponent = float(exponent)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.power(x.value, exponent)
    #
    def backward(grad):
        return (grad * exponent * np.power(x.value, exponent - 1.0),)
    #
    return _emit("pow", value, (x,), backward)


def log(x):
    """ Natural log """
    x = as_tensor(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        value = np.log(x.value)
    return _emit("log", value, (x,), lambda grad: (grad / x.value,))


def exp(x):
    """ Exponential """
    x = as_tensor(x)
    with np.errstate(over="ignore"):
        value = np.exp(x.value)
    return _emit("exp", value, (x,), lambda grad: (grad * value,))


def clip(x, low, high):
    """ Clamp to [low, high]; gradient zero outside """
    x = as_tensor(x)
    inside = (x.value >= low) & (x.value <= high)
    return _emit("clip", np.clip(x.value, low, high), (x,), lambda grad: (grad * inside,))

#
# Activations
#

def relu(x):
    """ max(x, 0) """
    x = as_tensor(x)
    active = x.value > 0
    return _emit("relu", x.value * active, (x,), lambda grad: (grad * active,))


def leaky_relu(x, slope=0.01):
    """ x if x > 0 else slope * x """
    x = as_tensor(x)
    factor = np.where(x.value > 0, 1.0, slope)
    return _emit("leaky_relu", x.value * factor, (x,), lambda grad: (grad * factor,))


def sigmoid(x):
    """ Logistic function """
    x = as_tensor(x)
    value = special.expit(x.value)
    return _emit("sigmoid", value, (x,), lambda grad: (grad * value * (1.0 - value),))


def softmax(x):
    """ Row-wise softmax """
    x = as_tensor(x)
    value = special.softmax(x.value, axis=1)
    #
    def backward(grad):
        return (value * (grad - np.sum(grad * value, axis=1, keepdims=True)),)
    #
    return _emit("softmax", value, (x,), backward)


def log_softmax(x):
    """ Row-wise log-softmax """
    x = as_tensor(x)
    value = special.log_softmax(x.value, axis=1)
    #
    def backward(grad):
        return (grad - np.exp(value) * np.sum(grad, axis=1, keepdims=True),)
    #
    return _emit("log_softmax", value, (x,), backward)

#
# Reductions
#

def sum(x, axis=None):  # pylint: disable=W0622
    """ Sum over all (1x1), rows (axis=0 -> 1xm) or columns (axis=1 -> nx1) """
    x = as_tensor(x)
    if axis is None:
        value = np.sum(x.value).reshape(1, 1)
    else:
        value = np.sum(x.value, axis=axis, keepdims=True)
    #
    def backward(grad):
        return (np.broadcast_to(grad, x.shape).copy(),)
    #
    return _emit("sum", value, (x,), backward)


def mean(x, axis=None):
    """ Mean with the same axis convention as sum """
    x = as_tensor(x)
    count = x.value.size if axis is None else x.shape[axis]
    return mul(sum(x, axis=axis), 1.0 / count)

#
# Normalization and regularization
#

def l2_normalize(x, eps=1e-12):
    """ Row-wise unit L2 norm """
    x = as_tensor(x)
    norm = np.maximum(np.sqrt(np.sum(x.value * x.value, axis=1, keepdims=True)), eps)
    value = x.value / norm
    #
    def backward(grad):
        return ((grad - value * np.sum(grad * value, axis=1, keepdims=True)) / norm,)
    #
    return _emit("l2_normalize", value, (x,), backward)


def batchnorm(x, gamma, beta, running_mean, running_var, training, momentum=0.1, eps=1e-5):  # pylint: disable=R0913
    """ Batch normalization; in training mode updates running stats in place """
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (1, x.cols) or beta.shape != (1, x.cols):
        raise ShapeError(f"batchnorm: {x.shape} with gamma {gamma.shape}, beta {beta.shape}")
    #
    if training:
        count = x.rows
        batch_mean = x.value.mean(axis=0, keepdims=True)
        batch_var = x.value.var(axis=0, keepdims=True)
        inv_std = 1.0 / np.sqrt(batch_var + eps)
        normalized = (x.value - batch_mean) * inv_std
        #
        unbiased = batch_var * count / max(count - 1, 1)
        running_mean *= 1.0 - momentum
        running_mean += momentum * batch_mean
        running_var *= 1.0 - momentum
        running_var += momentum * unbiased
        #
        def backward(grad):
            grad_norm = grad * gamma.value
            grad_x = inv_std / count * (
                count * grad_norm
                - grad_norm.sum(axis=0, keepdims=True)
                - normalized * np.sum(grad_norm * normalized, axis=0, keepdims=True)
            )
            return (
                grad_x,
                np.sum(grad * normalized, axis=0, keepdims=True),
                grad.sum(axis=0, keepdims=True),
            )
    else:
        inv_std = 1.0 / np.sqrt(running_var + eps)
        normalized = (x.value - running_mean) * inv_std
        #
        def backward(grad):
            return (
                grad * gamma.value * inv_std,
                np.sum(grad * normalized, axis=0, keepdims=True),
                grad.sum(axis=0, keepdims=True),
            )
    #
    value = normalized * gamma.value + beta.value
    return _emit("batchnorm", value, (x, gamma, beta), backward)


def dropout(x, rate, training, rng=None):
    """ Inverted dropout; identity (no RNG use) in eval mode or at rate 0 """
    x = as_tensor(x)
    if not training or rate <= 0.0:
        return x
    #
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return _emit("dropout", x.value * keep, (x,), lambda grad: (grad * keep,))


def straight_through_binarize(x, threshold=0.5):
    """ Forward: 1 where x >= threshold else 0; backward: identity """
    x = as_tensor(x)
    value = (x.value >= threshold).astype(np.float64)
    return _emit("straight_through_binarize", value, (x,), lambda grad: (grad,))
