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

""" Tensors and the recording tape """

import threading
import dataclasses

import numpy as np  # pylint: disable=E0401

from ..errors import ShapeError


_local = threading.local()


class Tensor:
    """ Two-dimensional float64 value with gradient slot """

    __slots__ = ("value", "grad", "requires_grad", "name")

    def __init__(self, value, requires_grad=False, name=None):
        value = np.asarray(value, dtype=np.float64)
        #
        if value.ndim == 0:
            value = value.reshape(1, 1)
        elif value.ndim == 1:
            value = value.reshape(1, -1)
        elif value.ndim != 2:
            raise ShapeError(f"Tensor must be 2-D, got shape {value.shape}")
        #
        self.value = value
        self.grad = None
        self.requires_grad = requires_grad
        self.name = name

    def __repr__(self):
        label = f"{self.name}, " if self.name else ""
        return f"Tensor({label}shape={self.shape}, requires_grad={self.requires_grad})"

    @property
    def shape(self):
        """ (rows, cols) """
        return self.value.shape

    @property
    def rows(self):
        """ Row count """
        return self.value.shape[0]

    @property
    def cols(self):
        """ Column count """
        return self.value.shape[1]

    def item(self):
        """ Scalar value of a 1x1 tensor """
        if self.value.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.shape}")
        return float(self.value[0, 0])

    def numpy(self):
        """ Underlying array """
        return self.value

    def zero_grad(self):
        """ Drop accumulated gradient """
        self.grad = None

    #
    # Operators
    #

    def __add__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.add(self, other)

    def __radd__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.add(other, self)

    def __sub__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.sub(self, other)

    def __rsub__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.sub(other, self)

    def __mul__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.mul(self, other)

    def __rmul__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.mul(other, self)

    def __neg__(self):
        from . import ops  # pylint: disable=C0415
        return ops.mul(self, -1.0)

    def __truediv__(self, other):
        from . import ops  # pylint: disable=C0415
        if isinstance(other, Tensor):
            return ops.mul(self, ops.pow(other, -1.0))
        return ops.mul(self, 1.0 / other)

    def __pow__(self, exponent):
        from . import ops  # pylint: disable=C0415
        return ops.pow(self, exponent)

    def __matmul__(self, other):
        from . import ops  # pylint: disable=C0415
        return ops.matmul(self, other)


def as_tensor(value):
    """ Wrap constants as non-tracking tensors """
    if isinstance(value, Tensor):
        return value
    return Tensor(value)


@dataclasses.dataclass
class Record:
    """ One primitive application """

    name: str
    output: Tensor
    inputs: tuple
    backward: object


class Tape:
    """ Ordered record of primitive ops; backward walks it in reverse """

    def __init__(self):
        self.records = []

    def __enter__(self):
        stack = getattr(_local, "stack", None)
        if stack is None:
            stack = _local.stack = []
        stack.append(self)
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        _local.stack.pop()

    def __len__(self):
        return len(self.records)

    def record(self, name, output, inputs, backward):
        """ Append op record """
        self.records.append(Record(name, output, tuple(inputs), backward))

    def backward(self, loss):
        """ Accumulate d(loss)/d(input) into .grad of every tracked tensor """
        if loss.shape != (1, 1):
            raise ShapeError(f"backward() needs a scalar loss, got {loss.shape}")
        #
        loss.grad = np.ones((1, 1)) if loss.grad is None else loss.grad + 1.0
        #
        for record in reversed(self.records):
            upstream = record.output.grad
            if upstream is None:
                continue
            #
            input_grads = record.backward(upstream)
            for tensor, grad in zip(record.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.grad is None:
                    tensor.grad = np.array(grad, dtype=np.float64)
                else:
                    tensor.grad = tensor.grad + grad


def current_tape():
    """ Innermost active tape of this thread, if any """
    stack = getattr(_local, "stack", None)
    return stack[-1] if stack else None


class Parameter(Tensor):
    """ Trainable tensor owned by a module """

    __slots__ = ()

    def __init__(self, value, name=None):
        super().__init__(value, requires_grad=True, name=name)
