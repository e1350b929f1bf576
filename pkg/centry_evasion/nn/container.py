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

""" Parameter container: header {module, shapes} + little-endian f64 payload, JSON sidecar """

import os
import json
import struct
import hashlib

import numpy as np  # pylint: disable=E0401

from ..errors import ShapeError
from ..tools import files


MAGIC = b"CEVP\x01"


def sidecar_path(path):
    """ JSON sidecar next to container """
    return f"{path}.json"


def save_parameters(path, module_name, tensors, metadata=None):
    """ Write named arrays; returns sha256 of payload """
    names = list(tensors)
    arrays = [np.ascontiguousarray(tensors[name], dtype="<f8") for name in names]
    header = {
        "module": module_name,
        "tensors": [{"name": name, "shape": list(array.shape)} for name, array in zip(names, arrays)],
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode("utf-8")
    payload = b"".join(array.tobytes() for array in arrays)
    #
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as file:
        file.write(MAGIC)
        file.write(struct.pack("<I", len(header_bytes)))
        file.write(header_bytes)
        file.write(payload)
    os.replace(tmp_path, path)
    #
    digest = hashlib.sha256(payload).hexdigest()
    files.write_json(sidecar_path(path), dict(header, dtype="float64-le", sha256=digest))
    return digest


def load_parameters(path):
    """ Read container; returns (module name, {name: array}, metadata) """
    with open(path, "rb") as file:
        if file.read(len(MAGIC)) != MAGIC:
            raise ShapeError(f"{path} is not a parameter container")
        (header_size,) = struct.unpack("<I", file.read(4))
        header = json.loads(file.read(header_size).decode("utf-8"))
        payload = file.read()
    #
    tensors = {}
    offset = 0
    for entry in header["tensors"]:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        array = np.frombuffer(payload, dtype="<f8", count=count, offset=offset).reshape(shape)
        tensors[entry["name"]] = array.astype(np.float64)
        offset += count * 8
    #
    if offset != len(payload):
        raise ShapeError(f"{path}: payload size does not match header")
    #
    return header["module"], tensors, header.get("metadata", {})


def save_module(path, module_name, module, metadata=None):
    """ Save module state (parameters and buffers) """
    return save_parameters(path, module_name, module.state_dict(), metadata=metadata)


def load_module(path, module):
    """ Restore module state from container; returns metadata """
    _, tensors, metadata = load_parameters(path)
    module.load_state_dict(tensors)
    return metadata
