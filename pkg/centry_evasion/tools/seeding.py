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

""" Tools """

import hashlib

import numpy as np  # pylint: disable=E0401


def derive_seed(run_seed, *names):
    """ Derive independent 63-bit seed from run seed and stage/component names """
    key = ":".join([str(run_seed)] + [str(name) for name in names])
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little") & 0x7FFFFFFFFFFFFFFF


def make_rng(run_seed, *names):
    """ Make numpy Generator for (seed, names) stream """
    return np.random.default_rng(derive_seed(run_seed, *names))


def spawn_seeds(seed, count):
    """ Make count independent integer seeds from one seed """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0] & 0x7FFFFFFFFFFFFFFF) for child in children]
