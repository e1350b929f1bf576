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

""" Mini-batch plans """

import numpy as np  # pylint: disable=E0401


def minibatches(count, batch_size, rng=None, min_size=2):
    """ Shuffled index batches; a trailing batch smaller than min_size joins the previous one """
    order = rng.permutation(count) if rng is not None else np.arange(count)
    batches = [order[start:start + batch_size] for start in range(0, count, batch_size)]
    #
    if len(batches) > 1 and len(batches[-1]) < min_size:
        tail = batches.pop()
        batches[-1] = np.concatenate([batches[-1], tail])
    #
    return batches


def batched(count, batch_size):
    """ Sequential slices for inference """
    for start in range(0, count, batch_size):
        yield slice(start, min(start + batch_size, count))
