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

""" Embedding CSV export for external projection tools """

import os

import numpy as np  # pylint: disable=E0401
import pandas as pd  # pylint: disable=E0401

from .. import log
from .encoder import embed


def embedding_frame(encoder, X, sample_ids, labels, variant="clean"):
    """ sample_id, e0..e{d-1}, label, variant """
    embeddings = embed(encoder, X)
    frame = pd.DataFrame(embeddings, columns=[f"e{index}" for index in range(embeddings.shape[1])])
    frame.insert(0, "sample_id", np.asarray(sample_ids, dtype=np.int64))
    frame["label"] = np.asarray(labels, dtype=np.int64)
    frame["variant"] = variant
    return frame


def export_embeddings(path, encoder, dataset, adversarial=None):
    """ Write clean (and optionally perturbed) embeddings; adversarial = (X, sample_ids, labels, variant) """
    frames = [embedding_frame(encoder, dataset.features(), dataset.sample_ids, dataset.labels)]
    if adversarial is not None:
        frames.append(embedding_frame(encoder, *adversarial))
    #
    frame = pd.concat(frames, ignore_index=True)
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.10g")
    log.info("Embeddings exported", extra={"rows": len(frame), "path": path})
    return frame
