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

""" Nearest-centroid probe """

import numpy as np  # pylint: disable=E0401
from sklearn.metrics import accuracy_score, f1_score  # pylint: disable=E0401
from sklearn.neighbors import NearestCentroid  # pylint: disable=E0401

from .. import log
from .encoder import embed


class NearestCentroidProbe:
    """ Euclidean nearest class mean """

    def __init__(self):
        self.model = NearestCentroid()

    def fit(self, X, y):
        """ Compute class centroids """
        self.model.fit(np.asarray(X, dtype=np.float64), np.asarray(y))
        return self

    def predict(self, X):
        """ Nearest centroid labels """
        return self.model.predict(np.asarray(X, dtype=np.float64))

    def macro_f1(self, X, y):
        """ Macro-F1 against y """
        return float(f1_score(y, self.predict(X), average="macro", zero_division=0))

    def accuracy(self, X, y):
        """ Accuracy against y """
        return float(accuracy_score(y, self.predict(X)))


def embedding_sanity(encoder, ds_train, ds_eval):
    """ Nearest-centroid accuracy in raw bit space vs embedding space """
    raw = NearestCentroidProbe().fit(ds_train.features(), ds_train.labels)
    raw_accuracy = raw.accuracy(ds_eval.features(), ds_eval.labels)
    #
    embedded = NearestCentroidProbe().fit(embed(encoder, ds_train.features()), ds_train.labels)
    embedding_accuracy = embedded.accuracy(embed(encoder, ds_eval.features()), ds_eval.labels)
    #
    result = {
        "raw_accuracy": raw_accuracy,
        "embedding_accuracy": embedding_accuracy,
        "gain": embedding_accuracy - raw_accuracy,
    }
    log.info("Embedding sanity", extra=result)
    return result
