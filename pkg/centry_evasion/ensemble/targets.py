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

""" Per-sample target classes from the benign-only ensemble """

import os
import dataclasses

import numpy as np  # pylint: disable=E0401
import pandas as pd  # pylint: disable=E0401

from .. import log
from ..errors import UnknownClassError
from ..internal import constants
from .model import ensemble_predict


@dataclasses.dataclass(frozen=True)
class TargetAssignment:
    """ sample_id -> (c*, ensemble-B confidence) """

    sample_ids: np.ndarray
    targets: np.ndarray
    confidence: np.ndarray

    def __post_init__(self):
        for name, dtype in (("sample_ids", np.int64), ("targets", np.int64), ("confidence", np.float64)):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=dtype))
        if np.any(self.targets == constants.MALWARE_CLASS):
            raise UnknownClassError("Target class must never be the malware class")

    def __len__(self):
        return self.sample_ids.shape[0]

    def lookup(self, sample_ids):
        """ Targets for the given sample ids """
        index = {int(sample_id): position for position, sample_id in enumerate(self.sample_ids)}
        try:
            return self.targets[[index[int(item)] for item in sample_ids]]
        except KeyError as exc:
            raise UnknownClassError(f"No target assigned for sample {exc.args[0]}") from exc

    def to_frame(self):
        """ sample_id, c_star, confidence """
        return pd.DataFrame({"sample_id": self.sample_ids, "c_star": self.targets, "confidence": self.confidence})

    def to_csv(self, path):
        """ Write CSV """
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        self.to_frame().to_csv(path, index=False, lineterminator="\n", float_format="%.17g")

    @classmethod
    def from_csv(cls, path):
        """ Read CSV """
        frame = pd.read_csv(path)
        return cls(
            sample_ids=frame["sample_id"].to_numpy(),
            targets=frame["c_star"].to_numpy(),
            confidence=frame["confidence"].to_numpy(),
        )


def select_targets(probs, classes):
    """ (c*, confidence) per row; ties go to the lowest class id """
    probs = np.asarray(probs, dtype=np.float64)
    best = np.argmax(probs, axis=1)
    return np.asarray(classes, dtype=np.int64)[best], probs[np.arange(probs.shape[0]), best]


def assign_targets(ensemble_b, X, sample_ids):
    """ Argmax of ensemble B over benign classes for each malware sample """
    if constants.MALWARE_CLASS in ensemble_b.classes:
        raise UnknownClassError("Ensemble B must be trained on benign classes only")
    #
    targets, confidence = select_targets(ensemble_predict(ensemble_b, X), ensemble_b.classes)
    assignment = TargetAssignment(sample_ids=sample_ids, targets=targets, confidence=confidence)
    log.info(
        "Targets assigned",
        extra={"samples": len(assignment), "distinct_targets": int(np.unique(targets).size)},
    )
    return assignment
