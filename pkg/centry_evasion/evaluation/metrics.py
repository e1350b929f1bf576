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

""" Classification and evasion metrics """

import dataclasses

import numpy as np  # pylint: disable=E0401
from sklearn.metrics import accuracy_score, f1_score, recall_score  # pylint: disable=E0401

from ..errors import MetricError, EmptyMalwareSetError
from ..internal import constants


@dataclasses.dataclass(frozen=True)
class ClassificationReport:
    """ Standard classifier metrics; macro averages skip classes absent from truth """

    accuracy: float
    macro_f1: float
    macro_recall: float
    per_class_recall: dict
    absent_classes: tuple = ()

    @property
    def recall6(self):
        """ Recall of the malware class """
        return self.per_class_recall.get(constants.MALWARE_CLASS)


def classification_metrics(predicted, truth, classes):
    """ Accuracy, macro-F1, macro-recall and per-class recall over class ids """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    if predicted.shape != truth.shape:
        raise MetricError(f"Length mismatch: {predicted.shape[0]} predictions, {truth.shape[0]} labels")
    if truth.size == 0:
        raise MetricError("No samples to score")
    #
    if isinstance(classes, int):
        classes = tuple(range(1, classes + 1))
    classes = tuple(int(item) for item in classes)
    present = [item for item in classes if np.any(truth == item)]
    absent = tuple(item for item in classes if item not in present)
    #
    recalls = recall_score(truth, predicted, labels=present, average=None, zero_division=0)
    per_class = {item: None for item in classes}
    per_class.update({item: float(value) for item, value in zip(present, recalls)})
    #
    return ClassificationReport(
        accuracy=float(accuracy_score(truth, predicted)),
        macro_f1=float(f1_score(truth, predicted, labels=present, average="macro", zero_division=0)),
        macro_recall=float(np.mean(recalls)),
        per_class_recall=per_class,
        absent_classes=absent,
    )


@dataclasses.dataclass(frozen=True)
class EvasionCounts:
    """ Malware, evaded (not labeled malware) and target-hit counts """

    m_malware: int
    m_evaded: int
    m_target: int

    def __post_init__(self):
        if min(self.m_malware, self.m_evaded, self.m_target) < 0:
            raise MetricError("Counts must be nonnegative")
        if not self.m_target <= self.m_evaded <= self.m_malware:
            raise MetricError(
                f"Counts violate m_target <= m_evaded <= m_malware: "
                f"{self.m_target}, {self.m_evaded}, {self.m_malware}"
            )


@dataclasses.dataclass(frozen=True)
class EvasionRates:
    """ UER, TSR and CTS (None when nothing evaded) """

    uer: float
    tsr: float
    cts: float = None


def evasion_metrics(counts):
    """ UER = evaded / malware, TSR = target / malware, CTS = TSR / UER """
    if counts.m_malware == 0:
        raise EmptyMalwareSetError("No malware samples to evaluate")
    #
    uer = counts.m_evaded / counts.m_malware
    tsr = counts.m_target / counts.m_malware
    cts = tsr / uer if counts.m_evaded > 0 else None
    return EvasionRates(uer=uer, tsr=tsr, cts=cts)


def counts_from_labels(after_labels, targets, malware_class=constants.MALWARE_CLASS):
    """ Count evasions of malware samples given post-attack labels and targets """
    after_labels = np.asarray(after_labels, dtype=np.int64)
    targets = np.asarray(targets, dtype=np.int64)
    if after_labels.shape != targets.shape:
        raise MetricError("Labels and targets differ in length")
    #
    evaded = after_labels != malware_class
    return EvasionCounts(
        m_malware=int(after_labels.size),
        m_evaded=int(np.count_nonzero(evaded)),
        m_target=int(np.count_nonzero(evaded & (after_labels == targets))),
    )


@dataclasses.dataclass(frozen=True)
class MetricRecord:  # pylint: disable=R0902
    """ One (method, k, seed) cell """

    method: str
    k: int
    seed: int
    uer: float
    tsr: float
    cts: float
    recall6: float
    m_malware: int
    m_evaded: int
    m_target: int
    accuracy: float = None
    macro_f1: float = None
    macro_recall: float = None

    def to_dict(self):
        """ Plain dict """
        return dataclasses.asdict(self)


def make_record(method, k, seed, after_labels, targets, report=None):  # pylint: disable=R0913
    """ MetricRecord from post-attack labels of malware samples """
    counts = counts_from_labels(after_labels, targets)
    rates = evasion_metrics(counts)
    return MetricRecord(
        method=method,
        k=int(k),
        seed=int(seed),
        uer=rates.uer,
        tsr=rates.tsr,
        cts=rates.cts,
        recall6=(counts.m_malware - counts.m_evaded) / counts.m_malware,
        m_malware=counts.m_malware,
        m_evaded=counts.m_evaded,
        m_target=counts.m_target,
        accuracy=None if report is None else report.accuracy,
        macro_f1=None if report is None else report.macro_f1,
        macro_recall=None if report is None else report.macro_recall,
    )


def baseline_record(seed, predicted, truth, classes, targets, method="baseline"):  # pylint: disable=R0913
    """ k=0 record: unmodified test set, carries classifier metrics """
    predicted = np.asarray(predicted, dtype=np.int64)
    truth = np.asarray(truth, dtype=np.int64)
    report = classification_metrics(predicted, truth, classes)
    malware = truth == constants.MALWARE_CLASS
    return make_record(method, 0, seed, predicted[malware], targets, report=report)
