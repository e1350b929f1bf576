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

""" Dataset loading and validation """

import re
import dataclasses

import numpy as np  # pylint: disable=E0401
import pandas as pd  # pylint: disable=E0401

from .. import log
from ..errors import (
    DatasetError, MalformedRowError, NonBinaryValueError, LabelRangeError,
    DuplicateVocabularyError, PopcountError, UnknownClassError,
)
from ..internal import constants


SUPPORTED_FORMATS = ("csv",)


@dataclasses.dataclass(frozen=True)
class ApiVocabulary:
    """ Ordered API-import names; position is the feature index """

    names: tuple

    def __post_init__(self):
        if not self.names:
            raise DatasetError("Vocabulary is empty")
        #
        seen = {}
        for position, name in enumerate(self.names):
            if name in seen:
                raise DuplicateVocabularyError(
                    f"Duplicate API name '{name}' (first at column {seen[name]})", column=position,
                )
            seen[name] = position

    @property
    def size(self):
        """ Feature count n """
        return len(self.names)

    def index(self, name):
        """ Feature index of API name """
        return self.names.index(name)


@dataclasses.dataclass(frozen=True)
class LabeledDataset:
    """ Binary import vectors with class labels 1..C """

    vocabulary: ApiVocabulary
    samples: np.ndarray
    labels: np.ndarray
    class_count: int
    sample_ids: np.ndarray = None

    def __post_init__(self):
        samples = np.ascontiguousarray(self.samples, dtype=np.uint8)
        labels = np.asarray(self.labels, dtype=np.int64)
        #
        if samples.ndim != 2 or samples.shape[1] != self.vocabulary.size:
            raise DatasetError(
                f"Sample matrix shape {samples.shape} does not match vocabulary size {self.vocabulary.size}"
            )
        if samples.shape[0] != labels.shape[0]:
            raise DatasetError(f"{samples.shape[0]} samples but {labels.shape[0]} labels")
        if labels.size and (labels.min() < 1 or labels.max() > self.class_count):
            raise LabelRangeError(f"Labels must lie in 1..{self.class_count}")
        #
        sample_ids = self.sample_ids
        if sample_ids is None:
            sample_ids = np.arange(samples.shape[0], dtype=np.int64)
        sample_ids = np.asarray(sample_ids, dtype=np.int64)
        #
        for array in (samples, labels, sample_ids):
            array.setflags(write=False)
        #
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "sample_ids", sample_ids)

    def __len__(self):
        return self.samples.shape[0]

    @property
    def n_features(self):
        """ Feature count n """
        return self.vocabulary.size

    @property
    def classes(self):
        """ Class ids 1..C """
        return tuple(range(1, self.class_count + 1))

    def features(self):
        """ Samples as float64 matrix """
        return self.samples.astype(np.float64)

    def class_indices(self, class_id):
        """ Row positions of class samples """
        return np.flatnonzero(self.labels == class_id)

    def subset(self, positions):
        """ Dataset restricted to row positions (sample ids kept) """
        positions = np.asarray(positions, dtype=np.int64)
        return LabeledDataset(
            vocabulary=self.vocabulary,
            samples=self.samples[positions],
            labels=self.labels[positions],
            class_count=self.class_count,
            sample_ids=self.sample_ids[positions],
        )

    def restrict_classes(self, class_set):
        """ Dataset with only samples of the given classes """
        mask = np.isin(self.labels, list(class_set))
        return self.subset(np.flatnonzero(mask))


#
# CSV format
#

_LINE_RE = re.compile(r"line (\d+)")


def _read_frame(path):
    try:
        return pd.read_csv(
            path, header=None, dtype=str, keep_default_na=False, skip_blank_lines=True,
        )
    except pd.errors.ParserError as exc:
        match = _LINE_RE.search(str(exc))
        row = int(match.group(1)) if match else None
        raise MalformedRowError("Wrong number of fields", row=row) from exc
    except pd.errors.EmptyDataError as exc:
        raise DatasetError("Dataset file is empty") from exc


def load_dataset(path, format="csv", class_count=None, min_popcount=constants.MIN_POPCOUNT):  # pylint: disable=W0622,R0914
    """ Load and validate dataset; row/column context in errors is 1-based file line / API name """
    if format not in SUPPORTED_FORMATS:
        raise DatasetError(f"Unsupported dataset format '{format}'")
    #
    frame = _read_frame(path)
    if frame.shape[0] < 2:
        raise DatasetError("Dataset has no sample rows")
    #
    header = [str(item) for item in frame.iloc[0].tolist()]
    if header[-1] != constants.LABEL_COLUMN:
        raise MalformedRowError(
            f"Last header column must be '{constants.LABEL_COLUMN}'", row=1, column=header[-1],
        )
    vocabulary = ApiVocabulary(tuple(header[:-1]))
    #
    body = frame.iloc[1:].to_numpy(dtype=object)
    missing = np.argwhere(pd.isna(body) | (body == ""))
    if missing.size:
        line, column = missing[0]
        raise MalformedRowError("Missing field", row=int(line) + 2, column=header[column])
    #
    values = body[:, :-1].astype(str)
    non_binary = np.argwhere((values != "0") & (values != "1"))
    if non_binary.size:
        line, column = non_binary[0]
        raise NonBinaryValueError(
            f"Non-binary value '{values[line, column]}'", row=int(line) + 2, column=header[column],
        )
    samples = (values == "1").astype(np.uint8)
    #
    labels = np.empty(body.shape[0], dtype=np.int64)
    for line, raw in enumerate(body[:, -1]):
        try:
            labels[line] = int(raw)
        except ValueError as exc:
            raise MalformedRowError(
                f"Label '{raw}' is not an integer", row=line + 2, column=constants.LABEL_COLUMN,
            ) from exc
    #
    limit = class_count if class_count is not None else max(int(labels.max()), 1)
    out_of_range = np.flatnonzero((labels < 1) | (labels > limit))
    if out_of_range.size:
        line = int(out_of_range[0])
        raise LabelRangeError(
            f"Label {labels[line]} outside 1..{limit}", row=line + 2, column=constants.LABEL_COLUMN,
        )
    #
    popcounts = samples.sum(axis=1)
    sparse = np.flatnonzero(popcounts < min_popcount)
    if sparse.size:
        line = int(sparse[0])
        raise PopcountError(
            f"Sample imports {popcounts[line]} APIs, minimum is {min_popcount}", row=line + 2,
        )
    #
    dataset = LabeledDataset(
        vocabulary=vocabulary, samples=samples, labels=labels, class_count=limit,
    )
    log.info(
        "Dataset loaded",
        extra={"samples": len(dataset), "features": dataset.n_features, "classes": limit},
    )
    return dataset


def write_dataset(dataset, path):
    """ Write canonical CSV (header + 0/1 rows + label) """
    frame = pd.DataFrame(dataset.samples, columns=list(dataset.vocabulary.names))
    frame[constants.LABEL_COLUMN] = dataset.labels
    frame.to_csv(path, index=False, lineterminator="\n")


#
# Statistics
#

def class_frequency(dataset, class_id):
    """ count[j] = number of class samples with feature j set """
    if class_id not in dataset.classes:
        raise UnknownClassError(f"Unknown class id {class_id}")
    #
    positions = dataset.class_indices(class_id)
    if positions.size == 0:
        raise UnknownClassError(f"Class {class_id} has no samples in this dataset")
    #
    return dataset.samples[positions].sum(axis=0, dtype=np.int64)


def dataset_summary(dataset):
    """ Per-class sample count and active-feature statistics """
    popcounts = dataset.samples.sum(axis=1, dtype=np.int64)
    frame = pd.DataFrame({"class": dataset.labels, "active": popcounts})
    summary = frame.groupby("class")["active"].agg(["count", "min", "max", "mean"])
    summary = summary.rename(columns={"count": "samples"}).reset_index()
    return summary
