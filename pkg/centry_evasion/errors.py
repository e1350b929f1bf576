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

""" Errors """


class EvasionError(Exception):
    """ Base error for the package """


#
# Data
#

class DatasetError(EvasionError):
    """ Dataset file or content violates the format contract """

    def __init__(self, message, row=None, column=None):
        self.row = row
        self.column = column
        #
        location = []
        if row is not None:
            location.append(f"row={row}")
        if column is not None:
            location.append(f"column={column}")
        #
        if location:
            message = f"{message} ({', '.join(location)})"
        #
        super().__init__(message)


class MalformedRowError(DatasetError):
    """ Row has wrong field count or unparsable value """


class NonBinaryValueError(DatasetError):
    """ Feature value is not 0 or 1 """


class LabelRangeError(DatasetError):
    """ Label outside 1..C """


class DuplicateVocabularyError(DatasetError):
    """ API name repeated in header """


class PopcountError(DatasetError):
    """ Sample imports fewer than the admission minimum """


class UnknownClassError(DatasetError):
    """ Class id not present in dataset """


class StratificationError(DatasetError):
    """ Class too small to stratify """


#
# Numerics
#

class ShapeError(EvasionError):
    """ Operand shapes are incompatible """


class NonFiniteError(EvasionError):
    """ Operation produced NaN or Inf """

    def __init__(self, op_name):
        self.op_name = op_name
        super().__init__(f"Non-finite output in op '{op_name}'")


class EmbeddingNormError(EvasionError):
    """ Embedding is not unit-norm """


class TrainingDivergedError(EvasionError):
    """ Training produced a non-finite loss """

    def __init__(self, component, epoch=None, term=None, detail=None):
        self.component = component
        self.epoch = epoch
        self.term = term
        #
        message = f"{component} training diverged"
        if epoch is not None:
            message += f" at epoch {epoch}"
        if term is not None:
            message += f" in loss term '{term}'"
        if detail:
            message += f": {detail}"
        #
        super().__init__(message)


#
# Attack / evaluation
#

class InsufficientAbsentFeaturesError(EvasionError):
    """ k exceeds the number of absent features """


class EmptyMalwareSetError(EvasionError):
    """ No malware samples to evaluate """


class MetricError(EvasionError):
    """ Metric inputs violate the contract """


#
# Harness
#

class ConfigError(EvasionError):
    """ Invalid configuration """


class StageError(EvasionError):
    """ Pipeline stage failed """

    def __init__(self, stage, detail=None):
        self.stage = stage
        super().__init__(f"Stage '{stage}' failed" + (f": {detail}" if detail else ""))


class MissingArtifactError(StageError):
    """ Upstream artifact not found """

    def __init__(self, stage, producer):
        self.producer = producer
        super().__init__(stage, f"missing upstream artifact, run '{producer}' first")
