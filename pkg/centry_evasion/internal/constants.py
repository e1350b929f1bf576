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

""" Internal """


LOG_DATE_FORMAT = "%Y-%m-%dT%H:%M:%S%z"

KV_CONTEXT_FIELDS = ("seed", "stage")

MALWARE_CLASS = 6
BENIGN_CLASSES = (1, 2, 3, 4, 5)
LABEL_COLUMN = "label"
MIN_POPCOUNT = 5

PROBABILITY_FLOOR = 1e-12
BCE_CLAMP = 1e-7
COSINE_CLAMP = 1e-7

SPLIT_NAMES = ("train", "val_tune", "val_es", "test")
DEFAULT_SPLIT_FRACTIONS = (0.70, 0.10, 0.05, 0.15)
DEFAULT_K_GRID = (5, 10, 15, 20, 25, 30, 35, 40, 45, 50)
ATTACK_METHODS = ("cvae", "most_popular", "random")

OUT_DIR_ENV = "CENTRY_EVASION_OUT_DIR"
