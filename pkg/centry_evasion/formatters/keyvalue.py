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

""" Formatter """

import time
import logging

from ..internal import constants


_RESERVED = frozenset(vars(logging.LogRecord("", 0, "", 0, "", (), None))) | {
    "message", "asctime",
}


def format_value(value):
    """ Render one value for a key=value line """
    if isinstance(value, float):
        text = f"{value:.6g}"
    elif isinstance(value, (list, tuple)):
        text = ",".join(str(item) for item in value)
    else:
        text = str(value)
    #
    if not text or any(char in text for char in " \"=\t"):
        text = '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'
    #
    return text


class KeyValueFormatter(logging.Formatter):
    """ Formatter for line-oriented key=value records """

    def __init__(self, datefmt=constants.LOG_DATE_FORMAT, utc=True, include_context=True):
        super().__init__(datefmt=datefmt)
        #
        self.include_context = include_context
        if utc:
            self.converter = time.gmtime

    def format(self, record: logging.LogRecord) -> str:
        pairs = [
            ("ts", self.formatTime(record, self.datefmt)),
            ("level", record.levelname),
            ("logger", record.name),
            ("msg", record.getMessage()),
        ]
        #
        if self.include_context:
            for key in constants.KV_CONTEXT_FIELDS:
                value = getattr(record, key, None)
                if value is not None:
                    pairs.append((key, value))
        #
        for key, value in record.__dict__.items():
            if key in _RESERVED or key in constants.KV_CONTEXT_FIELDS or key.startswith("_"):
                continue
            pairs.append((key, value))
        #
        line = " ".join(f"{key}={format_value(value)}" for key, value in pairs)
        #
        if record.exc_info:
            line += "\n" + self.formatException(record.exc_info)
        #
        return line
