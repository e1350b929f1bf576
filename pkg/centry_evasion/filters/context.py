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

""" Filter """

import logging

from ..internal import state


class ContextFilter(logging.Filter):  # pylint: disable=R0903
    """ Filter to attach active run context (seed, stage) to records """

    def __init__(self, defaults=None):
        super().__init__()
        #
        self.defaults = {}
        #
        if defaults:
            self.defaults.update(defaults)

    def filter(self, record):
        """ Filter record """
        fields = dict(self.defaults)
        fields.update(state.run_context.get())
        #
        for key, value in fields.items():
            if not hasattr(record, key):
                setattr(record, key, value)
        #
        return True
