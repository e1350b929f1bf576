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

""" Handler """

import os
import logging


class ArtifactLogHandler(logging.FileHandler):
    """ Log handler - write run log into artifact tree """

    def __init__(self, settings):
        path = settings.get("path")
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        #
        super().__init__(
            filename=path,
            mode=settings.get("mode", "a"),
            encoding="utf-8",
            delay=settings.get("delay", False),
        )
        #
        self.setLevel(settings.get("level", logging.NOTSET))
