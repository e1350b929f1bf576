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

""" Artifact tree: out_dir/seed_<s>/<stage>/ with manifest.json """

import os
import shutil

from ..errors import MissingArtifactError
from ..tools import files


MANIFEST = "manifest.json"


class ArtifactStore:
    """ Per-seed stage directories with fingerprinted manifests """

    def __init__(self, out_dir, seed):
        self.out_dir = out_dir
        self.seed = seed
        self.root = os.path.join(out_dir, f"seed_{seed}")

    def stage_dir(self, stage):
        """ Directory of stage artifacts (created) """
        path = os.path.join(self.root, stage)
        os.makedirs(path, exist_ok=True)
        return path

    def path(self, stage, name):
        """ Path of a stage artifact """
        return os.path.join(self.stage_dir(stage), name)

    def manifest(self, stage):
        """ Stage manifest or None """
        path = os.path.join(self.root, stage, MANIFEST)
        if not os.path.exists(path):
            return None
        return files.read_json(path)

    def is_complete(self, stage, fingerprint):
        """ Manifest matches fingerprint and every listed file has its recorded hash """
        manifest = self.manifest(stage)
        if manifest is None or manifest.get("fingerprint") != fingerprint:
            return False
        for name, digest in manifest.get("files", {}).items():
            path = os.path.join(self.root, stage, name)
            if not os.path.exists(path) or files.hash_file(path) != digest:
                return False
        return True

    def require(self, stage, fingerprint, producer, consumer):
        """ Raise MissingArtifactError unless stage is complete """
        if not self.is_complete(stage, fingerprint):
            raise MissingArtifactError(consumer, producer)

    def commit(self, stage, fingerprint, names, extra=None):
        """ Hash produced files and write manifest last """
        directory = self.stage_dir(stage)
        manifest = {
            "stage": stage,
            "seed": self.seed,
            "fingerprint": fingerprint,
            "files": {name: files.hash_file(os.path.join(directory, name)) for name in sorted(names)},
        }
        if extra:
            manifest["extra"] = extra
        files.write_json(os.path.join(directory, MANIFEST), manifest)
        return manifest

    def invalidate(self, stage):
        """ Drop stage manifest so the stage reruns """
        path = os.path.join(self.root, stage, MANIFEST)
        if os.path.exists(path):
            os.remove(path)

    def clear(self, stage):
        """ Remove stage directory """
        shutil.rmtree(os.path.join(self.root, stage), ignore_errors=True)
