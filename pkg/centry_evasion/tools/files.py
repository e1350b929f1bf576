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

""" Tools """

import os
import json
import hashlib


def canonical_json(data):
    """ Stable JSON text for hashing """
    return json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)


def hash_data(data):
    """ sha256 of canonical JSON """
    return hashlib.sha256(canonical_json(data).encode("utf-8")).hexdigest()


def hash_file(path, chunk_size=1 << 20):
    """ sha256 of file content """
    digest = hashlib.sha256()
    with open(path, "rb") as file:
        for chunk in iter(lambda: file.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(path, data):
    """ Write JSON atomically """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    #
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w", encoding="utf-8") as file:
        json.dump(data, file, indent=2, sort_keys=True)
        file.write("\n")
    os.replace(tmp_path, path)


def read_json(path):
    """ Read JSON document """
    with open(path, "r", encoding="utf-8") as file:
        return json.load(file)


def write_jsonl(path, items):
    """ Write JSON-lines, one object per line """
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    #
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "w", encoding="utf-8") as file:
        for item in items:
            file.write(json.dumps(item, sort_keys=True))
            file.write("\n")
    os.replace(tmp_path, path)


def read_jsonl(path):
    """ Read JSON-lines """
    with open(path, "r", encoding="utf-8") as file:
        return [json.loads(line) for line in file if line.strip()]
