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

""" Weighted soft-vote ensemble of raw and embedding members """

import os
import dataclasses

import numpy as np  # pylint: disable=E0401

from .. import log
from ..config import EnsembleConfig
from ..errors import ShapeError, UnknownClassError
from ..classical import common
from ..classical.forest import train_forest, save_forest, load_forest
from ..classical.logistic import train_logistic, save_logistic, load_logistic
from ..evaluation.metrics import classification_metrics
from ..representation.encoder import embed, save_encoder, load_encoder
from ..representation.training import train_encoder
from ..tools import files, seeding
from .weights import optimize_weights


MEMBER_NAMES = ("rf_raw", "lr_raw", "rf_emb", "lr_emb")
EMBEDDING_MEMBERS = ("rf_emb", "lr_emb")
MANIFEST_FILE = "ensemble.json"


@dataclasses.dataclass(frozen=True)
class EnsembleModel:
    """ Four members, shared encoder, simplex weights """

    members: tuple
    encoder: object
    weights: np.ndarray
    classes: tuple
    seed: int = 0

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        if weights.shape != (len(MEMBER_NAMES),):
            raise ShapeError(f"Expected {len(MEMBER_NAMES)} weights, got shape {weights.shape}")
        if np.any(weights < 0.0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ShapeError(f"Weights must lie on the simplex, got {weights.tolist()}")
        object.__setattr__(self, "weights", weights)

    @property
    def n_features(self):
        """ Raw input width """
        return self.members[0].n_features

    def member(self, name):
        """ Member by name """
        return self.members[MEMBER_NAMES.index(name)]


def member_probabilities(model, X):
    """ Per-member distributions, embedding members fed encoder outputs """
    X = common.as_matrix(X)
    common.check_width(model, X)
    embeddings = embed(model.encoder, X)
    return [
        member.predict_proba(embeddings if name in EMBEDDING_MEMBERS else X)
        for name, member in zip(MEMBER_NAMES, model.members)
    ]


def combine(member_probs, weights):
    """ sum_i w_i q_i """
    return np.tensordot(np.asarray(weights, dtype=np.float64), np.stack(member_probs), axes=1)


def ensemble_predict(model, X):
    """ Weighted soft vote """
    return combine(member_probabilities(model, X), model.weights)


def ensemble_labels(model, X):
    """ Argmax labels, lowest class id on ties """
    return common.predict_labels(ensemble_predict(model, X), model.classes)


def build_ensemble(ds_train, ds_val, class_set, seed, cfg=None):  # pylint: disable=R0914
    """ Raw members, encoder, embedding members, then weight search on validation """
    cfg = cfg or EnsembleConfig()
    classes = tuple(sorted(int(item) for item in class_set))
    unknown = sorted(set(classes) - set(ds_train.classes))
    if unknown:
        raise UnknownClassError(f"Classes {unknown} not in dataset")
    #
    train = ds_train.restrict_classes(classes)
    val = ds_val.restrict_classes(classes)
    if len(val) == 0:
        raise ShapeError("Validation split has no samples of the ensemble classes")
    X, y = train.features(), train.labels
    #
    log.info("Training raw members", extra={"classes": len(classes), "samples": len(train)})
    rf_raw = train_forest(X, y, cfg.forest, classes, seed=seeding.derive_seed(seed, "rf_raw"))
    lr_raw = train_logistic(X, y, cfg.logistic, classes)
    #
    encoder = train_encoder(train, val, cfg.encoder, seed=seeding.derive_seed(seed, "encoder"), classes=classes)
    embedded = embed(encoder, X)
    rf_emb = train_forest(embedded, y, cfg.forest, classes, seed=seeding.derive_seed(seed, "rf_emb"))
    lr_emb = train_logistic(embedded, y, cfg.logistic, classes)
    #
    model = EnsembleModel(
        members=(rf_raw, lr_raw, rf_emb, lr_emb),
        encoder=encoder,
        weights=np.full(len(MEMBER_NAMES), 1.0 / len(MEMBER_NAMES)),
        classes=classes,
        seed=seed,
    )
    weights = optimize_weights(
        member_probabilities(model, val.features()), val.labels, classes,
        units=cfg.grid_units, n_jobs=cfg.n_jobs,
    )
    return dataclasses.replace(model, weights=weights)


def member_metrics(model, X, y):
    """ Classifier report rows for each member and the ensemble """
    y = np.asarray(y, dtype=np.int64)
    member_probs = member_probabilities(model, X)
    named = list(zip(MEMBER_NAMES, member_probs)) + [("ensemble", combine(member_probs, model.weights))]
    #
    rows = []
    for name, probs in named:
        report = classification_metrics(common.predict_labels(probs, model.classes), y, model.classes)
        rows.append({
            "model": name,
            "accuracy": report.accuracy,
            "macro_f1": report.macro_f1,
            "macro_recall": report.macro_recall,
            "recall6": report.recall6,
        })
    return rows

#
# Persistence
#

_MEMBER_FILES = {
    "rf_raw": ("rf_raw.json", save_forest, load_forest),
    "lr_raw": ("lr_raw.cevp", save_logistic, load_logistic),
    "rf_emb": ("rf_emb.json", save_forest, load_forest),
    "lr_emb": ("lr_emb.cevp", save_logistic, load_logistic),
}
_ENCODER_FILE = "encoder.cevp"


def save_ensemble(directory, model):
    """ Member artifacts + manifest JSON; returns manifest path """
    os.makedirs(directory, exist_ok=True)
    artifacts = {}
    for name, member in zip(MEMBER_NAMES, model.members):
        filename, saver, _ = _MEMBER_FILES[name]
        saver(os.path.join(directory, filename), member)
        artifacts[name] = filename
    save_encoder(os.path.join(directory, _ENCODER_FILE), model.encoder)
    artifacts["encoder"] = _ENCODER_FILE
    #
    manifest = {
        "members": artifacts,
        "hashes": {name: files.hash_file(os.path.join(directory, filename)) for name, filename in artifacts.items()},
        "weights": model.weights.tolist(),
        "classes": list(model.classes),
        "seed": model.seed,
    }
    path = os.path.join(directory, MANIFEST_FILE)
    files.write_json(path, manifest)
    return path


def load_ensemble(directory):
    """ Inverse of save_ensemble """
    manifest = files.read_json(os.path.join(directory, MANIFEST_FILE))
    members = tuple(
        _MEMBER_FILES[name][2](os.path.join(directory, manifest["members"][name])) for name in MEMBER_NAMES
    )
    return EnsembleModel(
        members=members,
        encoder=load_encoder(os.path.join(directory, manifest["members"]["encoder"])),
        weights=np.asarray(manifest["weights"]),
        classes=tuple(manifest["classes"]),
        seed=int(manifest["seed"]),
    )


def manifest_hash(directory):
    """ Content hash of the ensemble manifest """
    return files.hash_file(os.path.join(directory, MANIFEST_FILE))
