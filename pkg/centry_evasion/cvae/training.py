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

""" CVAE training loop with evasion-objective early stopping """

import numpy as np  # pylint: disable=E0401

from .. import log
from ..attack.injection import select_top_k, inject
from ..config import CvaeConfig
from ..distill.proxy import proxy_labels
from ..errors import NonFiniteError, TrainingDivergedError, EmptyMalwareSetError, UnknownClassError
from ..evaluation.metrics import counts_from_labels, evasion_metrics
from ..internal import constants
from ..nn.batching import minibatches
from ..nn.optim import Adam
from ..nn.tensor import Tape, Tensor
from ..tools import seeding
from .losses import cvae_losses, TERM_NAMES
from .model import CvaeModel, score_features


def malware_rows(dataset, targets):
    """ (features, target classes, sample ids) of malware samples """
    if dataset is None:
        return np.zeros((0, 0)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    malware = dataset.restrict_classes([constants.MALWARE_CLASS])
    if len(malware) == 0:
        return np.zeros((0, dataset.n_features)), np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return malware.features(), targets.lookup(malware.sample_ids), malware.sample_ids


def evasion_objective(model, X, targets, labeler, ks=(10, 20), weights=(0.5, 0.3, 0.2)):  # pylint: disable=R0913,R0914
    """ Mean over k of w_tsr * TSR + w_uer * UER + w_cts * CTS (k capped by absent count) """
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] == 0:
        raise EmptyMalwareSetError("No malware samples for the evasion objective")
    #
    scores = score_features(model, X, targets)
    per_k = {}
    values = []
    for k in ks:
        perturbed = np.stack([
            inject(row, select_top_k(row_scores, row, min(k, int(np.count_nonzero(row == 0)))))
            for row, row_scores in zip(X, scores)
        ])
        rates = evasion_metrics(counts_from_labels(labeler(perturbed.astype(np.float64)), targets))
        per_k[int(k)] = {"uer": rates.uer, "tsr": rates.tsr, "cts": rates.cts}
        values.append(weights[0] * rates.tsr + weights[1] * rates.uer + weights[2] * (rates.cts or 0.0))
    return float(np.mean(values)), per_k


def _reference_pools(ds_train, classes):
    pools = {}
    for class_id in classes:
        positions = ds_train.class_indices(class_id)
        if positions.size:
            pools[class_id] = positions
    return pools


def train_cvae(ds_train, ds_val_es, targets, proxy, cfg=None, seed=0, labeler=None):  # pylint: disable=R0913,R0914,R0915
    """ Train on training malware; early-stop on held-out malware objective """
    cfg = cfg or CvaeConfig()
    labeler = labeler or (lambda X: proxy_labels(proxy, X))
    #
    X, target_classes, _ = malware_rows(ds_train, targets)
    if X.shape[0] == 0:
        raise EmptyMalwareSetError("Training split has no malware samples")
    X_val, val_targets, _ = malware_rows(ds_val_es, targets)
    #
    model = CvaeModel(ds_train.n_features, cfg, seeding.make_rng(seed, "cvae", "init"))
    pools = _reference_pools(ds_train, model.target_classes)
    missing = sorted(set(target_classes.tolist()) - set(pools))
    if missing:
        raise UnknownClassError(f"No training references for target classes {missing}")
    #
    optimizer = Adam(model.parameters(), lr=cfg.lr, betas=cfg.betas, clip_norm=cfg.clip_norm)
    batch_rng = seeding.make_rng(seed, "cvae", "batches")
    noise_rng = seeding.make_rng(seed, "cvae", "noise")
    reference_rng = seeding.make_rng(seed, "cvae", "references")
    samples = ds_train.samples
    #
    best_objective = -np.inf
    best_state = None
    stale = 0
    #
    for epoch in range(1, cfg.epochs + 1):
        model.train()
        sums = dict.fromkeys(("total",) + TERM_NAMES, 0.0)
        batches = 0
        for rows in minibatches(X.shape[0], cfg.batch_size, batch_rng):
            references = np.array([reference_rng.choice(pools[int(item)]) for item in target_classes[rows]])
            optimizer.zero_grad()
            try:
                with Tape() as tape:
                    terms = cvae_losses(
                        model, proxy, Tensor(X[rows]), target_classes[rows],
                        samples[references].astype(np.float64), cfg, noise=noise_rng,
                    )
            except NonFiniteError as exc:
                raise TrainingDivergedError(
                    "cvae", epoch, getattr(exc, "term", exc.op_name), f"op '{exc.op_name}'",
                ) from exc
            tape.backward(terms.total)
            optimizer.step()
            for name in sums:
                sums[name] += getattr(terms, name).item()
            batches += 1
        #
        epoch_terms = {name: value / batches for name, value in sums.items()}
        entry = {"epoch": epoch, **epoch_terms}
        #
        if X_val.shape[0]:
            objective, _ = evasion_objective(model, X_val, val_targets, labeler, cfg.objective_ks, cfg.objective_weights)
            entry["objective"] = objective
        else:
            objective = -epoch_terms["total"]
        #
        model.history.append(entry)
        log.info("CVAE epoch", extra=entry)
        #
        if objective > best_objective:
            best_objective = objective
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                log.info("CVAE early stop", extra={"epoch": epoch, "best_objective": best_objective})
                break
    #
    model.load_state_dict(best_state)
    return model.eval()
