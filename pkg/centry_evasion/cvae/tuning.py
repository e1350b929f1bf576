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

""" Seeded random search over CVAE hyperparameters """

import math
import functools

import numpy as np  # pylint: disable=E0401
import joblib  # pylint: disable=E0401

from .. import log
from ..config import CvaeConfig, TuningConfig
from ..distill.proxy import proxy_labels
from ..errors import TrainingDivergedError, EvasionError
from ..tools import files, seeding
from .training import train_cvae, evasion_objective, malware_rows


LOG_UNIFORM_KEYS = ("lambda_r", "beta", "lambda_s", "lambda_c", "lr")
CHOICE_KEYS = ("latent_dim", "embed_dim")


def sample_config(base, space, rng):
    """ Draw one configuration from the search space """
    update = {}
    for key in LOG_UNIFORM_KEYS:
        low, high = getattr(space, key)
        update[key] = float(math.exp(rng.uniform(math.log(low), math.log(high))))
    for key in CHOICE_KEYS:
        options = getattr(space, key)
        update[key] = int(options[int(rng.integers(len(options)))])
    return CvaeConfig.model_validate({**base.model_dump(), **update})


def run_trial(trial, ds_train, ds_val, targets, proxy, base, space, seed, ds_val_es=None, labeler=None):  # pylint: disable=R0913
    """ Train one sampled config and score it on validation malware """
    labeler = labeler or functools.partial(proxy_labels, proxy)
    cfg = sample_config(base, space, np.random.default_rng([seed, trial]))
    record = {"trial": trial, "config": cfg.model_dump(mode="json"), "objective": None, "per_k": None}
    #
    with log.context(stage="tune-cvae"):
        try:
            model = train_cvae(
                ds_train, ds_val_es, targets, proxy, cfg,
                seed=seeding.derive_seed(seed, "trial", trial), labeler=labeler,
            )
        except TrainingDivergedError as exc:
            record["error"] = str(exc)
            log.warning("Trial diverged", extra={"trial": trial, "error": str(exc)})
            return record
        #
        X_val, val_targets, _ = malware_rows(ds_val, targets)
        objective, per_k = evasion_objective(
            model, X_val, val_targets, labeler,
            cfg.objective_ks, cfg.objective_weights,
        )
    #
    record["objective"] = objective
    record["per_k"] = {str(k): value for k, value in per_k.items()}
    log.info("Trial finished", extra={"trial": trial, "objective": objective})
    return record


def run_trials(ds_train, ds_val, targets, proxy, search_cfg=None, base=None, seed=0, ds_val_es=None, labeler=None):  # pylint: disable=R0913
    """ All trial records ordered by trial index """
    search_cfg = search_cfg or TuningConfig()
    base = base or CvaeConfig()
    records = joblib.Parallel(n_jobs=search_cfg.n_jobs)(
        joblib.delayed(run_trial)(
            trial, ds_train, ds_val, targets, proxy, base, search_cfg, seed, ds_val_es, labeler,
        )
        for trial in range(search_cfg.trials)
    )
    return sorted(records, key=lambda item: item["trial"])


def best_trial(records):
    """ Highest objective; earliest trial wins ties """
    scored = [item for item in records if item["objective"] is not None]
    if not scored:
        raise EvasionError("Every tuning trial diverged")
    return max(scored, key=lambda item: (item["objective"], -item["trial"]))


def tune_hyperparameters(ds_train, ds_val, targets, proxy, search_cfg=None, base=None, seed=0, ds_val_es=None, log_path=None, labeler=None):  # pylint: disable=R0913
    """ Random search; persists trial log; returns best CvaeConfig

    labeler scores early stopping and the trial objective;
    defaults to the proxy argmax
    """
    records = run_trials(ds_train, ds_val, targets, proxy, search_cfg, base, seed, ds_val_es, labeler)
    if log_path is not None:
        files.write_jsonl(log_path, records)
    #
    best = best_trial(records)
    log.info("Tuning finished", extra={"trials": len(records), "best_trial": best["trial"], "objective": best["objective"]})
    return CvaeConfig.model_validate(best["config"])
