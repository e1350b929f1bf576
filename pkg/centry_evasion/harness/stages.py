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

""" Pipeline stages for one seed """

import os
import functools
import dataclasses

import numpy as np  # pylint: disable=E0401

from .. import log
from ..attack.runner import generate_batch, label_batch, write_batch, read_batch
from ..config import CvaeConfig, section_dump
from ..cvae.model import save_cvae, load_cvae
from ..cvae.training import train_cvae
from ..cvae.tuning import tune_hyperparameters
from ..data.dataset import load_dataset, class_frequency
from ..data.split import stratified_split, save_manifest, load_manifest
from ..distill.proxy import save_proxy, load_proxy, proxy_labels
from ..distill.training import cached_teacher_matrix, train_proxy, agreement_rate
from ..ensemble.model import (
    build_ensemble, save_ensemble, load_ensemble, manifest_hash,
    ensemble_predict, ensemble_labels, member_metrics,
)
from ..ensemble.targets import assign_targets, TargetAssignment
from ..errors import EvasionError, StageError, MissingArtifactError
from ..evaluation.metrics import baseline_record, make_record
from ..evaluation.aggregate import records_frame
from ..evaluation.reports import read_records
from ..internal import constants
from ..representation.export import export_embeddings
from ..tools import files, seeding
from .artifacts import ArtifactStore


@dataclasses.dataclass(frozen=True)
class Stage:
    """ Stage id, producing subcommand, upstream stages """

    name: str
    command: str
    deps: tuple = ()


STAGES = {
    "split": Stage("split", "split"),
    "ensemble_a": Stage("ensemble_a", "train-ensemble", ("split",)),
    "ensemble_b": Stage("ensemble_b", "train-ensemble", ("split",)),
    "targets": Stage("targets", "assign-targets", ("split", "ensemble_b")),
    "distill": Stage("distill", "distill", ("split", "ensemble_a")),
    "tune_cvae": Stage("tune_cvae", "tune-cvae", ("split", "ensemble_a", "targets", "distill")),
    "cvae": Stage("cvae", "train-cvae", ("split", "ensemble_a", "targets", "distill", "tune_cvae")),
    "attack": Stage("attack", "attack", ("split", "targets", "ensemble_a", "cvae")),
    "evaluate": Stage("evaluate", "evaluate", ("split", "targets", "ensemble_a", "attack")),
    "embeddings": Stage("embeddings", "export-embeddings", ("split", "ensemble_a")),
}

RUN_ORDER = ("split", "ensemble_a", "ensemble_b", "targets", "distill", "tune_cvae", "cvae", "attack", "evaluate")

COMMAND_STAGES = {
    "split": ("split",),
    "train-ensemble": ("ensemble_a", "ensemble_b"),
    "assign-targets": ("targets",),
    "distill": ("distill",),
    "tune-cvae": ("tune_cvae",),
    "train-cvae": ("cvae",),
    "attack": ("attack",),
    "evaluate": ("evaluate",),
    "export-embeddings": ("embeddings",),
}

TABLE_KS = (5, 10, 15, 20, 30, 50)


def attack_file(method, k):
    """ JSON-lines file of one attack cell """
    return f"{method}_k{k}.jsonl"


class Pipeline:  # pylint: disable=R0904
    """ Stage runner for one (config, seed) """

    def __init__(self, config, seed):
        self.config = config
        self.seed = seed
        self.store = ArtifactStore(config.out_dir, seed)
        self._dataset = None
        self._dataset_hash = None
        self._fingerprints = {}

    #
    # Inputs
    #

    @property
    def dataset(self):
        """ Loaded dataset """
        if self._dataset is None:
            self._dataset = load_dataset(self.config.dataset, self.config.dataset_format, self.config.class_count)
        return self._dataset

    @property
    def dataset_hash(self):
        """ Content hash of the dataset file """
        if self._dataset_hash is None:
            self._dataset_hash = files.hash_file(self.config.dataset)
        return self._dataset_hash

    def stage_seed(self, stage):
        """ Stage RNG seed from run seed and stage name """
        return seeding.derive_seed(self.seed, stage)

    def _stage_inputs(self, name):
        cfg = self.config
        if name == "split":
            return {
                "dataset": self.dataset_hash, "format": cfg.dataset_format,
                "class_count": cfg.class_count, "fractions": list(cfg.split_fractions),
            }
        if name in ("ensemble_a", "ensemble_b"):
            return section_dump(cfg.ensemble)
        if name == "distill":
            return section_dump(cfg.distill)
        if name == "tune_cvae":
            return {"tuning": section_dump(cfg.tuning), "cvae": section_dump(cfg.cvae)}
        if name == "attack":
            return {"k_grid": list(cfg.k_grid), "attack": section_dump(cfg.attack)}
        if name == "embeddings":
            return section_dump(cfg.export)
        return {}

    def stage_deps(self, name):
        """ Upstream stages actually needed under this config """
        deps = STAGES[name].deps
        if name == "attack" and "cvae" not in self.config.attack.methods:
            deps = tuple(item for item in deps if item != "cvae")
        if name == "embeddings" and self.config.export.k is not None:
            deps = deps + ("attack",)
        return deps

    def fingerprint(self, name):
        """ Hash of stage inputs chained with upstream fingerprints """
        if name not in self._fingerprints:
            self._fingerprints[name] = files.hash_data({
                "stage": name,
                "seed": self.seed,
                "inputs": self._stage_inputs(name),
                "deps": {dep: self.fingerprint(dep) for dep in self.stage_deps(name)},
            })
        return self._fingerprints[name]

    #
    # Running
    #

    def run_stage(self, name, force=False, run_deps=False):
        """ Run one stage unless cached; upstream must be complete (or run when run_deps) """
        for dep in self.stage_deps(name):
            if run_deps:
                self.run_stage(dep, run_deps=True)
            elif not self.store.is_complete(dep, self.fingerprint(dep)):
                raise MissingArtifactError(name, STAGES[dep].command)
        #
        fingerprint = self.fingerprint(name)
        with log.context(seed=self.seed, stage=name):
            if not force and self.store.is_complete(name, fingerprint):
                log.info("Stage cached", extra={"status": "cached"})
                return False
            #
            log.info("Stage started", extra={"status": "started"})
            self.store.invalidate(name)
            try:
                produced = getattr(self, f"_run_{name}")()
            except StageError:
                log.error("Stage failed", extra={"status": "failed"})
                raise
            except EvasionError as exc:
                log.error("Stage failed", extra={"status": "failed", "error": str(exc)})
                raise StageError(name, str(exc)) from exc
            #
            self.store.commit(name, fingerprint, produced)
            log.info("Stage completed", extra={"status": "completed"})
            return True

    def run_all(self, force=False):
        """ All stages through evaluation """
        for name in RUN_ORDER:
            if name in ("tune_cvae", "cvae") and "cvae" not in self.config.attack.methods:
                continue
            self.run_stage(name, force=force, run_deps=True)

    #
    # Cached artifacts
    #

    def split_manifest(self):
        """ Split indices """
        return load_manifest(self.store.path("split", "split.json"))

    def part(self, name):
        """ Dataset restricted to one split """
        return self.dataset.subset(self.split_manifest().indices(name))

    def ensemble(self, stage):
        """ Ensemble A or B """
        return load_ensemble(self.store.stage_dir(stage))

    def black_box_labeler(self):
        """ Ensemble A argmax; scores CVAE early stopping and tuning trials """
        return functools.partial(ensemble_labels, self.ensemble("ensemble_a"))

    def targets(self):
        """ Target assignment of all malware samples """
        return TargetAssignment.from_csv(self.store.path("targets", "targets.csv"))

    def proxy(self):
        """ Frozen proxy """
        return load_proxy(self.store.path("distill", "proxy.cevp"))

    def cvae(self):
        """ Trained CVAE """
        return load_cvae(self.store.path("cvae", "cvae.cevp"))

    def malware(self, split):
        """ Malware samples of a split """
        return self.part(split).restrict_classes([constants.MALWARE_CLASS])

    #
    # Stages
    #

    def _run_split(self):
        manifest = stratified_split(self.dataset, self.config.split_fractions, seed=self.stage_seed("split"))
        save_manifest(manifest, self.store.path("split", "split.json"))
        return ["split.json"]

    def _train_ensemble(self, stage, classes):
        model = build_ensemble(
            self.part("train"), self.part("val_tune"), classes, self.stage_seed(stage), self.config.ensemble,
        )
        save_ensemble(self.store.stage_dir(stage), model)
        #
        test = self.part("test").restrict_classes(classes)
        rows = member_metrics(model, test.features(), test.labels) if len(test) else []
        files.write_json(self.store.path(stage, "classifiers.json"), rows)
        return sorted(os.listdir(self.store.stage_dir(stage)))

    def _run_ensemble_a(self):
        return self._train_ensemble("ensemble_a", self.dataset.classes)

    def _run_ensemble_b(self):
        benign = tuple(item for item in self.dataset.classes if item != constants.MALWARE_CLASS)
        return self._train_ensemble("ensemble_b", benign)

    def _run_targets(self):
        malware = self.dataset.subset(
            np.sort(np.concatenate([self.split_manifest().indices(name) for name in constants.SPLIT_NAMES]))
        ).restrict_classes([constants.MALWARE_CLASS])
        assignment = assign_targets(self.ensemble("ensemble_b"), malware.features(), malware.sample_ids)
        assignment.to_csv(self.store.path("targets", "targets.csv"))
        return ["targets.csv"]

    def _run_distill(self):
        ensemble = self.ensemble("ensemble_a")
        train = self.part("train")
        teacher_q = cached_teacher_matrix(
            self.store.path("distill", "teacher_q.cevp"), ensemble, train.features(),
            manifest_hash(self.store.stage_dir("ensemble_a")),
        )
        proxy = train_proxy(ensemble, train, self.config.distill, self.stage_seed("distill"), teacher_q=teacher_q)
        save_proxy(self.store.path("distill", "proxy.cevp"), proxy)
        #
        test = self.part("test")
        metrics = {
            "proxy_test_accuracy": float(np.mean(proxy_labels(proxy, test.features()) == test.labels)),
            "agreement_rate": agreement_rate(proxy, ensemble, test.features()),
        }
        files.write_json(self.store.path("distill", "metrics.json"), metrics)
        log.info("Proxy fidelity", extra=metrics)
        return ["teacher_q.cevp", "teacher_q.cevp.json", "proxy.cevp", "proxy.cevp.json", "metrics.json"]

    def _run_tune_cvae(self):
        best = tune_hyperparameters(
            self.part("train"), self.part("val_tune"), self.targets(), self.proxy(),
            self.config.tuning, self.config.cvae, seed=self.stage_seed("tune_cvae"),
            ds_val_es=self.part("val_es"), log_path=self.store.path("tune_cvae", "trials.jsonl"),
            labeler=self.black_box_labeler(),
        )
        files.write_json(self.store.path("tune_cvae", "best_config.json"), best.model_dump(mode="json"))
        return ["trials.jsonl", "best_config.json"]

    def _run_cvae(self):
        cfg = CvaeConfig.model_validate(files.read_json(self.store.path("tune_cvae", "best_config.json")))
        model = train_cvae(
            self.part("train"), self.part("val_es"), self.targets(), self.proxy(), cfg,
            seed=self.stage_seed("cvae"), labeler=self.black_box_labeler(),
        )
        save_cvae(self.store.path("cvae", "cvae.cevp"), model)
        files.write_jsonl(self.store.path("cvae", "history.jsonl"), model.history)
        return ["cvae.cevp", "cvae.cevp.json", "history.jsonl"]

    def _run_attack(self):
        split = self.config.attack.split
        malware = self.malware(split)
        targets = self.targets().lookup(malware.sample_ids)
        ensemble = self.ensemble("ensemble_a")
        cvae = self.cvae() if "cvae" in self.config.attack.methods else None
        train = self.part("train")
        frequencies = {
            class_id: class_frequency(train, class_id)
            for class_id in sorted(set(targets.tolist()))
        }
        #
        produced = []
        for method in self.config.attack.methods:
            for k in self.config.k_grid:
                samples = generate_batch(
                    method, malware.samples, malware.sample_ids, targets, k,
                    cvae=cvae, frequencies=frequencies, seed=self.stage_seed("attack"),
                )
                samples = label_batch(samples, lambda X: ensemble_predict(ensemble, X), ensemble.classes)
                write_batch(self.store.path("attack", attack_file(method, k)), samples)
                produced.append(attack_file(method, k))
        return produced

    def _run_evaluate(self):
        ensemble = self.ensemble("ensemble_a")
        test = self.part(self.config.attack.split)
        assignment = self.targets()
        malware = test.restrict_classes([constants.MALWARE_CLASS])
        #
        predicted = ensemble_labels(ensemble, test.features())
        records = [
            baseline_record(
                self.seed, predicted, test.labels, ensemble.classes, assignment.lookup(malware.sample_ids),
            )
        ]
        for method in self.config.attack.methods:
            for k in self.config.k_grid:
                batch = read_batch(self.store.path("attack", attack_file(method, k)))
                records.append(make_record(
                    method, k, self.seed,
                    [item["after_label"] for item in batch], [item["target"] for item in batch],
                ))
        #
        records_frame(records).to_csv(self.store.path("evaluate", "records.csv"), index=False, lineterminator="\n")
        files.write_json(
            self.store.path("evaluate", "classifiers.json"),
            [dict(row, seed=self.seed) for row in member_metrics(ensemble, test.features(), test.labels)],
        )
        return ["records.csv", "classifiers.json"]

    def _run_embeddings(self):
        export_cfg = self.config.export
        ensemble = self.ensemble("ensemble_a")
        dataset = self.part(export_cfg.split)
        adversarial = None
        if export_cfg.k is not None:
            batch = read_batch(self.store.path("attack", attack_file(export_cfg.method, export_cfg.k)))
            lookup = {int(sample_id): row for sample_id, row in zip(self.dataset.sample_ids, self.dataset.samples)}
            rows = []
            for item in batch:
                row = np.array(lookup[item["sample_id"]], dtype=np.float64)
                row[item["added_indices"]] = 1.0
                rows.append(row)
            adversarial = (
                np.stack(rows) if rows else np.zeros((0, dataset.n_features)),
                [item["sample_id"] for item in batch],
                [constants.MALWARE_CLASS] * len(batch),
                f"{export_cfg.method}_k{export_cfg.k}",
            )
        export_embeddings(self.store.path("embeddings", "embeddings.csv"), ensemble.encoder, dataset, adversarial)
        return ["embeddings.csv"]

    #
    # Results
    #

    def records(self):
        """ Evaluation records of this seed """
        path = self.store.path("evaluate", "records.csv")
        if not os.path.exists(path):
            raise MissingArtifactError("report", STAGES["evaluate"].command)
        return read_records(path)

    def classifier_rows(self):
        """ Classifier comparison rows of this seed """
        return files.read_json(self.store.path("evaluate", "classifiers.json"))
