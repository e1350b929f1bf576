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

""" Experiment harness: artifact store, stage caching, CLI commands """

import os
import logging

import numpy as np  # pylint: disable=E0401
import pytest  # pylint: disable=E0401

from centry_evasion.attack.runner import read_batch
from centry_evasion.config import load_config
from centry_evasion.data.dataset import load_dataset
from centry_evasion.ensemble.model import ensemble_labels
from centry_evasion.errors import MissingArtifactError
from centry_evasion.evaluation.aggregate import aggregate_runs, records_frame
from centry_evasion.evaluation.metrics import make_record
from centry_evasion.evaluation.reports import REPORT_FILES, read_records
from centry_evasion.harness.artifacts import ArtifactStore, MANIFEST
from centry_evasion.harness import stages
from centry_evasion.harness.cli import main, logging_config, EXIT_OK, EXIT_CONFIG, EXIT_STAGE
from centry_evasion.harness.stages import Pipeline, RUN_ORDER, attack_file
from centry_evasion.tools import files


#
# Artifact store
#

def test_store_commit_and_tamper_detection(tmp_path):
    store = ArtifactStore(str(tmp_path), 3)
    with open(store.path("split", "split.json"), "w", encoding="utf-8") as file:
        file.write("{}\n")
    #
    assert not store.is_complete("split", "abc")
    manifest = store.commit("split", "abc", ["split.json"])
    assert manifest["seed"] == 3
    assert os.path.exists(os.path.join(str(tmp_path), "seed_3", "split", MANIFEST))
    assert store.is_complete("split", "abc")
    assert not store.is_complete("split", "other")
    #
    with open(store.path("split", "split.json"), "w", encoding="utf-8") as file:
        file.write('{"changed": true}\n')
    assert not store.is_complete("split", "abc")
    with pytest.raises(MissingArtifactError) as info:
        store.require("split", "abc", "split", "train-ensemble")
    assert info.value.producer == "split"
    assert info.value.stage == "train-ensemble"


def test_store_invalidate(tmp_path):
    store = ArtifactStore(str(tmp_path), 1)
    store.commit("targets", "fp", [])
    assert store.is_complete("targets", "fp")
    store.invalidate("targets")
    assert store.manifest("targets") is None
    assert not store.is_complete("targets", "fp")


#
# Pipeline
#

def test_missing_upstream_names_producer(tiny_run_config):
    pipeline = Pipeline(tiny_run_config, 1)
    with pytest.raises(MissingArtifactError) as info:
        pipeline.run_stage("distill")
    assert info.value.producer == "split"
    assert "run 'split' first" in str(info.value)


def test_fingerprint_chains_upstream(tiny_run_config):
    base = Pipeline(tiny_run_config, 1)
    changed = Pipeline(
        tiny_run_config.model_copy(update={"distill": tiny_run_config.distill.model_copy(update={"epochs": 3})}), 1,
    )
    assert base.fingerprint("split") == changed.fingerprint("split")
    assert base.fingerprint("ensemble_a") == changed.fingerprint("ensemble_a")
    assert base.fingerprint("distill") != changed.fingerprint("distill")
    assert base.fingerprint("cvae") != changed.fingerprint("cvae")
    assert base.fingerprint("split") != Pipeline(tiny_run_config, 2).fingerprint("split")


def test_attack_without_cvae_skips_cvae_dependency(tiny_run_config):
    config = tiny_run_config.model_copy(update={
        "attack": tiny_run_config.attack.model_copy(update={"methods": ("random",)}),
    })
    assert "cvae" not in Pipeline(config, 1).stage_deps("attack")
    assert "cvae" in Pipeline(tiny_run_config, 1).stage_deps("attack")


def test_cvae_stages_score_with_ensemble_a(tiny_run_config, monkeypatch):
    pipeline = Pipeline(tiny_run_config, 1)
    for name in ("split", "ensemble_a", "ensemble_b", "targets", "distill"):
        pipeline.run_stage(name)
    assert "ensemble_a" in pipeline.stage_deps("tune_cvae")
    assert "ensemble_a" in pipeline.stage_deps("cvae")
    #
    seen = {}
    real_train = stages.train_cvae

    def fake_tune(*args, **kwargs):  # pylint: disable=W0613
        seen["tune"] = kwargs["labeler"]
        return tiny_run_config.cvae

    def fake_train(*args, **kwargs):  # pylint: disable=W0613
        seen["train"] = kwargs["labeler"]
        return real_train(*args, **kwargs)

    monkeypatch.setattr(stages, "tune_hyperparameters", fake_tune)
    monkeypatch.setattr(stages, "train_cvae", fake_train)
    pipeline.run_stage("tune_cvae")
    pipeline.run_stage("cvae")
    #
    ensemble = pipeline.ensemble("ensemble_a")
    X = pipeline.malware("train").samples.astype(np.float64)
    for labeler in (seen["tune"], seen["train"]):
        assert labeler.func is ensemble_labels
        assert np.array_equal(labeler(X), ensemble_labels(ensemble, X))


def test_rerun_hits_cache(tiny_run_config, caplog):
    Pipeline(tiny_run_config, 1).run_all()
    manifests = {
        name: files.read_json(os.path.join(tiny_run_config.out_dir, "seed_1", name, MANIFEST))
        for name in RUN_ORDER
    }
    #
    caplog.set_level(logging.INFO)
    caplog.clear()
    rerun = Pipeline(tiny_run_config, 1)
    assert not any(rerun.run_stage(name) for name in RUN_ORDER)
    assert sum(1 for item in caplog.records if item.getMessage() == "Stage cached") == len(RUN_ORDER)
    for name in RUN_ORDER:
        assert rerun.store.manifest(name) == manifests[name]
    #
    targets = files.hash_file(rerun.store.path("targets", "targets.csv"))
    rerun.store.clear("targets")
    assert rerun.run_stage("targets") is True
    assert files.hash_file(rerun.store.path("targets", "targets.csv")) == targets
    assert rerun.store.manifest("targets") == manifests["targets"]
    #
    wider = Pipeline(tiny_run_config.model_copy(update={"k_grid": (5, 10)}), 1)
    assert wider.run_stage("split") is False
    assert wider.run_stage("cvae") is False
    assert wider.run_stage("attack") is True
    assert os.path.exists(wider.store.path("attack", attack_file("random", 10)))


#
# Command line
#

def test_run_end_to_end_emits_reports(tiny_config_file, tmp_path, restore_root):
    assert main(["run", "-c", str(tiny_config_file)]) == EXIT_OK
    #
    report_dir = tmp_path / "runs" / "report"
    for name in REPORT_FILES.values():
        assert (report_dir / name).exists(), name
    assert (tmp_path / "runs" / "run.log").exists()
    #
    records = read_records(report_dir / REPORT_FILES["records"])
    cells = {(item.method, item.k) for item in records}
    assert cells == {("baseline", 0), ("cvae", 5), ("most_popular", 5), ("random", 5)}


def test_split_twice_gives_identical_manifests(tiny_config_file, tmp_path, restore_root):
    split_dir = tmp_path / "runs" / "seed_7" / "split"
    assert main(["split", "-c", str(tiny_config_file), "--seed", "7"]) == EXIT_OK
    first = {name: (split_dir / name).read_bytes() for name in ("split.json", MANIFEST)}
    #
    assert main(["split", "-c", str(tiny_config_file), "--seed", "7", "--force"]) == EXIT_OK
    second = {name: (split_dir / name).read_bytes() for name in ("split.json", MANIFEST)}
    assert first == second


def test_attack_random_adds_exactly_k(tiny_config_file, tmp_path, restore_root):
    config_args = ["-c", str(tiny_config_file)]
    for command in ("split", "train-ensemble", "assign-targets"):
        assert main([command, *config_args]) == EXIT_OK
    assert main(["attack", *config_args, "--method", "random", "--k", "10"]) == EXIT_OK
    #
    batch = read_batch(tmp_path / "runs" / "seed_1" / "attack" / attack_file("random", 10))
    assert batch
    dataset = load_dataset(tmp_path / "dataset.csv")
    rows = dict(zip(dataset.sample_ids.tolist(), dataset.samples))
    for item in batch:
        added = item["added_indices"]
        assert item["method"] == "random"
        assert len(added) == 10
        assert len(set(added)) == 10
        assert all(rows[item["sample_id"]][index] == 0 for index in added)
        assert 1 <= item["target"] <= 5


def test_report_matches_aggregate(tiny_config_file, tmp_path, restore_root):
    config = load_config(tiny_config_file, ["seeds=[1, 2]"], environ={})
    for seed, after in ((1, [2, 3, 6, 2]), (2, [6, 6, 2, 4])):
        store = ArtifactStore(config.out_dir, seed)
        records = [make_record("random", 5, seed, after, [2, 3, 4, 2])]
        records_frame(records).to_csv(store.path("evaluate", "records.csv"), index=False, lineterminator="\n")
        files.write_json(store.path("evaluate", "classifiers.json"), [{"classifier": "forest", "seed": seed}])
    #
    assert main(["report", "-c", str(tiny_config_file), "--seed", "1", "--seed", "2"]) == EXIT_OK
    #
    fixture = []
    for seed in (1, 2):
        fixture.extend(read_records(tmp_path / "runs" / f"seed_{seed}" / "evaluate" / "records.csv"))
    expected = aggregate_runs(fixture).to_csv(index=False, lineterminator="\n")
    written = (tmp_path / "runs" / "report" / REPORT_FILES["aggregate"]).read_text(encoding="utf-8")
    assert written == expected


def test_report_without_records_fails(tiny_config_file, restore_root):
    assert main(["report", "-c", str(tiny_config_file)]) == EXIT_STAGE


def test_missing_upstream_exit_code(tiny_config_file, restore_root):
    assert main(["distill", "-c", str(tiny_config_file)]) == EXIT_STAGE


def test_config_errors_exit_code(tiny_config_file, tmp_path, restore_root):
    assert main(["run", "-c", str(tmp_path / "absent.toml")]) == EXIT_CONFIG
    assert main(["split", "-c", str(tiny_config_file), "--set", "k_grid=[10, 5]"]) == EXIT_CONFIG


def test_log_level_flag_beats_logging_table(tiny_config_file, restore_root):
    config_args = ["-c", str(tiny_config_file), "--set", 'logging.level="WARNING"']
    assert main(["split", *config_args]) == EXIT_OK
    assert logging.root.level == logging.WARNING
    #
    assert main(["split", *config_args, "--log-level", "DEBUG", "--force"]) == EXIT_OK
    assert logging.root.level == logging.DEBUG
    #
    config = load_config(tiny_config_file, ['logging.level="WARNING"'], environ={})
    assert logging_config(config)["level"] == "WARNING"
    assert logging_config(config, logging.ERROR)["level"] == logging.ERROR
    assert "level" not in logging_config(load_config(tiny_config_file, environ={}))
