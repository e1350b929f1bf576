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

""" Command line entry point """

import os
import json
import logging
import argparse

import joblib  # pylint: disable=E0401

from .. import log
from ..config import load_config
from ..errors import ConfigError, StageError, EvasionError, MissingArtifactError
from ..evaluation.reports import write_reports
from ..internal import constants
from .stages import Pipeline, COMMAND_STAGES, TABLE_KS


EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_STAGE = 2

COMMANDS = {
    "run": "run every stage for every seed, then write reports",
    "split": "stratified train/val_tune/val_es/test split",
    "train-ensemble": "train ensembles A (all classes) and B (benign classes)",
    "assign-targets": "pick target classes for malware samples with ensemble B",
    "distill": "distill ensemble A into the proxy",
    "tune-cvae": "random search over CVAE hyperparameters",
    "train-cvae": "train the CVAE with the best tuned config",
    "attack": "generate and label adversarial samples",
    "evaluate": "compute per-seed metric records",
    "report": "aggregate records across seeds",
    "export-embeddings": "write encoder embeddings as CSV",
}


def build_parser():
    """ Argument parser with one subcommand per stage """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="TOML experiment file")
    common.add_argument("--dataset", help="dataset path (overrides config)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override a config value (JSON or plain string)",
    )
    common.add_argument("--out-dir", help="artifact root (overrides config and environment)")
    common.add_argument("--seed", type=int, action="append", help="run seed (repeatable)")
    common.add_argument("--log-level", help="root log level (overrides the [logging] table)")
    common.add_argument("--force", action="store_true", help="rerun stages even when cached")
    #
    parser = argparse.ArgumentParser(prog="centry-evasion", description="Targeted API-import evasion experiments")
    commands = parser.add_subparsers(dest="command", required=True)
    for name, text in COMMANDS.items():
        command = commands.add_parser(name, parents=[common], help=text)
        if name == "attack":
            command.add_argument("--method", choices=constants.ATTACK_METHODS, action="append")
            command.add_argument("--k", type=int, action="append")
    return parser


def resolve_config(args, environ=None):
    """ Config file + overrides + environment + CLI flags """
    overrides = list(args.overrides)
    if args.dataset:
        overrides.append(f"dataset={json.dumps(args.dataset)}")
    config = load_config(args.config, overrides, environ=environ)
    #
    update = {}
    if args.out_dir:
        update["out_dir"] = args.out_dir
    if args.seed:
        update["seeds"] = tuple(args.seed)
    if getattr(args, "k", None):
        update["k_grid"] = tuple(sorted(set(args.k)))
    if getattr(args, "method", None):
        update["attack"] = config.attack.model_copy(update={"methods": tuple(dict.fromkeys(args.method))})
    if update:
        try:
            config = type(config).model_validate({**config.model_dump(), **{
                key: value.model_dump() if hasattr(value, "model_dump") else value for key, value in update.items()
            }})
        except ValueError as exc:
            raise ConfigError(f"Invalid command line options: {exc}") from exc
    return config


def logging_config(config, level=None):
    """ Settings dict for log.init: config [logging] table plus run log in out_dir """
    settings = dict(config.logging)
    if level is not None:
        settings["level"] = level
    handlers = list(settings.get("handlers", []))
    handlers.append({
        "type": "centry_evasion.handlers.artifact.ArtifactLogHandler",
        "settings": {"path": os.path.join(config.out_dir, "run.log")},
    })
    settings["handlers"] = handlers
    return settings


def _level(name):
    if name is None:
        return None
    level = logging.getLevelName(str(name).upper())
    return level if isinstance(level, int) else logging.INFO


def run_seed(config, seed, level=None, force=False):
    """ Full pipeline for one seed; returns error text or None """
    log.init(logging.INFO, config=logging_config(config, level))
    try:
        Pipeline(config, seed).run_all(force=force)
    except StageError as exc:
        log.error("Seed failed", extra={"failed_seed": seed, "error": str(exc)})
        return str(exc)
    return None


def write_report(config):
    """ Aggregate every seed with evaluation records """
    records, classifier_rows = [], []
    for seed in config.seeds:
        pipeline = Pipeline(config, seed)
        try:
            records.extend(pipeline.records())
            classifier_rows.extend(pipeline.classifier_rows())
        except MissingArtifactError:
            log.warning("Seed has no evaluation records", extra={"report_seed": seed})
    if not records:
        raise MissingArtifactError("report", "evaluate")
    #
    table_ks = [k for k in TABLE_KS if k in config.k_grid] or list(config.k_grid)
    return write_reports(os.path.join(config.out_dir, "report"), records, classifier_rows, table_ks)


def dispatch(args, config):
    """ Run the selected command """
    level = _level(args.log_level)
    if args.command == "run":
        failures = joblib.Parallel(n_jobs=config.n_jobs)(
            joblib.delayed(run_seed)(config, seed, level, args.force) for seed in config.seeds
        )
        failed = [(seed, error) for seed, error in zip(config.seeds, failures) if error]
        if len(failed) < len(config.seeds):
            write_report(config)
        if failed:
            raise StageError("run", "; ".join(f"seed {seed}: {error}" for seed, error in failed))
        return
    #
    if args.command == "report":
        write_report(config)
        return
    #
    for seed in config.seeds:
        pipeline = Pipeline(config, seed)
        for stage in COMMAND_STAGES[args.command]:
            pipeline.run_stage(stage, force=args.force)


def main(argv=None):
    """ Parse arguments, run, map errors to exit codes """
    args = build_parser().parse_args(argv)
    level = _level(args.log_level)
    #
    try:
        config = resolve_config(args)
    except ConfigError as exc:
        log.init(logging.INFO if level is None else level, force=True)
        log.error("Configuration error", extra={"error": str(exc)})
        return EXIT_CONFIG
    #
    log.init(logging.INFO, config=logging_config(config, level), force=True)
    try:
        dispatch(args, config)
    except ConfigError as exc:
        log.error("Configuration error", extra={"error": str(exc)})
        return EXIT_CONFIG
    except StageError as exc:
        log.error("Stage failure", extra={"failed_stage": exc.stage, "error": str(exc)})
        return EXIT_STAGE
    except EvasionError as exc:
        log.error("Run failure", extra={"error": str(exc)})
        return EXIT_STAGE
    #
    return EXIT_OK
