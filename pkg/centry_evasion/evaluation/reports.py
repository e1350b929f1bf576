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

""" Report files """

import os

import pandas as pd  # pylint: disable=E0401

from .. import log
from .aggregate import METRICS, records_frame, aggregate_runs, plot_data, table_grid
from .metrics import MetricRecord


REPORT_FILES = {
    "records": "records.csv",
    "aggregate": "aggregate.csv",
    "plot_data": "plot_data.csv",
    "uer_table": "table_uer.csv",
    "tsr_table": "table_tsr.csv",
    "cts_table": "table_cts.csv",
    "recall6_table": "table_recall6.csv",
    "classifiers": "classifiers.csv",
}


def _write(frame, path, index=False):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    frame.to_csv(path, index=index, lineterminator="\n")
    return path


def read_records(path):
    """ MetricRecords from records CSV """
    frame = pd.read_csv(path, keep_default_na=True)
    frame = frame.astype(object).where(frame.notna(), None)
    return [MetricRecord(**row) for row in frame.to_dict(orient="records")]


def write_reports(out_dir, records, classifier_rows=None, table_ks=None):
    """ Emit per-record, aggregated, plot-data and table-shaped CSVs; returns paths """
    paths = {}
    paths["records"] = _write(records_frame(records), os.path.join(out_dir, REPORT_FILES["records"]))
    #
    aggregated = aggregate_runs(records)
    paths["aggregate"] = _write(aggregated, os.path.join(out_dir, REPORT_FILES["aggregate"]))
    paths["plot_data"] = _write(plot_data(records), os.path.join(out_dir, REPORT_FILES["plot_data"]))
    for metric in METRICS:
        key = f"{metric}_table"
        paths[key] = _write(
            table_grid(aggregated, metric, ks=table_ks), os.path.join(out_dir, REPORT_FILES[key]), index=True,
        )
    #
    if classifier_rows:
        paths["classifiers"] = _write(
            pd.DataFrame(classifier_rows), os.path.join(out_dir, REPORT_FILES["classifiers"]),
        )
    #
    log.info("Reports written", extra={"records": len(records), "out_dir": out_dir})
    return paths
