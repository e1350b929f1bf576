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

""" Cross-seed aggregation """

import numpy as np  # pylint: disable=E0401
import pandas as pd  # pylint: disable=E0401

from ..errors import MetricError


METRICS = ("uer", "tsr", "cts", "recall6")


def records_frame(records):
    """ Records (MetricRecord or dict) as DataFrame """
    rows = [item.to_dict() if hasattr(item, "to_dict") else dict(item) for item in records]
    if not rows:
        raise MetricError("No records to aggregate")
    frame = pd.DataFrame(rows)
    for metric in METRICS:
        frame[metric] = pd.to_numeric(frame[metric], errors="coerce")
    return frame


def aggregate_runs(records):
    """ Per (method, k): count, sample mean and n-1 std of each metric; CTS nulls excluded """
    frame = records_frame(records)
    rows = []
    for (method, k), cell in frame.groupby(["method", "k"], sort=True):
        row = {"method": method, "k": int(k), "n": int(len(cell)), "single_seed": bool(len(cell) == 1)}
        for metric in METRICS:
            values = cell[metric].dropna()
            row[f"{metric}_n"] = int(len(values))
            row[f"{metric}_mean"] = float(values.mean()) if len(values) else np.nan
            row[f"{metric}_std"] = float(values.std(ddof=1)) if len(values) > 1 else (0.0 if len(values) else np.nan)
        rows.append(row)
    return pd.DataFrame(rows)


def plot_data(records):
    """ Per (method, k): median and interquartile band of each metric """
    frame = records_frame(records)
    rows = []
    for (method, k), cell in frame.groupby(["method", "k"], sort=True):
        row = {"method": method, "k": int(k)}
        for metric in METRICS:
            values = cell[metric].dropna().to_numpy()
            if values.size:
                low, median, high = np.percentile(values, [25, 50, 75])
            else:
                low = median = high = np.nan
            row.update({f"{metric}_median": median, f"{metric}_q1": low, f"{metric}_q3": high})
        rows.append(row)
    return pd.DataFrame(rows)


def table_grid(aggregated, metric="uer", ks=None, digits=4):
    """ Rows k, columns method, cells 'mean ± std' """
    frame = aggregated if ks is None else aggregated[aggregated["k"].isin(ks)]
    cells = frame.assign(
        cell=[
            "" if np.isnan(mean) else f"{mean:.{digits}f} ± {std:.{digits}f}"
            for mean, std in zip(frame[f"{metric}_mean"], frame[f"{metric}_std"])
        ]
    )
    return cells.pivot(index="k", columns="method", values="cell").sort_index()
