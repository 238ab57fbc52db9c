# Copyright 2025 The SSKT Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Run outputs: per-epoch metrics CSV and the JSON summary."""

import csv
import json
from pathlib import Path
from typing import Any

from sskt.training.loop import EpochRecord, RunMetrics

METRICS_FILE = "metrics.csv"
SUMMARY_FILE = "summary.json"


def write_metrics_csv(run: RunMetrics, path: str | Path) -> None:
    """One row per epoch: epoch, lr, loss_primary, loss_aux_*, loss_total, eval_metric."""
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(run.columns())
        for row in run.rows():
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_metrics_csv(path: str | Path, metric: str) -> RunMetrics:
    with open(path, newline="") as f:
        rows = list(csv.DictReader(f))
    aux_columns = sorted(
        (c for c in (rows[0].keys() if rows else ()) if c.startswith("loss_aux_")),
        key=lambda c: int(c.rsplit("_", 1)[1]),
    )
    run = RunMetrics(metric=metric, num_sources=len(aux_columns))
    for row in rows:
        run.records.append(
            EpochRecord(
                epoch=int(row["epoch"]),
                lr=float(row["lr"]),
                loss_primary=float(row["loss_primary"]),
                loss_aux=tuple(float(row[c]) for c in aux_columns),
                loss_total=float(row["loss_total"]),
                eval_metric=float(row["eval_metric"]),
            )
        )
    return run


def write_summary(summary: dict[str, Any], path: str | Path) -> None:
    Path(path).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")


def read_summary(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())
