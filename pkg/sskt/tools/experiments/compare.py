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

"""Side-by-side comparison of completed runs."""

import csv
import logging
from pathlib import Path
from typing import Any, Dict, Sequence

import numpy as np

from sskt.errors import ConfigError
from sskt.tools.utils import construct_run_dir
from sskt.training.report import SUMMARY_FILE, read_summary

logger = logging.getLogger(__name__)

COMPARISON_CSV = "comparison.csv"
COMPARISON_TXT = "comparison.txt"


def run_group(summary: Dict[str, Any]) -> str:
    """Label shared by runs that differ only in seed and output directory."""
    config = summary["config"]
    if summary["kind"] == "source":
        return f"{config['scenario']}/source"
    plan = config["train"]["loss_plan"]
    if not plan["aux_specs"]:
        return f"{config['scenario']}/scratch"
    kinds = "+".join(spec["kind"] for spec in plan["aux_specs"])
    tm = ",tm" if config["use_tm"] else ""
    return f"{config['scenario']}/sskt[{kinds},alpha={plan['alpha']:g}{tm}]"


def _run_seed(summary: Dict[str, Any]) -> int:
    config = summary["config"]
    if summary["kind"] == "source":
        source_train = config["source_train"] or config["train"]
        return source_train["seed"]
    return config["train"]["seed"]


def _format_group(group: Dict[str, Any]) -> str:
    return (
        f"{group['group']}  n={group['n']}  "
        f"{100 * group['mean']:.2f}±{100 * group['std']:.2f}"
    )


def compare(
    run_dirs: Sequence[str | Path], out_dir: str | Path | None = None
) -> Dict[str, Any]:
    """Aligns the final metrics of completed runs.

    Each run's delta is taken against the first listed run with the same
    seed. Groups report the mean and sample standard deviation (0 for a
    single run).

    Args:
        run_dirs: At least two completed run directories.
        out_dir: If given, receives `comparison.csv` and `comparison.txt`.

    Raises:
        ConfigError: For fewer than two runs, an incomplete run directory or
          runs recording different metrics.
    """
    if len(run_dirs) < 2:
        raise ConfigError(f"compare needs at least two runs, got {len(run_dirs)}")
    summaries = []
    for run_dir in run_dirs:
        path = construct_run_dir(run_dir)
        summary = read_summary(path / SUMMARY_FILE)
        if "metric" not in summary:
            raise ConfigError(f"{path} is not a training run")
        summaries.append((str(run_dir), summary))

    metrics = sorted({summary["metric"] for _, summary in summaries})
    if len(metrics) > 1:
        raise ConfigError(f"runs record different metrics: {', '.join(metrics)}")

    baseline: Dict[int, float] = {}
    runs = []
    for name, summary in summaries:
        seed = _run_seed(summary)
        value = summary["final_metric"]
        baseline.setdefault(seed, value)
        runs.append(
            {
                "run": name,
                "group": run_group(summary),
                "seed": seed,
                "metric": summary["metric"],
                "value": value,
                "delta": value - baseline[seed],
            }
        )

    groups = []
    for group in dict.fromkeys(run["group"] for run in runs):
        values = np.array([run["value"] for run in runs if run["group"] == group])
        groups.append(
            {
                "group": group,
                "n": len(values),
                "mean": float(values.mean()),
                "std": float(values.std(ddof=1)) if len(values) > 1 else 0.0,
            }
        )

    result = {"metric": metrics[0], "runs": runs, "groups": groups}
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        columns = ["run", "group", "seed", "metric", "value", "delta"]
        with open(out / COMPARISON_CSV, "w", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for run in runs:
                writer.writerow(
                    {**run, "value": repr(run["value"]), "delta": repr(run["delta"])}
                )
        lines = [f"metric: {result['metric']} (percent, mean±std)"]
        lines += [_format_group(group) for group in groups]
        (out / COMPARISON_TXT).write_text("\n".join(lines) + "\n")
        logger.info("wrote comparison of %d runs to %s", len(runs), out)
    return result


def format_comparison(result: Dict[str, Any]) -> str:
    """The text table printed by the command line."""
    lines = [f"metric: {result['metric']}"]
    for run in result["runs"]:
        lines.append(
            f"{run['run']}  {run['group']}  seed={run['seed']}  "
            f"{run['value']:.4f}  delta={run['delta']:+.4f}"
        )
    lines += [_format_group(group) for group in result["groups"]]
    return "\n".join(lines)
