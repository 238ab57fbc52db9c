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

"""Experiment orchestration shared by the command line and the MCP tools.

Every operation writes its outputs under one directory: `metrics.csv`,
`summary.json`, `checkpoint.bin` and `checkpoint.manifest` for training
runs, one `.npz` file per split for `generate`.
"""

import dataclasses
import logging
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict

from sskt.data.dataset import Dataset
from sskt.data.synthetic import SyntheticTaskPair, TaskPairData, generate
from sskt.errors import ConfigError
from sskt.models.checkpoint import load_checkpoint, save_checkpoint
from sskt.models.network import build_target
from sskt.source import SourceTask, build_transform, load_source
from sskt.tools.experiments.config import ExperimentConfig
from sskt.tools.utils import (
    _get_package_version_with_fallback,
    construct_run_dir,
    validate_model,
)
from sskt.training.loop import RunMetrics, evaluate, train
from sskt.training.report import (
    METRICS_FILE,
    SUMMARY_FILE,
    read_summary,
    write_metrics_csv,
    write_summary,
)

logger = logging.getLogger(__name__)

SPLITS = ("source_train", "source_test", "target_train", "target_test")


def load_task_data(cfg: ExperimentConfig) -> TaskPairData:
    """The four splits of the configured data.

    Binary record files serve both tasks: the source is pretrained on the
    same files the target is trained on.
    """
    if isinstance(cfg.data, SyntheticTaskPair):
        return generate(cfg.data)
    train_split = cfg.data.read("train")
    test_split = cfg.data.read("test")
    return TaskPairData(train_split, test_split, train_split, test_split)


def _output_dir(cfg: ExperimentConfig, out_dir: str | Path | None) -> Path:
    path = Path(out_dir if out_dir is not None else cfg.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _timing(started: datetime, clock: float) -> Dict[str, Any]:
    return {
        "started_at": started.isoformat(),
        "wall_seconds": time.perf_counter() - clock,
    }


def _write_run(
    out: Path, run: RunMetrics, summary: Dict[str, Any]
) -> Dict[str, Any]:
    write_metrics_csv(run, out / METRICS_FILE)
    write_summary(summary, out / SUMMARY_FILE)
    return summary


def generate_data(cfg: ExperimentConfig, out_dir: str | Path | None = None) -> Dict[str, Any]:
    """Writes the four splits as `.npz` files and returns their sizes."""
    out = _output_dir(cfg, out_dir)
    data = load_task_data(cfg)
    splits = {}
    for name in SPLITS:
        split: Dataset = getattr(data, name)
        split.save(out / f"{name}.npz")
        splits[name] = {
            "size": len(split),
            "num_classes": split.num_classes,
            "sample_shape": list(split.sample_shape),
            "multi_label": split.multi_label,
        }
    summary = {
        "kind": "data",
        "version": _get_package_version_with_fallback(),
        "config": cfg.model_dump(mode="json"),
        "splits": splits,
    }
    write_summary(summary, out / SUMMARY_FILE)
    logger.info("wrote %d splits to %s", len(SPLITS), out)
    return summary


def pretrain_source(
    cfg: ExperimentConfig, out_dir: str | Path | None = None
) -> Dict[str, Any]:
    """Trains a source network on the source labels and writes its checkpoint.

    Returns:
        The run summary, including the final source test accuracy.
    """
    started, clock = datetime.now(timezone.utc), time.perf_counter()
    out = _output_dir(cfg, out_dir)
    data = load_task_data(cfg)
    train_cfg = cfg.source_train_config
    net = build_target(cfg.source_trunk_spec, cfg.num_source_classes, seed=train_cfg.seed)
    logger.info("pretraining source for %d epochs into %s", train_cfg.epochs, out)
    run = train(net, (), data.source_train, train_cfg, eval_data=data.source_test, metric="top1")
    manifest = save_checkpoint(net, out)
    summary = {
        "kind": "source",
        "version": _get_package_version_with_fallback(),
        "config": cfg.model_dump(mode="json"),
        "metric": run.metric,
        "final_metric": run.final_metric,
        "test_accuracy": run.final_metric,
        "num_sources": 0,
        "checksum": net.checksum(),
        "checkpoint_sha256": manifest["sha256"],
        "timing": _timing(started, clock),
    }
    logger.info("source test accuracy %.4f", run.final_metric)
    return _write_run(out, run, summary)


def load_sources(cfg: ExperimentConfig) -> list[SourceTask]:
    """Loads every configured source checkpoint, frozen, with its transform."""
    return [
        load_source(
            ref.checkpoint,
            transform=build_transform(ref.transforms),
            temperature=spec.temperature,
            name=ref.checkpoint,
        )
        for ref, spec in zip(cfg.sources, cfg.train.loss_plan.aux_specs)
    ]


@dataclasses.dataclass(frozen=True)
class ExperimentResult:
    run: RunMetrics
    summary: Dict[str, Any]


def run_experiment(
    cfg: ExperimentConfig, out_dir: str | Path | None = None
) -> ExperimentResult:
    """Runs scratch training (no sources) or SSKT training (with sources).

    Raises:
        CheckpointError: If a source checkpoint is missing or corrupt.
        ConfigError: On arity mismatches between sources and network.
        TrainingDivergedError: When training produces a non-finite loss.
    """
    started, clock = datetime.now(timezone.utc), time.perf_counter()
    out = _output_dir(cfg, out_dir)
    sources = load_sources(cfg)
    data = load_task_data(cfg)
    net = build_target(
        cfg.trunk,
        cfg.num_target_classes,
        [source.num_classes for source in sources],
        use_tm=cfg.use_tm,
        seed=cfg.train.seed,
        tm_width=cfg.tm_width,
    )
    logger.info(
        "starting %s run with %d sources into %s", cfg.scenario.value, len(sources), out
    )
    run = train(net, sources, data.target_train, cfg.train, eval_data=data.target_test)
    manifest = save_checkpoint(net, out)
    summary = {
        "kind": "target",
        "version": _get_package_version_with_fallback(),
        "scenario": cfg.scenario.value,
        "config": cfg.model_dump(mode="json"),
        "metric": run.metric,
        "final_metric": run.final_metric,
        "num_sources": len(sources),
        "sources": [
            {"name": s.name, "checksum": s.checksum, "num_classes": s.num_classes}
            for s in sources
        ],
        "checkpoint_sha256": manifest["sha256"],
        "timing": _timing(started, clock),
    }
    logger.info("finished: %s %.4f", run.metric, run.final_metric)
    return ExperimentResult(run, _write_run(out, run, summary))


def evaluate_run(run_dir: str | Path) -> Dict[str, Any]:
    """Re-evaluates a run's checkpoint on the test split it was evaluated on.

    Raises:
        ConfigError: If `run_dir` is not a completed training run.
    """
    path = construct_run_dir(run_dir)
    summary = read_summary(path / SUMMARY_FILE)
    if summary.get("kind") not in ("source", "target"):
        raise ConfigError(f"{path} holds no trained network")
    cfg = validate_model(ExperimentConfig, summary["config"])
    data = load_task_data(cfg)
    test = data.source_test if summary["kind"] == "source" else data.target_test
    net = load_checkpoint(path, requires_grad=False)
    value = evaluate(net, test, summary["metric"])
    return {
        "run_dir": str(path),
        "kind": summary["kind"],
        "metric": summary["metric"],
        "value": value,
        "recorded": summary["final_metric"],
    }
