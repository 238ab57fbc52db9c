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

"""The SSKT training loop and evaluation.

Per batch: frozen sources produce soft labels for their transform of the
batch, the target network runs one trunk pass, the primary and auxiliary
losses are combined as `primary + alpha * sum(aux)`, and one SGD step is
taken. The schedule advances once per epoch.
"""

import dataclasses
import logging
from typing import Literal, Sequence

import numpy as np

from sskt.autodiff.tensor import Tape, backward, no_grad
from sskt.data.dataset import Dataset
from sskt.errors import ConfigError, NonFiniteError, TrainingDivergedError
from sskt.losses import PrimaryLossKind, auxiliary_loss, primary_loss, total_loss
from sskt.metrics import mean_average_precision, top1_accuracy
from sskt.models.network import TargetNetwork
from sskt.source import SourceTask, source_infer
from sskt.training.config import TrainConfig
from sskt.training.optim import SGDState, sgd_step
from sskt.training.schedulers import build_scheduler

logger = logging.getLogger(__name__)

Metric = Literal["top1", "map"]


@dataclasses.dataclass(frozen=True)
class EpochRecord:
    epoch: int
    lr: float
    loss_primary: float
    loss_aux: tuple[float, ...]
    loss_total: float
    eval_metric: float

    def monitored(self) -> dict[str, float]:
        return {
            "eval_metric": self.eval_metric,
            "loss_total": self.loss_total,
            "loss_primary": self.loss_primary,
        }


@dataclasses.dataclass
class RunMetrics:
    """Per-epoch records of one run."""

    metric: Metric
    num_sources: int
    records: list[EpochRecord] = dataclasses.field(default_factory=list)

    @property
    def final_metric(self) -> float:
        if not self.records:
            raise ValueError("no epoch has completed")
        return self.records[-1].eval_metric

    def columns(self) -> list[str]:
        return (
            ["epoch", "lr", "loss_primary"]
            + [f"loss_aux_{m}" for m in range(self.num_sources)]
            + ["loss_total", "eval_metric"]
        )

    def rows(self) -> list[list[float | int]]:
        return [
            [r.epoch, r.lr, r.loss_primary, *r.loss_aux, r.loss_total, r.eval_metric]
            for r in self.records
        ]


def epoch_permutation(seed: int, epoch: int, size: int) -> np.ndarray:
    """Shuffle order for one epoch, a pure function of (seed, epoch)."""
    return np.random.default_rng([seed, epoch]).permutation(size)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def evaluate(
    net: TargetNetwork, data: Dataset, metric: Metric = "top1", batch_size: int = 256
) -> float:
    """Top-1 accuracy of the primary logits, or mAP of their sigmoid scores."""
    if len(data) == 0:
        raise ValueError("evaluation set is empty")
    chunks = []
    with no_grad():
        for start in range(0, len(data), batch_size):
            x, _ = data.batch(np.arange(start, min(start + batch_size, len(data))))
            chunks.append(net.forward(x).primary_logits.data)
    logits = np.concatenate(chunks)
    if metric == "map":
        labels = data.labels
        if not data.multi_label:
            labels = np.eye(data.num_classes)[data.labels]
        return mean_average_precision(_sigmoid(logits), labels)
    return top1_accuracy(logits, data.labels)


def _check_arity(
    net: TargetNetwork, sources: Sequence[SourceTask], cfg: TrainConfig, data: Dataset
) -> None:
    plan = cfg.loss_plan
    if not len(plan.aux_specs) == len(sources) == net.num_sources:
        raise ConfigError(
            f"loss plan has {len(plan.aux_specs)} auxiliary losses, "
            f"{len(sources)} sources given, network has {net.num_sources} aux heads"
        )
    for m, source in enumerate(sources):
        if source.num_classes != net.source_classes[m]:
            raise ConfigError(
                f"aux head {m} has {net.source_classes[m]} outputs, "
                f"source {source.name!r} has {source.num_classes} classes"
            )
    if data.num_classes != net.num_classes:
        raise ConfigError(
            f"dataset has {data.num_classes} classes, primary head {net.num_classes}"
        )
    if data.multi_label != (plan.primary_kind is PrimaryLossKind.BCE):
        raise ConfigError(
            f"primary loss {plan.primary_kind.value} does not fit "
            f"{'multi' if data.multi_label else 'single'}-label data"
        )
    if plan.alpha == 0 and sources:
        logger.warning("alpha is 0: auxiliary losses are reported but not trained")


def train(
    net: TargetNetwork,
    sources: Sequence[SourceTask],
    data: Dataset,
    cfg: TrainConfig,
    eval_data: Dataset | None = None,
    metric: Metric | None = None,
) -> RunMetrics:
    """Trains `net` in place against its primary labels and frozen sources.

    Args:
        net: Target network with one aux head per source.
        sources: Frozen sources, in the loss plan's order.
        data: Training set for the primary task.
        cfg: Optimizer, schedule and loss plan.
        eval_data: Set evaluated after every epoch; defaults to `data`.
        metric: "top1" or "map"; defaults by label kind.

    Raises:
        ConfigError: On source, loss-plan or label arity mismatches.
        TrainingDivergedError: When a loss or parameter turns non-finite.
        FreezeViolationError: If a source changed during training.
    """
    _check_arity(net, sources, cfg, data)
    plan = cfg.loss_plan
    metric = metric or ("map" if data.multi_label else "top1")
    eval_data = eval_data if eval_data is not None else data
    scheduler = build_scheduler(cfg.scheduler, cfg.lr)
    state = SGDState()
    run = RunMetrics(metric=metric, num_sources=len(sources))

    for epoch in range(cfg.epochs):
        lr = scheduler.lr(epoch)
        order = epoch_permutation(cfg.seed, epoch, len(data))
        sum_primary = 0.0
        sum_aux = [0.0] * len(sources)
        sum_total = 0.0
        num_batches = 0
        for step, start in enumerate(range(0, len(data), cfg.batch_size)):
            x, y = data.batch(order[start : start + cfg.batch_size])
            inferences = [source_infer(source, x) for source in sources]
            try:
                with Tape() as tape:
                    out = net.forward(x)
                    primary = primary_loss(plan.primary_kind, out.primary_logits, y)
                    aux = [
                        auxiliary_loss(spec, logits, inference, plan.harden_aux_labels)
                        for spec, logits, inference in zip(
                            plan.aux_specs, out.aux_logits, inferences
                        )
                    ]
                    total = total_loss(primary, aux, plan.alpha)
                grads = backward(total, tape)
                net.params = sgd_step(
                    net.params,
                    {name: grads[param] for name, param in net.params.items()},
                    state,
                    lr,
                    cfg.momentum,
                    cfg.weight_decay,
                )
            except NonFiniteError as err:
                raise TrainingDivergedError(
                    f"non-finite value at epoch {epoch}, step {step} "
                    f"(lr={lr:g}, alpha={plan.alpha:g}): {err}"
                ) from err
            sum_primary += primary.item()
            for m, term in enumerate(aux):
                sum_aux[m] += term.item()
            sum_total += total.item()
            num_batches += 1
            logger.debug(
                "epoch %d step %d: total %.6f", epoch, step, total.item()
            )

        record = EpochRecord(
            epoch=epoch,
            lr=lr,
            loss_primary=sum_primary / num_batches,
            loss_aux=tuple(s / num_batches for s in sum_aux),
            loss_total=sum_total / num_batches,
            eval_metric=evaluate(net, eval_data, metric),
        )
        run.records.append(record)
        scheduler.observe(record.monitored())
        logger.info(
            "epoch %d lr %g primary %.4f aux %s total %.4f %s %.4f",
            epoch,
            lr,
            record.loss_primary,
            [round(a, 4) for a in record.loss_aux],
            record.loss_total,
            metric,
            record.eval_metric,
        )

    for source in sources:
        source.verify_frozen()
    return run
