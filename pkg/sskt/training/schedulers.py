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

"""Per-epoch learning-rate schedules.

Rates are multiplied in decimal arithmetic on the shortest decimal form of
each float, so a 0.1 schedule decays to exactly 0.01, 0.001, 0.0001.
"""

import bisect
import dataclasses
import logging
from decimal import Decimal
from typing import Literal, Protocol, Sequence

from sskt.training.config import PlateauSchedule, SchedulerSpec, StepSchedule

logger = logging.getLogger(__name__)

_IMPROVEMENT = 1e-8


def _decimal_product(value: float, factor: float, times: int = 1) -> float:
    return float(Decimal(repr(value)) * Decimal(repr(factor)) ** times)


def step_schedule(
    lr0: float, gamma: float, milestones: Sequence[int], epoch: int
) -> float:
    """`lr0 * gamma ** (number of milestones <= epoch)`."""
    if epoch < 0:
        raise ValueError(f"epoch must be non-negative, got {epoch}")
    passed = bisect.bisect_right(list(milestones), epoch)
    if passed == 0:
        return lr0
    return _decimal_product(lr0, gamma, passed)


@dataclasses.dataclass
class PlateauState:
    """Counter state of the reduce-on-plateau schedule."""

    lr: float
    mode: Literal["max", "min"] = "max"
    best: float | None = None
    num_bad_epochs: int = 0


def plateau_schedule(
    state: PlateauState, metric: float, factor: float, patience: int
) -> float:
    """Feeds one epoch's metric; returns the lr for the next epoch.

    An epoch improves when the metric beats the best so far by more than
    1e-8 in the monitored direction. After `patience` consecutive epochs
    without improvement the lr is multiplied by `factor` and the counter
    resets.
    """
    if not 0 < factor < 1:
        raise ValueError(f"factor must lie in (0, 1), got {factor}")
    if patience < 1:
        raise ValueError(f"patience must be at least 1, got {patience}")
    if state.best is None:
        improved = True
    elif state.mode == "max":
        improved = metric > state.best + _IMPROVEMENT
    else:
        improved = metric < state.best - _IMPROVEMENT
    if improved:
        state.best = metric
        state.num_bad_epochs = 0
    else:
        state.num_bad_epochs += 1
    if state.num_bad_epochs >= patience:
        state.lr = _decimal_product(state.lr, factor)
        state.num_bad_epochs = 0
        logger.info("plateau: lr reduced to %g", state.lr)
    return state.lr


class Scheduler(Protocol):
    def lr(self, epoch: int) -> float: ...

    def observe(self, metrics: dict[str, float]) -> None: ...


class StepScheduler:
    def __init__(self, spec: StepSchedule, lr0: float) -> None:
        self.spec = spec
        self.lr0 = lr0

    def lr(self, epoch: int) -> float:
        return step_schedule(self.lr0, self.spec.gamma, self.spec.milestones, epoch)

    def observe(self, metrics: dict[str, float]) -> None:
        pass


class PlateauScheduler:
    def __init__(self, spec: PlateauSchedule, lr0: float) -> None:
        self.spec = spec
        mode = "max" if spec.monitor == "eval_metric" else "min"
        self.state = PlateauState(lr=lr0, mode=mode)

    def lr(self, epoch: int) -> float:
        return self.state.lr

    def observe(self, metrics: dict[str, float]) -> None:
        plateau_schedule(
            self.state, metrics[self.spec.monitor], self.spec.factor, self.spec.patience
        )


def build_scheduler(spec: SchedulerSpec, lr0: float) -> Scheduler:
    if isinstance(spec, PlateauSchedule):
        return PlateauScheduler(spec, lr0)
    return StepScheduler(spec, lr0)
