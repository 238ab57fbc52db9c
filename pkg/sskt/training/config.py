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

"""Training configuration and the optimizer recipes of the reference experiments."""

from typing import Annotated, Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator

from sskt.errors import ConfigError
from sskt.losses import LossPlan, PrimaryLossKind


class StepSchedule(BaseModel):
    """Multiply the lr by `gamma` at every milestone epoch."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["step"] = "step"
    gamma: float = Field(default=0.1, gt=0, le=1)
    milestones: tuple[int, ...] = ()

    @field_validator("milestones")
    @classmethod
    def _strictly_increasing(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(m < 0 for m in value):
            raise ValueError("milestones must be non-negative")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("milestones must be strictly increasing")
        return value


class PlateauSchedule(BaseModel):
    """Multiply the lr by `factor` after `patience` epochs without improvement."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["plateau"] = "plateau"
    factor: float = Field(default=0.1, gt=0, lt=1)
    patience: int = Field(default=10, ge=1)
    monitor: Literal["eval_metric", "loss_total", "loss_primary"] = "eval_metric"


SchedulerSpec = Annotated[StepSchedule | PlateauSchedule, Field(discriminator="kind")]


class TrainConfig(BaseModel):
    """SGD hyperparameters, schedule and loss plan of one training run."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    lr: float = Field(gt=0)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    weight_decay: float = Field(default=5e-4, ge=0)
    scheduler: SchedulerSpec = StepSchedule()
    epochs: int = Field(ge=1)
    batch_size: int = Field(default=32, ge=1)
    seed: int = Field(default=0, ge=0)
    loss_plan: LossPlan = LossPlan()


def _step(lr: float, weight_decay: float, milestones: tuple[int, ...], **extra: Any) -> dict:
    return {
        "lr": lr,
        "momentum": 0.9,
        "weight_decay": weight_decay,
        "scheduler": StepSchedule(gamma=0.1, milestones=milestones),
        "epochs": milestones[-1] + 50,
        "batch_size": 128,
        **extra,
    }


def _plateau(lr: float) -> dict:
    return {
        "lr": lr,
        "momentum": 0.9,
        "weight_decay": 1e-3,
        "scheduler": PlateauSchedule(factor=0.1),
        "epochs": 200,
        "batch_size": 128,
    }


_BCE = {"loss_plan": LossPlan(primary_kind=PrimaryLossKind.BCE)}

# Target-task rows of the reference training table. Epoch counts and batch
# sizes are not part of the table; they default to 50 epochs past the last
# milestone and 128.
RECIPES: dict[str, dict] = {
    "cifar10": _step(0.1, 5e-4, (150, 250, 350)),
    "cifar100": _step(0.1, 5e-4, (60, 120, 160, 200)),
    "stl10": _step(0.1, 5e-4, (60, 120, 160, 200)),
    "places365": _step(0.1, 1e-4, (30, 60, 90)),
    "imagenet": _step(0.1, 1e-4, (30, 60, 90)),
    "voc": _step(0.1, 1e-4, (30, 60, 90), **_BCE),
    "voc_finetune": _step(0.01, 1e-4, (30, 60, 90), **_BCE),
    "ucf101": _plateau(0.1),
    "ucf101_finetune": _plateau(0.01),
    "hmdb51": _plateau(0.1),
    "hmdb51_finetune": _plateau(0.01),
}


def recipe(name: str, **overrides: Any) -> TrainConfig:
    """Returns the named recipe as a TrainConfig, with fields overridden.

    Raises:
        ConfigError: For an unknown recipe name.
    """
    if name not in RECIPES:
        raise ConfigError(
            f"unknown recipe {name!r}; choose one of {', '.join(sorted(RECIPES))}"
        )
    return TrainConfig(**{**RECIPES[name], **overrides})
