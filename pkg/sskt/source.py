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

"""Frozen source tasks: data transforms and soft-label inference.

A source is a trained network whose parameters never change while a target
network trains against its outputs. Before inference the target input goes
through the source's transform, e.g. taking the centre frame of a clip so an
image network can read it.
"""

import dataclasses
import logging
from pathlib import Path
from typing import Literal, Protocol, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sskt.autodiff import ops
from sskt.autodiff.tensor import Tensor, as_array, no_grad
from sskt.errors import FreezeViolationError, ShapeError
from sskt.models.checkpoint import load_checkpoint
from sskt.models.network import TargetNetwork

logger = logging.getLogger(__name__)


def center_frame(x: Tensor) -> Tensor:
    """The frame at depth index floor(D/2) of `x[B,C,D,H,W]`."""
    if x.ndim != 5:
        raise ShapeError(f"center_frame expects [B,C,D,H,W], got {x.shape}")
    depth = x.shape[2]
    return Tensor(x.data[:, :, depth // 2])


def _interpolation(size: int, new_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if new_size == 1:
        coords = np.array([(size - 1) / 2.0])
    else:
        coords = np.arange(new_size) * ((size - 1) / (new_size - 1))
    low = np.floor(coords).astype(np.int64)
    high = np.minimum(low + 1, size - 1)
    return low, high, coords - low


def resize(x: Tensor, h2: int, w2: int) -> Tensor:
    """Bilinear resize of `x[B,C,H,W]` with corner-aligned sampling.

    Resizing to the current size returns the values unchanged.
    """
    if x.ndim != 4:
        raise ShapeError(f"resize expects [B,C,H,W], got {x.shape}")
    if h2 < 1 or w2 < 1:
        raise ValueError(f"resize target must be positive, got {h2}x{w2}")
    height, width = x.shape[2:]
    if (h2, w2) == (height, width):
        return Tensor(x.data)
    data = x.data
    low, high, frac = _interpolation(height, h2)
    frac = frac[:, None]
    data = data[:, :, low] * (1 - frac) + data[:, :, high] * frac
    low, high, frac = _interpolation(width, w2)
    data = data[..., low] * (1 - frac) + data[..., high] * frac
    return Tensor(data)


class Transform(Protocol):
    def __call__(self, x: Tensor) -> Tensor: ...


class Identity:
    def __call__(self, x: Tensor) -> Tensor:
        return x

    def __repr__(self) -> str:
        return "Identity()"


class CenterFrame:
    def __call__(self, x: Tensor) -> Tensor:
        return center_frame(x)

    def __repr__(self) -> str:
        return "CenterFrame()"


@dataclasses.dataclass(frozen=True)
class Resize:
    height: int
    width: int

    def __call__(self, x: Tensor) -> Tensor:
        return resize(x, self.height, self.width)


@dataclasses.dataclass(frozen=True)
class Compose:
    """Applies transforms in order."""

    transforms: tuple[Transform, ...]

    def __call__(self, x: Tensor) -> Tensor:
        for transform in self.transforms:
            x = transform(x)
        return x


class TransformSpec(BaseModel):
    """Config entry for one transform."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["identity", "center_frame", "resize"]
    height: int | None = Field(default=None, ge=1)
    width: int | None = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check_size(self) -> "TransformSpec":
        sized = self.height is not None and self.width is not None
        if self.kind == "resize" and not sized:
            raise ValueError("resize needs height and width")
        if self.kind != "resize" and (self.height is not None or self.width is not None):
            raise ValueError(f"{self.kind} takes no height or width")
        return self

    def build(self) -> Transform:
        if self.kind == "center_frame":
            return CenterFrame()
        if self.kind == "resize":
            return Resize(self.height, self.width)
        return Identity()


def build_transform(specs: Sequence[TransformSpec]) -> Transform:
    if not specs:
        return Identity()
    if len(specs) == 1:
        return specs[0].build()
    return Compose(tuple(spec.build() for spec in specs))


@dataclasses.dataclass(frozen=True)
class SourceInference:
    """Detached source outputs: raw logits, their T=1 softmax, and T_s."""

    logits: Tensor
    soft_label: Tensor
    temperature: float = 1.0


@dataclasses.dataclass(frozen=True)
class SourceTask:
    """A frozen source network with its transform.

    Attributes:
        network: Forward-only network; its single head gives the K_s logits.
        transform: Maps target inputs to the source's input space.
        temperature: T_s, the softening used when this source is read
          through a KD auxiliary loss.
        checksum: Parameter checksum recorded at load time.
        name: Label used in logs and summaries.
    """

    network: TargetNetwork
    transform: Transform = dataclasses.field(default_factory=Identity)
    temperature: float = 1.0
    checksum: str = ""
    name: str = "source"

    def __post_init__(self) -> None:
        if not self.temperature > 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        if any(t.requires_grad for t in self.network.params.values()):
            object.__setattr__(self, "network", self.network.frozen())
        if not self.checksum:
            object.__setattr__(self, "checksum", self.network.checksum())

    @property
    def num_classes(self) -> int:
        return self.network.num_classes

    def verify_frozen(self) -> None:
        """Raises FreezeViolationError if the parameters changed since load."""
        current = self.network.checksum()
        if current != self.checksum:
            raise FreezeViolationError(
                f"source {self.name!r} changed: checksum {current} != {self.checksum}"
            )


def source_infer(source: SourceTask, x: Tensor | np.ndarray) -> SourceInference:
    """Runs the frozen source on `transform(x)`; outputs never join a tape.

    Raises:
        ShapeError: If the transformed input does not fit the source network.
    """
    with no_grad():
        inputs = source.transform(Tensor(as_array(x)))
        if inputs.ndim != 4 or inputs.shape[1:] != source.network.trunk.input_shape:
            raise ShapeError(
                f"source {source.name!r} expects inputs of shape "
                f"{source.network.trunk.input_shape}, transform gave {inputs.shape[1:]}"
            )
        logits = source.network.forward(inputs).primary_logits
        soft_label = ops.softmax_t(logits, 1.0)
    return SourceInference(logits.detach(), soft_label.detach(), source.temperature)


def load_source(
    location: str | Path,
    transform: Transform | None = None,
    temperature: float = 1.0,
    name: str | None = None,
) -> SourceTask:
    """Loads a checkpoint as a frozen source and records its checksum."""
    network = load_checkpoint(location, requires_grad=False)
    source = SourceTask(
        network=network,
        transform=transform or Identity(),
        temperature=temperature,
        name=name or str(location),
    )
    logger.info(
        "loaded source %s: %d classes, checksum %s",
        source.name,
        source.num_classes,
        source.checksum[:12],
    )
    return source
