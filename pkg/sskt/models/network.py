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

"""The multi-task target network: shared trunk, primary head, auxiliary heads.

Parameters live in one ordered name -> tensor map. Names follow the layout

    trunk.block{i}.weight / .bias
    primary.weight / .bias
    tm{m}.bottleneck{i}.weight       (only with the transfer module)
    aux{m}.weight / .bias

so optimizers, checkpoints and checksums can treat every parameter alike.
"""

import dataclasses
import hashlib
import logging
import zlib
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sskt.autodiff import ops
from sskt.autodiff.tensor import Tensor
from sskt.errors import ShapeError
from sskt.models.transfer import TransferModule, tm_forward

logger = logging.getLogger(__name__)


class ConvBlockSpec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    out_channels: int = Field(ge=1)
    kernel: int = Field(default=3, ge=1)
    stride: int = Field(default=1, ge=1)
    pad: int = Field(default=1, ge=0)
    relu: bool = True


class TrunkSpec(BaseModel):
    """Input shape `(C, H, W)` and the conv blocks of the shared trunk."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    input_shape: tuple[int, int, int]
    blocks: tuple[ConvBlockSpec, ...] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_block_shapes(self) -> "TrunkSpec":
        if min(self.input_shape) < 1:
            raise ValueError(f"input_shape must be positive, got {self.input_shape}")
        self.block_shapes()
        return self

    def block_shapes(self) -> tuple[tuple[int, int, int], ...]:
        """Output `(C, H, W)` of every block."""
        channels, height, width = self.input_shape
        shapes = []
        for block in self.blocks:
            height = ops.conv_output_size(height, block.kernel, block.stride, block.pad)
            width = ops.conv_output_size(width, block.kernel, block.stride, block.pad)
            channels = block.out_channels
            shapes.append((channels, height, width))
        return tuple(shapes)

    @property
    def feature_width(self) -> int:
        """Width of the globally pooled final feature."""
        return self.blocks[-1].out_channels


@dataclasses.dataclass(frozen=True)
class NetworkOutput:
    primary_logits: Tensor
    aux_logits: tuple[Tensor, ...]
    block_features: tuple[Tensor, ...]


class TargetNetwork:
    """Shared trunk feeding a primary head and one auxiliary head per source.

    Attributes:
        trunk: The trunk architecture.
        num_classes: Width of the primary head.
        source_classes: Width of each auxiliary head, in source order.
        use_tm: Whether auxiliary heads read a transfer module instead of the
          pooled final trunk feature.
        tm_width: Common bottleneck width of the transfer modules.
        params: Ordered parameter map; replaced wholesale by optimizer steps.
    """

    def __init__(
        self,
        trunk: TrunkSpec,
        num_classes: int,
        source_classes: Sequence[int],
        use_tm: bool,
        tm_width: int,
        params: dict[str, Tensor],
    ) -> None:
        self.trunk = trunk
        self.num_classes = num_classes
        self.source_classes = tuple(source_classes)
        self.use_tm = use_tm
        self.tm_width = tm_width
        self.params = params

    @property
    def num_sources(self) -> int:
        return len(self.source_classes)

    def architecture(self) -> dict:
        """JSON-serialisable description sufficient to rebuild the network."""
        return {
            "trunk": self.trunk.model_dump(mode="json"),
            "num_classes": self.num_classes,
            "source_classes": list(self.source_classes),
            "use_tm": self.use_tm,
            "tm_width": self.tm_width,
        }

    def transfer_module(self, index: int) -> TransferModule:
        return TransferModule(
            tuple(
                self.params[f"tm{index}.bottleneck{b}.weight"]
                for b in range(len(self.trunk.blocks))
            )
        )

    def forward(self, x: Tensor) -> NetworkOutput:
        """One trunk pass shared by the primary and all auxiliary heads.

        Clip inputs `[B,C,D,H,W]` are folded to `[B,C*D,H,W]` first.
        """
        x = _fold_frames(x)
        if x.ndim != 4 or x.shape[1:] != self.trunk.input_shape:
            raise ShapeError(
                f"input shape {x.shape[1:]} does not match trunk input "
                f"{self.trunk.input_shape}"
            )
        p = self.params
        h = x
        features = []
        for i, block in enumerate(self.trunk.blocks):
            h = ops.conv2d(
                h,
                p[f"trunk.block{i}.weight"],
                block.stride,
                block.pad,
                bias=p[f"trunk.block{i}.bias"],
            )
            if block.relu:
                h = ops.relu(h)
            features.append(h)
        pooled = ops.global_avgpool(h)
        primary = ops.linear(pooled, p["primary.weight"], p["primary.bias"])
        aux = []
        for m in range(self.num_sources):
            head_input = (
                tm_forward(self.transfer_module(m), features) if self.use_tm else pooled
            )
            aux.append(ops.linear(head_input, p[f"aux{m}.weight"], p[f"aux{m}.bias"]))
        return NetworkOutput(primary, tuple(aux), tuple(features))

    def forward_aux(self, x: Tensor) -> tuple[Tensor, ...]:
        """Auxiliary logits only; an error for a network without sources."""
        if not self.num_sources:
            raise ShapeError("network has no auxiliary heads")
        return self.forward(x).aux_logits

    def frozen(self) -> "TargetNetwork":
        """A copy whose parameters never require grad."""
        params = {
            name: Tensor(t.data, requires_grad=False, name=name)
            for name, t in self.params.items()
        }
        return TargetNetwork(
            self.trunk,
            self.num_classes,
            self.source_classes,
            self.use_tm,
            self.tm_width,
            params,
        )

    def checksum(self) -> str:
        return parameter_checksum(self.params)


def _fold_frames(x: Tensor) -> Tensor:
    if x.ndim != 5:
        return x
    batch, channels, depth, height, width = x.shape
    return ops.reshape(x, (batch, channels * depth, height, width))


def parameter_checksum(params: dict[str, Tensor]) -> str:
    """sha256 over parameter names, shapes and little-endian float64 bytes."""
    digest = hashlib.sha256()
    for name, tensor in params.items():
        digest.update(name.encode())
        digest.update(repr(tensor.shape).encode())
        digest.update(tensor.data.astype("<f8").tobytes())
    return digest.hexdigest()


def _he_normal(seed: int, name: str, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    # One stream per parameter: initial values do not depend on which other
    # parameters exist.
    rng = np.random.default_rng([seed, zlib.crc32(name.encode())])
    return rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)


def build_target(
    trunk: TrunkSpec,
    k_target: int,
    source_classes: Sequence[int] = (),
    use_tm: bool = False,
    seed: int = 0,
    tm_width: int | None = None,
) -> TargetNetwork:
    """Builds a target network with He fan-in weights and zero biases.

    Args:
        trunk: Trunk architecture.
        k_target: Primary head width (>= 2).
        source_classes: Auxiliary head widths, one per source (each >= 2).
        use_tm: Feed auxiliary heads through a transfer module.
        seed: Initialisation seed; equal seeds give bitwise-equal parameters.
        tm_width: Transfer module width; defaults to the trunk feature width.
    """
    if k_target < 2:
        raise ShapeError(f"k_target must be at least 2, got {k_target}")
    if any(k < 2 for k in source_classes):
        raise ShapeError(f"source class counts must be at least 2, got {source_classes}")
    tm_width = trunk.feature_width if tm_width is None else tm_width
    if tm_width < 1:
        raise ShapeError(f"tm_width must be positive, got {tm_width}")

    params: dict[str, Tensor] = {}

    def weight(name: str, shape: tuple[int, ...], fan_in: int) -> None:
        params[name] = Tensor(
            _he_normal(seed, name, shape, fan_in), requires_grad=True, name=name
        )

    def zeros(name: str, size: int) -> None:
        params[name] = Tensor(np.zeros(size), requires_grad=True, name=name)

    channels = trunk.input_shape[0]
    block_channels = []
    for i, block in enumerate(trunk.blocks):
        weight(
            f"trunk.block{i}.weight",
            (block.out_channels, channels, block.kernel, block.kernel),
            channels * block.kernel * block.kernel,
        )
        zeros(f"trunk.block{i}.bias", block.out_channels)
        channels = block.out_channels
        block_channels.append(channels)

    feature = trunk.feature_width
    weight("primary.weight", (feature, k_target), feature)
    zeros("primary.bias", k_target)

    head_width = tm_width if use_tm else feature
    for m, k_source in enumerate(source_classes):
        if use_tm:
            for b, c in enumerate(block_channels):
                weight(f"tm{m}.bottleneck{b}.weight", (tm_width, c, 1, 1), c)
        weight(f"aux{m}.weight", (head_width, k_source), head_width)
        zeros(f"aux{m}.bias", k_source)

    logger.debug(
        "built target network: %d parameter tensors, %d sources, use_tm=%s",
        len(params),
        len(source_classes),
        use_tm,
    )
    return TargetNetwork(trunk, k_target, source_classes, use_tm, tm_width, params)
