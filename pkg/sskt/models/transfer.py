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

"""Transfer module: per-block bottlenecks summed into one auxiliary feature.

Each trunk block's feature map goes through a 1x1 convolution to a common
width and is average pooled to a vector; the vectors are summed. The
bottleneck weights are part of the target network's parameters.
"""

import dataclasses
from typing import Sequence

from sskt.autodiff import ops
from sskt.autodiff.tensor import Tensor
from sskt.errors import ShapeError


@dataclasses.dataclass(frozen=True)
class TransferModule:
    """Bottleneck kernels `[W_tm, C_b, 1, 1]`, one per trunk block."""

    bottlenecks: tuple[Tensor, ...]

    def __post_init__(self) -> None:
        if not self.bottlenecks:
            raise ShapeError("a transfer module needs at least one bottleneck")
        widths = {k.shape[0] for k in self.bottlenecks}
        if len(widths) != 1:
            raise ShapeError(f"bottleneck widths differ: {sorted(widths)}")
        for kernel in self.bottlenecks:
            if kernel.ndim != 4 or kernel.shape[2:] != (1, 1):
                raise ShapeError(f"bottleneck must be a 1x1 kernel, got {kernel.shape}")

    @property
    def width(self) -> int:
        return self.bottlenecks[0].shape[0]


def tm_forward(tm: TransferModule, block_features: Sequence[Tensor]) -> Tensor:
    """Sums the pooled bottleneck outputs of every block: `[B, W_tm]`.

    Raises:
        ShapeError: If there is not exactly one feature map per bottleneck.
    """
    if len(block_features) != len(tm.bottlenecks):
        raise ShapeError(
            f"{len(block_features)} block features for "
            f"{len(tm.bottlenecks)} bottlenecks"
        )
    out = None
    for kernel, feature in zip(tm.bottlenecks, block_features):
        pooled = ops.global_avgpool(ops.conv2d(feature, kernel))
        out = pooled if out is None else ops.add(out, pooled)
    return out
