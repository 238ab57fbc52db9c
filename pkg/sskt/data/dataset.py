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

"""In-memory labelled datasets."""

import dataclasses
from pathlib import Path

import numpy as np

from sskt.autodiff.tensor import Tensor
from sskt.errors import ShapeError


@dataclasses.dataclass(frozen=True)
class Dataset:
    """Inputs with integer labels `[N]` or multi-hot labels `[N,K]`.

    Attributes:
        inputs: `[N,C,H,W]` images or `[N,C,D,H,W]` clips.
        labels: Class indices, or a 0/1 matrix for multi-label tasks.
        num_classes: Number of classes K.
    """

    inputs: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self) -> None:
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"{self.inputs.shape[0]} inputs for {self.labels.shape[0]} labels"
            )
        if self.labels.ndim == 2 and self.labels.shape[1] != self.num_classes:
            raise ShapeError(
                f"multi-hot labels have {self.labels.shape[1]} columns, "
                f"expected {self.num_classes}"
            )

    @property
    def multi_label(self) -> bool:
        return self.labels.ndim == 2

    @property
    def sample_shape(self) -> tuple[int, ...]:
        return self.inputs.shape[1:]

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def batch(self, indices: np.ndarray) -> tuple[Tensor, np.ndarray]:
        return Tensor(self.inputs[indices]), self.labels[indices]

    def save(self, path: str | Path) -> None:
        np.savez(
            path,
            inputs=self.inputs,
            labels=self.labels,
            num_classes=np.int64(self.num_classes),
        )

    @classmethod
    def load(cls, path: str | Path) -> "Dataset":
        with np.load(path) as archive:
            return cls(
                archive["inputs"].astype(np.float64),
                archive["labels"],
                int(archive["num_classes"]),
            )
