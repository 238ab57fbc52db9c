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

"""Reader for the tiny-image binary record format.

Each record is `label_bytes` label bytes followed by the image as `C*H*W`
unsigned bytes in channel-major order. Files with two label bytes carry a
coarse and a fine label; `label_index` picks one.
"""

import logging
from pathlib import Path
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sskt.data.dataset import Dataset
from sskt.errors import ShapeError

logger = logging.getLogger(__name__)


def read_binary_records(
    path: str | Path,
    num_classes: int,
    image_shape: tuple[int, int, int] = (3, 32, 32),
    label_bytes: int = 1,
    label_index: int | None = None,
) -> Dataset:
    """Reads a binary record file into a Dataset with pixels scaled to [0, 1].

    Args:
        path: The record file.
        num_classes: Number of classes of the selected label.
        image_shape: `(C, H, W)` of every record.
        label_bytes: Label bytes per record, 1 or 2.
        label_index: Which label byte to use; defaults to the last one.

    Raises:
        ShapeError: If the file size is not a whole number of records.
        ValueError: On a bad label layout or an out-of-range label.
    """
    if label_bytes not in (1, 2):
        raise ValueError(f"label_bytes must be 1 or 2, got {label_bytes}")
    index = label_bytes - 1 if label_index is None else label_index
    if not 0 <= index < label_bytes:
        raise ValueError(f"label_index {index} out of range for {label_bytes} label bytes")
    raw = np.fromfile(path, dtype=np.uint8)
    record_size = label_bytes + int(np.prod(image_shape))
    if raw.size == 0 or raw.size % record_size:
        raise ShapeError(
            f"{path}: {raw.size} bytes is not a multiple of the record size {record_size}"
        )
    records = raw.reshape(-1, record_size)
    labels = records[:, index].astype(np.int64)
    if labels.max() >= num_classes:
        raise ValueError(
            f"{path}: label {labels.max()} out of range for {num_classes} classes"
        )
    inputs = records[:, label_bytes:].reshape(-1, *image_shape) / 255.0
    logger.info("read %d records from %s", len(records), path)
    return Dataset(inputs, labels, num_classes)


class BinaryDataSpec(BaseModel):
    """Train/test record files used for both the target task and source pretraining."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["binary"] = "binary"
    train_path: str
    test_path: str
    num_classes: int = Field(ge=2)
    image_shape: tuple[int, int, int] = (3, 32, 32)
    label_bytes: int = Field(default=1, ge=1, le=2)
    label_index: int | None = Field(default=None, ge=0)

    @model_validator(mode="after")
    def _check_label_index(self) -> "BinaryDataSpec":
        if self.label_index is not None and self.label_index >= self.label_bytes:
            raise ValueError(
                f"label_index {self.label_index} needs more than {self.label_bytes} label bytes"
            )
        return self

    @property
    def target_input_shape(self) -> tuple[int, int, int]:
        return self.image_shape

    def read(self, split: Literal["train", "test"]) -> Dataset:
        return read_binary_records(
            self.train_path if split == "train" else self.test_path,
            self.num_classes,
            self.image_shape,
            self.label_bytes,
            self.label_index,
        )
