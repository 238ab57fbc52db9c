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

"""Deterministic synthetic source/target task pairs.

Every sample is a sum of smooth basis patterns weighted by a latent vector
`z`, plus Gaussian noise. The target label is `argmax(W_t z)` and the source
label `argmax(W_s z)`; the first `floor(overlap * k_source)` rows of `W_s`
are rows of `W_t`, so `overlap` sets how much the source task says about the
target task. Each sample draws from its own Philox counter, so a dataset is
a pure function of the spec.
"""

import dataclasses
import logging
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from sskt.data.dataset import Dataset

logger = logging.getLogger(__name__)

_STRUCTURE_STREAM = 0
_SAMPLE_STREAM = 1


class SyntheticTaskPair(BaseModel):
    """Parameters of a synthetic task pair.

    Attributes:
        n_latent: Dimension of the latent vector z.
        k_target: Number of target classes.
        k_source: Number of source classes.
        overlap: Fraction of source class directions shared with the target.
        image_shape: `(C, H, W)` of a frame.
        clip_depth: Frames per target clip; 0 makes the target task 2D.
        noise: Standard deviation of the additive pixel noise.
        n_train: Target training samples.
        n_test: Test samples for each task.
        n_source_train: Source training samples; defaults to `n_train`.
        target_kind: "single" labels by argmax, "multi" marks every class
          with a positive score.
        seed: Seed of the basis, class directions and samples.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["synthetic"] = "synthetic"
    n_latent: int = Field(default=8, ge=1)
    k_target: int = Field(default=4, ge=2)
    k_source: int = Field(default=4, ge=2)
    overlap: float = Field(default=1.0, ge=0, le=1)
    image_shape: tuple[int, int, int] = (1, 8, 8)
    clip_depth: int = Field(default=0, ge=0)
    noise: float = Field(default=0.1, ge=0)
    n_train: int = Field(default=400, ge=1)
    n_test: int = Field(default=200, ge=1)
    n_source_train: int | None = Field(default=None, ge=1)
    target_kind: Literal["single", "multi"] = "single"
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_sizes(self) -> "SyntheticTaskPair":
        if min(self.image_shape) < 1:
            raise ValueError(f"image_shape must be positive, got {self.image_shape}")
        if self.k_target >= self.n_train:
            raise ValueError(
                f"k_target ({self.k_target}) must be below n_train ({self.n_train})"
            )
        if self.k_source >= self.source_train_size:
            raise ValueError(
                f"k_source ({self.k_source}) must be below the source training "
                f"size ({self.source_train_size})"
            )
        return self

    @property
    def source_train_size(self) -> int:
        return self.n_train if self.n_source_train is None else self.n_source_train

    @property
    def target_sample_shape(self) -> tuple[int, ...]:
        channels, height, width = self.image_shape
        if self.clip_depth:
            return (channels, self.clip_depth, height, width)
        return self.image_shape

    @property
    def target_input_shape(self) -> tuple[int, int, int]:
        """Trunk input shape for the target: clip frames are stacked as channels."""
        channels, height, width = self.image_shape
        return (channels * max(self.clip_depth, 1), height, width)


@dataclasses.dataclass(frozen=True)
class TaskPairData:
    source_train: Dataset
    source_test: Dataset
    target_train: Dataset
    target_test: Dataset


def _generator(seed: int, stream: int, counter: int = 0) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=[seed, stream], counter=[0, counter, 0, 0])
    )


def _basis(pair: SyntheticTaskPair, rng: np.random.Generator) -> np.ndarray:
    """Unit-RMS cosine-product patterns `[n_latent, C, D, H, W]` (D = 1 for images)."""
    channels, height, width = pair.image_shape
    depth = max(pair.clip_depth, 1)
    hh = (np.arange(height) + 0.5) / height
    ww = (np.arange(width) + 0.5) / width
    dd = (np.arange(depth) + 0.5) / depth
    patterns = []
    for _ in range(pair.n_latent):
        fy, fx, ft = rng.integers(0, 3, size=3)
        py, px, pt = rng.uniform(0.0, 2 * np.pi, size=3)
        gains = rng.standard_normal(channels)
        rows = np.cos(np.pi * fy * hh + py)
        cols = np.cos(np.pi * fx * ww + px)
        frames = 1.0 + 0.5 * np.cos(np.pi * ft * dd + pt)
        pattern = (
            gains[:, None, None, None]
            * frames[None, :, None, None]
            * rows[None, None, :, None]
            * cols[None, None, None, :]
        )
        rms = np.sqrt(np.mean(pattern**2))
        patterns.append(pattern / rms if rms > 0 else pattern)
    return np.stack(patterns)


def _class_directions(
    rng: np.random.Generator, k: int, n: int, shared: np.ndarray | None = None
) -> np.ndarray:
    """`k` unit rows in R^n, orthonormal when k <= n; `shared` rows come first."""
    draws = rng.standard_normal((k, n))
    num_shared = 0 if shared is None else shared.shape[0]
    if num_shared:
        draws[:num_shared] = shared
    if k <= n:
        q, r = np.linalg.qr(draws.T)
        rows = (q * np.sign(np.diag(r))).T
    else:
        rows = draws / np.linalg.norm(draws, axis=1, keepdims=True)
    if num_shared:
        rows[:num_shared] = shared
    return rows


def _samples(
    pair: SyntheticTaskPair,
    basis: np.ndarray,
    start: int,
    count: int,
    clip: bool,
) -> tuple[np.ndarray, np.ndarray]:
    latents = np.empty((count, pair.n_latent))
    images = []
    for i in range(count):
        rng = _generator(pair.seed, _SAMPLE_STREAM, start + i)
        latents[i] = rng.standard_normal(pair.n_latent)
        sample = np.tensordot(latents[i], basis, axes=1)
        sample = sample + pair.noise * rng.standard_normal(sample.shape)
        # [C, D, H, W]; images keep only the centre frame.
        images.append(sample if clip else sample[:, sample.shape[1] // 2])
    return np.stack(images), latents


def _labels(
    weights: np.ndarray, latents: np.ndarray, multi: bool
) -> np.ndarray:
    scores = latents @ weights.T
    if multi:
        return (scores > 0).astype(np.float64)
    return scores.argmax(axis=1)


def _structure(pair: SyntheticTaskPair) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    structure = _generator(pair.seed, _STRUCTURE_STREAM)
    basis = _basis(pair, structure)
    w_target = _class_directions(structure, pair.k_target, pair.n_latent)
    num_shared = min(int(np.floor(pair.overlap * pair.k_source)), pair.k_target)
    w_source = _class_directions(
        structure, pair.k_source, pair.n_latent, w_target[:num_shared]
    )
    return basis, w_target, w_source


def task_directions(pair: SyntheticTaskPair) -> tuple[np.ndarray, np.ndarray]:
    """The class direction matrices `(W_t [k_target, n_latent], W_s [k_source, n_latent])`."""
    _, w_target, w_source = _structure(pair)
    return w_target, w_source


def generate(pair: SyntheticTaskPair) -> TaskPairData:
    """Builds the four splits of a task pair from disjoint sample-index ranges."""
    basis, w_target, w_source = _structure(pair)
    multi = pair.target_kind == "multi"

    ranges = {}
    start = 0
    for split, count in (
        ("source_train", pair.source_train_size),
        ("source_test", pair.n_test),
        ("target_train", pair.n_train),
        ("target_test", pair.n_test),
    ):
        ranges[split] = (start, count)
        start += count

    splits = {}
    for split, (offset, count) in ranges.items():
        is_target = split.startswith("target")
        inputs, latents = _samples(
            pair, basis, offset, count, clip=is_target and pair.clip_depth > 0
        )
        if is_target:
            labels = _labels(w_target, latents, multi)
            splits[split] = Dataset(inputs, labels, pair.k_target)
        else:
            labels = _labels(w_source, latents, False)
            splits[split] = Dataset(inputs, labels, pair.k_source)
    logger.debug("generated task pair with %d samples", start)
    return TaskPairData(**splits)
