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

"""Evaluation metrics: top-1 accuracy and mean average precision."""

import logging

import numpy as np

from sskt.autodiff.tensor import Tensor, as_array
from sskt.errors import ShapeError

logger = logging.getLogger(__name__)


def average_precision(scores: np.ndarray, labels: np.ndarray) -> float:
    """AP of one class: mean precision at the rank of every positive.

    Scores are ranked in descending order; ties keep index order.
    """
    order = np.argsort(-scores, kind="stable")
    hits = labels[order] > 0
    ranks = np.arange(1, hits.size + 1)
    precision_at_hit = np.cumsum(hits)[hits] / ranks[hits]
    return float(precision_at_hit.sum() / hits.sum())


def average_precision_per_class(
    scores: Tensor | np.ndarray, labels: Tensor | np.ndarray
) -> tuple[dict[int, float], tuple[int, ...]]:
    """Per-class AP for `scores[N,K]` against multi-hot `labels[N,K]`.

    Returns:
        The AP of every class with at least one positive, and the indices of
        the classes skipped for having none.
    """
    scores = as_array(scores)
    labels = as_array(labels)
    if scores.ndim != 2 or scores.shape != labels.shape:
        raise ShapeError(
            f"scores {scores.shape} and labels {labels.shape} must both be [N,K]"
        )
    if scores.shape[0] < 1:
        raise ValueError("mean average precision needs at least one sample")
    per_class: dict[int, float] = {}
    skipped: list[int] = []
    for k in range(scores.shape[1]):
        if not (labels[:, k] > 0).any():
            skipped.append(k)
            continue
        per_class[k] = average_precision(scores[:, k], labels[:, k])
    if skipped:
        logger.debug("skipped %d classes without positives: %s", len(skipped), skipped)
    return per_class, tuple(skipped)


def mean_average_precision(
    scores: Tensor | np.ndarray, labels: Tensor | np.ndarray
) -> float:
    """Mean over evaluated classes of the per-class average precision.

    Raises:
        ValueError: If no class has a positive label.
    """
    per_class, _ = average_precision_per_class(scores, labels)
    if not per_class:
        raise ValueError("labels are empty: no class has a positive sample")
    return float(np.mean(list(per_class.values())))


def top1_accuracy(logits: Tensor | np.ndarray, labels: np.ndarray) -> float:
    """Fraction of rows whose argmax equals the label; ties go to the first index."""
    logits = as_array(logits)
    labels = np.asarray(labels)
    if logits.shape[0] != labels.shape[0] or logits.shape[0] == 0:
        raise ShapeError(
            f"{logits.shape[0]} predictions for {labels.shape[0]} labels"
        )
    return float((logits.argmax(axis=1) == labels).mean())
