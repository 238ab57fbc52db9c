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

"""Primary and auxiliary losses and their combination into the total loss.

The total objective for M frozen sources is

    loss = primary + alpha * (aux_1 + ... + aux_M)

where each auxiliary term makes an auxiliary head predict a source
network's output. All losses are means over the batch.
"""

import enum
import logging
from typing import TYPE_CHECKING, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from sskt.autodiff import ops
from sskt.autodiff.ops import stable_log_softmax
from sskt.autodiff.tensor import Function, Tensor, as_array
from sskt.errors import ShapeError

if TYPE_CHECKING:
    from sskt.source import SourceInference

logger = logging.getLogger(__name__)

_ROW_SUM_TOLERANCE = 1e-6


class PrimaryLossKind(str, enum.Enum):
    CE = "ce"
    BCE = "bce"


class AuxLossKind(str, enum.Enum):
    CE_SOFT = "ce_soft"
    KD = "kd"


class AuxSpec(BaseModel):
    """Auxiliary loss for one source."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: AuxLossKind = AuxLossKind.CE_SOFT
    temperature: float = Field(default=1.0, gt=0)


class LossPlan(BaseModel):
    """How the primary and auxiliary losses are combined.

    Attributes:
        alpha: Balance parameter multiplying the summed auxiliary losses.
        primary_kind: CE for single-label targets, BCE for multi-label ones.
        aux_specs: One entry per source, in source order. Empty means plain
          supervised training.
        harden_aux_labels: Use the argmax of the source's soft label as a
          one-hot target for CE auxiliary losses.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    alpha: float = Field(default=1.0, ge=0)
    primary_kind: PrimaryLossKind = PrimaryLossKind.CE
    aux_specs: tuple[AuxSpec, ...] = ()
    harden_aux_labels: bool = False

    @property
    def num_sources(self) -> int:
        return len(self.aux_specs)


def _check_logits(name: str, logits: Tensor, target: np.ndarray) -> None:
    if logits.ndim != 2:
        raise ShapeError(f"{name}: logits must be [B,K], got {logits.shape}")
    if target.shape != logits.shape:
        raise ShapeError(
            f"{name}: target shape {target.shape} != logits shape {logits.shape}"
        )


class _SoftCrossEntropy(Function):
    def forward(self, logits, *, target, temperature):
        self.temperature = temperature
        self.target = target
        log_probs = stable_log_softmax(logits, temperature)
        self.probs = np.exp(log_probs)
        return np.asarray(-(target * log_probs).sum() / logits.shape[0])

    def backward(self, grad):
        batch = self.target.shape[0]
        mass = self.target.sum(axis=1, keepdims=True)
        d = (self.probs * mass - self.target) / (self.temperature * batch)
        return (d * grad,)


class _KLDivergence(Function):
    def forward(self, logits, *, source_logits, temperature):
        self.temperature = temperature
        log_p_s = stable_log_softmax(source_logits, temperature)
        log_p_t = stable_log_softmax(logits, temperature)
        self.p_s = np.exp(log_p_s)
        self.p_t = np.exp(log_p_t)
        return np.asarray((self.p_s * (log_p_s - log_p_t)).sum() / logits.shape[0])

    def backward(self, grad):
        batch = self.p_s.shape[0]
        return ((self.p_t - self.p_s) / (self.temperature * batch) * grad,)


class _BinaryCrossEntropy(Function):
    def forward(self, logits, *, target):
        self.target = target
        self.sigmoid = np.where(
            logits >= 0,
            1.0 / (1.0 + np.exp(-np.abs(logits))),
            np.exp(-np.abs(logits)) / (1.0 + np.exp(-np.abs(logits))),
        )
        per_entry = (
            np.maximum(logits, 0.0)
            - logits * target
            + np.log1p(np.exp(-np.abs(logits)))
        )
        return np.asarray(per_entry.mean())

    def backward(self, grad):
        return ((self.sigmoid - self.target) / self.target.size * grad,)


def ce_loss(logits: Tensor, target: Tensor | np.ndarray, temperature: float = 1.0) -> Tensor:
    """Cross-entropy against one-hot labels.

    Raises:
        ValueError: If a target row is not one-hot or `temperature <= 0`.
    """
    labels = as_array(target)
    _check_logits("ce_loss", logits, labels)
    if not (np.isin(labels, (0.0, 1.0)).all() and (labels.sum(axis=1) == 1).all()):
        raise ValueError("ce_loss target rows must be one-hot")
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return _SoftCrossEntropy.apply(logits, target=labels, temperature=float(temperature))


def ce_soft_loss(
    logits: Tensor, soft_target: Tensor | np.ndarray, temperature: float = 1.0
) -> Tensor:
    """Cross-entropy against a probability vector; the target gets no gradient.

    The temperature softens the target-network logits only.

    Raises:
        ValueError: If a target row leaves [0, 1] or does not sum to 1.
    """
    target = as_array(soft_target)
    _check_logits("ce_soft_loss", logits, target)
    if (target < 0).any() or (target > 1).any():
        raise ValueError("ce_soft_loss target entries must lie in [0, 1]")
    if not np.allclose(target.sum(axis=1), 1.0, rtol=0.0, atol=_ROW_SUM_TOLERANCE):
        raise ValueError("ce_soft_loss target rows must sum to 1")
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return _SoftCrossEntropy.apply(logits, target=target, temperature=float(temperature))


def kd_loss(
    source_logits: Tensor | np.ndarray, target_logits: Tensor, temperature: float = 1.0
) -> Tensor:
    """KL(p_s || p_t) between tempered source and target distributions.

    The source side is read as constants, so it never receives gradient. No
    T**2 factor is applied.
    """
    source = as_array(source_logits)
    _check_logits("kd_loss", target_logits, source)
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return _KLDivergence.apply(
        target_logits, source_logits=source, temperature=float(temperature)
    )


def bce_loss(logits: Tensor, multi_hot: Tensor | np.ndarray) -> Tensor:
    """Binary cross-entropy averaged over batch and classes.

    Uses max(z, 0) - z*y + log(1 + exp(-|z|)) so large logits stay finite.
    """
    target = as_array(multi_hot)
    _check_logits("bce_loss", logits, target)
    if not np.isin(target, (0.0, 1.0)).all():
        raise ValueError("bce_loss targets must be 0 or 1")
    return _BinaryCrossEntropy.apply(logits, target=target)


def total_loss(primary: Tensor, aux: Sequence[Tensor], alpha: float) -> Tensor:
    """Returns `primary + alpha * sum(aux)`.

    With no auxiliary terms or `alpha == 0` the primary loss is returned
    unchanged, so the auxiliary branch takes no part in the backward pass.
    """
    if alpha < 0:
        raise ValueError(f"alpha must be non-negative, got {alpha}")
    if not aux or alpha == 0:
        return primary
    summed = aux[0]
    for term in aux[1:]:
        summed = ops.add(summed, term)
    return ops.add(primary, ops.scale(summed, alpha))


def one_hot(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Integer labels `[B]` to a one-hot matrix `[B,K]`."""
    labels = np.asarray(labels, dtype=np.int64)
    out = np.zeros((labels.shape[0], num_classes))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out


def primary_loss(kind: PrimaryLossKind, logits: Tensor, labels: np.ndarray) -> Tensor:
    """CE against integer labels `[B]` or BCE against multi-hot labels `[B,K]`."""
    if kind is PrimaryLossKind.BCE:
        return bce_loss(logits, labels)
    return ce_loss(logits, one_hot(labels, logits.shape[1]))


def auxiliary_loss(
    spec: AuxSpec,
    logits: Tensor,
    inference: "SourceInference",
    harden: bool = False,
) -> Tensor:
    """The auxiliary loss of one head against its source's output.

    KD softens both sides with the source's own T_s; CE_soft softens the
    target logits with the spec's temperature.
    """
    if spec.kind is AuxLossKind.KD:
        return kd_loss(inference.logits, logits, inference.temperature)
    target = inference.soft_label.data
    if harden:
        target = one_hot(target.argmax(axis=1), target.shape[1])
    return ce_soft_loss(logits, target, spec.temperature)
