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

import numpy as np
import pytest

from sskt.autodiff import ops
from sskt.autodiff.gradcheck import finite_diff_check
from sskt.autodiff.tensor import Tape, Tensor, backward
from sskt.losses import (
    AuxLossKind,
    AuxSpec,
    auxiliary_loss,
    bce_loss,
    ce_loss,
    ce_soft_loss,
    kd_loss,
    one_hot,
    total_loss,
)
from sskt.source import SourceInference

SEEDS = range(20)


def soft_labels(rng, shape):
    return ops.stable_softmax(rng.standard_normal(shape), 1.0)


def test_kd_loss_of_identical_logits_is_zero(rng):
    logits = rng.standard_normal((6, 5))
    for temperature in (1.0, 2.0, 4.0):
        assert kd_loss(logits, Tensor(logits), temperature).item() == 0.0


def test_kd_loss_is_non_negative(rng):
    for _ in range(100):
        source = rng.standard_normal((4, 6)) * 3
        target = Tensor(rng.standard_normal((4, 6)) * 3)
        temperature = rng.uniform(0.5, 5.0)
        assert kd_loss(source, target, temperature).item() >= 0.0


def test_cross_entropy_is_kl_plus_entropy(rng):
    source = rng.standard_normal((8, 5))
    target = Tensor(rng.standard_normal((8, 5)))
    p_s = ops.stable_softmax(source, 1.0)
    entropy = -(p_s * ops.stable_log_softmax(source, 1.0)).sum() / 8
    ce = ce_soft_loss(target, p_s).item()
    kl = kd_loss(source, target).item()
    assert ce == pytest.approx(kl + entropy, abs=1e-10)


def test_soft_cross_entropy_with_one_hot_target_equals_hard_cross_entropy(rng):
    logits = Tensor(rng.standard_normal((7, 4)))
    target = one_hot(rng.integers(0, 4, size=7), 4)
    assert ce_soft_loss(logits, target).data.tobytes() == ce_loss(logits, target).data.tobytes()


def test_total_loss_with_one_source_matches_the_single_source_formula(rng):
    primary = ce_loss(Tensor(rng.standard_normal((3, 4))), one_hot(np.array([0, 1, 2]), 4))
    aux = ce_soft_loss(Tensor(rng.standard_normal((3, 5))), soft_labels(rng, (3, 5)))
    expected = ops.add(primary, ops.scale(aux, 0.7))
    assert total_loss(primary, [aux], 0.7).data.tobytes() == expected.data.tobytes()


def test_total_loss_sums_auxiliary_terms(rng):
    primary = Tensor(1.0)
    aux = [Tensor(0.5), Tensor(0.25)]
    assert total_loss(primary, aux, 2.0).item() == 2.5


def test_total_loss_without_weight_is_the_primary_loss():
    primary = Tensor(1.0)
    assert total_loss(primary, [Tensor(3.0)], 0.0) is primary
    assert total_loss(primary, [], 1.0) is primary
    with pytest.raises(ValueError):
        total_loss(primary, [], -1.0)


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("temperature", [1.0, 3.0])
def test_loss_gradients(seed, temperature):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((5, 4))
    hard = one_hot(rng.integers(0, 4, size=5), 4)
    soft = soft_labels(rng, (5, 4))
    source = rng.standard_normal((5, 4))
    multi_hot = rng.integers(0, 2, size=(5, 4)).astype(float)
    checks = [
        lambda t: ce_loss(t, hard, temperature),
        lambda t: ce_soft_loss(t, soft, temperature),
        lambda t: kd_loss(source, t, temperature),
        lambda t: bce_loss(t, multi_hot),
    ]
    for f in checks:
        assert finite_diff_check(f, logits) < 1e-5


def test_kd_loss_sends_no_gradient_to_the_source(rng):
    source = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    target = Tensor(rng.standard_normal((2, 3)), requires_grad=True)
    with Tape() as tape:
        loss = kd_loss(source, target, 2.0)
    grads = backward(loss, tape)
    assert target in grads
    assert source not in grads


def test_bce_loss_is_finite_for_large_logits():
    loss = bce_loss(Tensor([[1000.0, -1000.0]]), [[1.0, 0.0]])
    assert loss.item() == pytest.approx(0.0, abs=1e-300)
    loss = bce_loss(Tensor([[-1000.0]]), [[1.0]])
    assert loss.item() == pytest.approx(1000.0)


def test_ce_loss_rejects_non_one_hot_targets():
    with pytest.raises(ValueError):
        ce_loss(Tensor(np.zeros((1, 3))), [[0.5, 0.5, 0.0]])


def test_ce_soft_loss_rejects_rows_not_summing_to_one():
    with pytest.raises(ValueError):
        ce_soft_loss(Tensor(np.zeros((1, 3))), [[0.5, 0.2, 0.2]])


@pytest.mark.parametrize("temperature", [0.0, -1.0])
def test_losses_reject_non_positive_temperature(temperature):
    logits = Tensor(np.zeros((1, 2)))
    with pytest.raises(ValueError):
        ce_soft_loss(logits, [[0.5, 0.5]], temperature)
    with pytest.raises(ValueError):
        kd_loss(np.zeros((1, 2)), logits, temperature)
    with pytest.raises(ValueError):
        AuxSpec(kind=AuxLossKind.KD, temperature=temperature)


def test_auxiliary_loss_can_harden_soft_labels(rng):
    source_logits = rng.standard_normal((4, 3))
    inference = SourceInference(
        Tensor(source_logits), Tensor(ops.stable_softmax(source_logits, 1.0)), 2.0
    )
    logits = Tensor(rng.standard_normal((4, 3)))
    hardened = auxiliary_loss(AuxSpec(), logits, inference, harden=True)
    expected = ce_loss(logits, one_hot(source_logits.argmax(axis=1), 3))
    assert hardened.item() == expected.item()
    kd = auxiliary_loss(AuxSpec(kind=AuxLossKind.KD), logits, inference)
    assert kd.item() == kd_loss(source_logits, logits, 2.0).item()


def test_ce_loss_closed_form():
    loss = ce_loss(Tensor([[1.0, 0.0]]), [[1.0, 0.0]]).item()
    assert loss == pytest.approx(np.log1p(np.exp(-1.0)), abs=1e-12)
    assert loss == pytest.approx(0.3133, abs=1e-4)


@pytest.mark.parametrize("temperature", [0.5, 1.0, 3.0])
def test_constant_logits_give_log_k(temperature, rng):
    logits = Tensor(np.full((4, 5), 2.5))
    target = one_hot(rng.integers(0, 5, size=4), 5)
    loss = ce_loss(logits, target, temperature).item()
    assert loss == pytest.approx(np.log(5), abs=1e-12)
    uniform = np.full((4, 5), 0.2)
    assert ce_soft_loss(logits, uniform, temperature).item() == pytest.approx(
        np.log(5), abs=1e-12
    )


def test_softening_lowers_the_argmax_probability():
    logits = Tensor([[2.0, 0.0]])
    target = [[1.0, 0.0]]
    assert ce_loss(logits, target, 2.0).item() > ce_loss(logits, target, 1.0).item()


@pytest.mark.parametrize("seed", SEEDS)
def test_ce_loss_matches_negative_log_likelihood(seed):
    rng = np.random.default_rng(seed)
    logits = rng.standard_normal((7, 4)) * 2
    labels = rng.integers(0, 4, size=7)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    nll = -log_probs[np.arange(7), labels].mean()
    assert ce_loss(Tensor(logits), one_hot(labels, 4)).item() == pytest.approx(nll, abs=1e-12)


def test_bce_loss_hand_cases():
    assert bce_loss(Tensor(np.zeros((2, 3))), np.ones((2, 3))).item() == pytest.approx(
        np.log(2), abs=1e-12
    )
    assert bce_loss(Tensor([[20.0]]), [[1.0]]).item() < 1e-8


@pytest.mark.parametrize("temperature", [1.0, 2.5])
def test_soft_cross_entropy_at_its_own_distribution_is_the_entropy(temperature, rng):
    logits = rng.standard_normal((5, 6))
    p = ops.stable_softmax(logits, temperature)
    entropy = -(p * np.log(p)).sum() / 5
    loss = ce_soft_loss(Tensor(logits), p, temperature).item()
    assert loss == pytest.approx(entropy, abs=1e-12)
