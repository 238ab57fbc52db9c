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

from sskt.autodiff.tensor import Tensor
from sskt.data.dataset import Dataset
from sskt.errors import ConfigError, TrainingDivergedError
from sskt.losses import AuxSpec, LossPlan
from sskt.models.network import build_target
from sskt.source import SourceTask, source_infer
from sskt.training.config import PlateauSchedule, StepSchedule, TrainConfig, recipe
from sskt.training.loop import epoch_permutation, evaluate, train
from sskt.training.optim import SGDState, sgd_step
from sskt.training.report import read_metrics_csv, write_metrics_csv
from sskt.training.schedulers import PlateauState, plateau_schedule, step_schedule


def test_sgd_step_follows_the_momentum_recurrence():
    params = {"w": Tensor([1.0], requires_grad=True)}
    state = SGDState()
    params = sgd_step(params, {"w": np.array([0.5])}, state, 0.1, 0.9, 0.1)
    assert params["w"].data[0] == pytest.approx(0.94)
    params = sgd_step(params, {"w": np.array([0.5])}, state, 0.1, 0.9, 0.1)
    # g' = 0.5 + 0.1 * 0.94, v = 0.9 * 0.6 + g'
    assert params["w"].data[0] == pytest.approx(0.94 - 0.1 * (0.54 + 0.594))
    assert params["w"].requires_grad


def test_cifar10_step_schedule_lands_on_exact_decades():
    cfg = recipe("cifar10")
    lrs = [
        step_schedule(cfg.lr, cfg.scheduler.gamma, cfg.scheduler.milestones, epoch)
        for epoch in (0, 149, 150, 250, 350)
    ]
    assert lrs == [0.1, 0.1, 0.01, 0.001, 0.0001]


def test_recipes():
    assert recipe("voc").loss_plan.primary_kind.value == "bce"
    assert isinstance(recipe("ucf101").scheduler, PlateauSchedule)
    assert recipe("hmdb51_finetune").lr == 0.01
    assert recipe("cifar10", epochs=3).epochs == 3
    with pytest.raises(ConfigError):
        recipe("mnist")


def unrolled_plateau(trace, lr, factor, patience, mode="max"):
    """Reference reduce-on-plateau written as a plain loop."""
    lrs = []
    best = None
    bad = 0
    for value in trace:
        if best is None:
            better = True
        elif mode == "max":
            better = value > best + 1e-8
        else:
            better = value < best - 1e-8
        if better:
            best, bad = value, 0
        else:
            bad += 1
        if bad == patience:
            lr, bad = lr * factor, 0
        lrs.append(lr)
    return lrs


TRACES = [
    ([0.1, 0.2, 0.3, 0.4, 0.5, 0.6], "max"),
    ([0.5, 0.5, 0.5, 0.5, 0.5, 0.5, 0.5], "max"),
    ([0.3, 0.2, 0.4, 0.4, 0.35, 0.41, 0.41, 0.41], "max"),
    ([1.0, 0.9, 0.95, 0.95, 0.8, 0.85, 0.86, 0.87, 0.9], "min"),
    ([0.2, 0.2 + 1e-9, 0.2 + 2e-9, 0.2, 0.25, 0.2, 0.2, 0.2, 0.2], "max"),
]


@pytest.mark.parametrize("trace, mode", TRACES)
def test_plateau_schedule_matches_the_unrolled_counter(trace, mode):
    state = PlateauState(lr=0.1, mode=mode)
    lrs = [plateau_schedule(state, value, 0.1, 2) for value in trace]
    expected = unrolled_plateau(trace, 0.1, 0.1, 2, mode)
    assert lrs == pytest.approx(expected, rel=1e-12)


def test_plateau_reductions_land_on_exact_decades():
    state = PlateauState(lr=0.1)
    lrs = [plateau_schedule(state, 0.5, 0.1, 1) for _ in range(4)]
    assert lrs == [0.1, 0.01, 0.001, 0.0001]


def test_step_schedule_config_rejects_unordered_milestones():
    with pytest.raises(ValueError):
        StepSchedule(milestones=(10, 5))


def test_epoch_permutation_is_a_function_of_seed_and_epoch():
    assert np.array_equal(epoch_permutation(1, 2, 10), epoch_permutation(1, 2, 10))
    assert not np.array_equal(epoch_permutation(1, 2, 50), epoch_permutation(1, 3, 50))


def config(epochs=3, alpha=1.0, aux=(), **changes):
    plan = LossPlan(alpha=alpha, aux_specs=tuple(aux))
    fields = {
        "lr": 0.05,
        "epochs": epochs,
        "batch_size": 10,
        "scheduler": StepSchedule(milestones=(2,)),
        "loss_plan": plan,
        **changes,
    }
    return TrainConfig(**fields)


@pytest.fixture
def toy_source(small_trunk, toy_pair):
    return SourceTask(build_target(small_trunk, toy_pair.k_source, seed=99), name="toy")


def shared_parameters(net):
    return {
        name: t.data.tobytes()
        for name, t in net.params.items()
        if name.startswith(("trunk.", "primary."))
    }


def test_zero_alpha_run_reproduces_the_scratch_run(small_trunk, toy_data, toy_source):
    k = toy_data.target_train.num_classes
    scratch = build_target(small_trunk, k, seed=5)
    scratch_run = train(scratch, (), toy_data.target_train, config(), toy_data.target_test)

    sskt = build_target(small_trunk, k, (toy_source.num_classes,), seed=5)
    sskt_run = train(
        sskt,
        (toy_source,),
        toy_data.target_train,
        config(alpha=0.0, aux=[AuxSpec()]),
        toy_data.target_test,
    )

    assert shared_parameters(sskt) == shared_parameters(scratch)
    for a, b in zip(scratch_run.records, sskt_run.records):
        assert (a.lr, a.loss_primary, a.eval_metric) == (b.lr, b.loss_primary, b.eval_metric)


def test_sources_are_untouched_by_a_hundred_steps(small_trunk, toy_data, toy_source):
    held_out = toy_data.target_test.inputs[:8]
    before = source_infer(toy_source, held_out).logits.data.tobytes()
    checksum = toy_source.network.checksum()
    data = toy_data.target_train
    net = build_target(small_trunk, data.num_classes, (toy_source.num_classes,), seed=0)
    # 60 samples in batches of 6 for 10 epochs.
    train(net, (toy_source,), data, config(epochs=10, batch_size=6, aux=[AuxSpec()]))
    assert toy_source.network.checksum() == checksum
    assert source_infer(toy_source, held_out).logits.data.tobytes() == before


def test_training_is_deterministic(small_trunk, toy_data, toy_source):
    def run():
        net = build_target(small_trunk, 3, (3,), use_tm=True, seed=1)
        records = train(
            net,
            (toy_source,),
            toy_data.target_train,
            config(aux=[AuxSpec(temperature=2.0)]),
        ).records
        return records, net.checksum()

    assert run() == run()


def test_training_reports_every_epoch(small_trunk, toy_data, toy_source):
    net = build_target(small_trunk, 3, (3,), seed=1)
    run = train(net, (toy_source,), toy_data.target_train, config(aux=[AuxSpec()]))
    assert [r.epoch for r in run.records] == [0, 1, 2]
    assert [r.lr for r in run.records] == [0.05, 0.05, 0.005]
    assert run.columns() == [
        "epoch", "lr", "loss_primary", "loss_aux_0", "loss_total", "eval_metric"
    ]
    for record in run.records:
        assert record.loss_total == pytest.approx(record.loss_primary + record.loss_aux[0])
        assert 0.0 <= record.eval_metric <= 1.0


def test_metrics_csv_preserves_values(small_trunk, toy_data, toy_source, tmp_path):
    net = build_target(small_trunk, 3, (3,), seed=1)
    run = train(net, (toy_source,), toy_data.target_train, config(epochs=2, aux=[AuxSpec()]))
    write_metrics_csv(run, tmp_path / "metrics.csv")
    assert read_metrics_csv(tmp_path / "metrics.csv", run.metric).records == run.records


def test_divergence_is_reported(small_trunk, toy_data):
    net = build_target(small_trunk, 3, seed=0)
    with pytest.raises(TrainingDivergedError, match="epoch"):
        train(net, (), toy_data.target_train, config(lr=1e300, momentum=0.0))


def test_source_arity_mismatches_are_config_errors(small_trunk, toy_data, toy_source):
    net = build_target(small_trunk, 3, seed=0)
    with pytest.raises(ConfigError):
        train(net, (toy_source,), toy_data.target_train, config(aux=[AuxSpec()]))
    wide = build_target(small_trunk, 3, (7,), seed=0)
    with pytest.raises(ConfigError):
        train(wide, (toy_source,), toy_data.target_train, config(aux=[AuxSpec()]))


def test_bce_needs_multi_label_data(small_trunk, toy_data):
    net = build_target(small_trunk, 3, seed=0)
    cfg = config().model_copy(update={"loss_plan": LossPlan(primary_kind="bce")})
    with pytest.raises(ConfigError):
        train(net, (), toy_data.target_train, cfg)


def test_evaluate_supports_mean_average_precision(small_trunk, rng):
    net = build_target(small_trunk, 3, seed=0)
    labels = np.array([[1, 0, 1], [0, 1, 0], [1, 1, 0], [0, 0, 1]], dtype=float)
    data = Dataset(rng.standard_normal((4, 1, 8, 8)), labels, 3)
    value = evaluate(net, data, "map")
    assert 0.0 < value <= 1.0
