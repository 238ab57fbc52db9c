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
from pydantic import ValidationError

from sskt.data.binary import BinaryDataSpec, read_binary_records
from sskt.data.dataset import Dataset
from sskt.data.synthetic import SyntheticTaskPair, generate, task_directions
from sskt.errors import ShapeError

SPLITS = ("source_train", "source_test", "target_train", "target_test")


def test_generation_is_a_pure_function_of_the_spec(toy_pair):
    first, second = generate(toy_pair), generate(toy_pair)
    for split in SPLITS:
        a, b = getattr(first, split), getattr(second, split)
        assert a.inputs.tobytes() == b.inputs.tobytes()
        assert a.labels.tobytes() == b.labels.tobytes()


def test_full_overlap_shares_every_class_direction():
    pair = SyntheticTaskPair(k_target=4, k_source=4, overlap=1.0, noise=0.0)
    w_target, w_source = task_directions(pair)
    assert w_target.tobytes() == w_source.tobytes()
    latents = np.random.default_rng(0).standard_normal((100, pair.n_latent))
    np.testing.assert_array_equal(
        (latents @ w_target.T).argmax(axis=1), (latents @ w_source.T).argmax(axis=1)
    )


def test_overlap_sets_the_number_of_shared_directions():
    pair = SyntheticTaskPair(k_target=4, k_source=4, overlap=0.5)
    w_target, w_source = task_directions(pair)
    np.testing.assert_array_equal(w_target[:2], w_source[:2])
    assert not np.allclose(w_target[2:], w_source[2:])
    np.testing.assert_allclose(np.linalg.norm(w_source, axis=1), 1.0)


def test_labels_are_roughly_balanced():
    pair = SyntheticTaskPair(k_target=4, n_train=800, n_test=10, seed=1)
    counts = np.bincount(generate(pair).target_train.labels, minlength=4)
    uniform = 800 / 4
    assert (counts >= 0.5 * uniform).all() and (counts <= 2 * uniform).all()


def test_split_sizes_and_shapes():
    pair = SyntheticTaskPair(
        image_shape=(2, 6, 6), clip_depth=5, n_train=20, n_source_train=30, n_test=10
    )
    data = generate(pair)
    assert data.source_train.inputs.shape == (30, 2, 6, 6)
    assert data.source_test.inputs.shape == (10, 2, 6, 6)
    assert data.target_train.inputs.shape == (20, 2, 5, 6, 6)
    assert pair.target_input_shape == (10, 6, 6)


def test_splits_draw_different_samples(toy_data):
    assert not np.array_equal(
        toy_data.source_train.inputs[0], toy_data.target_train.inputs[0]
    )


def test_multi_label_targets_are_multi_hot():
    pair = SyntheticTaskPair(target_kind="multi", n_train=50, n_test=10)
    data = generate(pair)
    assert data.target_train.labels.shape == (50, 4)
    assert set(np.unique(data.target_train.labels)) <= {0.0, 1.0}
    assert data.source_train.labels.ndim == 1


def test_degenerate_specs_are_rejected():
    with pytest.raises(ValidationError):
        SyntheticTaskPair(k_target=4, n_train=4)
    with pytest.raises(ValidationError):
        SyntheticTaskPair(k_source=10, n_source_train=10)
    with pytest.raises(ValidationError):
        SyntheticTaskPair(overlap=1.5)


def test_dataset_save_and_load(toy_data, tmp_path):
    toy_data.target_train.save(tmp_path / "target_train.npz")
    loaded = Dataset.load(tmp_path / "target_train.npz")
    assert loaded.inputs.tobytes() == toy_data.target_train.inputs.tobytes()
    assert np.array_equal(loaded.labels, toy_data.target_train.labels)
    assert loaded.num_classes == toy_data.target_train.num_classes


def write_records(path, labels, pixels):
    records = np.concatenate([labels, pixels.reshape(len(pixels), -1)], axis=1)
    records.astype(np.uint8).tofile(path)


def test_binary_records_with_one_label_byte(tmp_path, rng):
    pixels = rng.integers(0, 256, size=(5, 3, 4, 4))
    labels = np.array([[0], [1], [2], [1], [0]])
    write_records(tmp_path / "train.bin", labels, pixels)
    data = read_binary_records(tmp_path / "train.bin", 3, image_shape=(3, 4, 4))
    np.testing.assert_array_equal(data.labels, labels[:, 0])
    np.testing.assert_allclose(data.inputs, pixels / 255.0)


def test_binary_records_with_two_label_bytes(tmp_path, rng):
    pixels = rng.integers(0, 256, size=(3, 1, 2, 2))
    labels = np.array([[0, 7], [1, 8], [1, 9]])
    write_records(tmp_path / "train.bin", labels, pixels)
    fine = read_binary_records(tmp_path / "train.bin", 10, (1, 2, 2), label_bytes=2)
    coarse = read_binary_records(
        tmp_path / "train.bin", 2, (1, 2, 2), label_bytes=2, label_index=0
    )
    np.testing.assert_array_equal(fine.labels, [7, 8, 9])
    np.testing.assert_array_equal(coarse.labels, [0, 1, 1])


def test_binary_records_must_be_whole(tmp_path):
    (tmp_path / "bad.bin").write_bytes(bytes(11))
    with pytest.raises(ShapeError):
        read_binary_records(tmp_path / "bad.bin", 2, (1, 2, 2))


def test_binary_data_spec(tmp_path, rng):
    write_records(tmp_path / "a.bin", np.array([[1], [0]]), rng.integers(0, 256, (2, 1, 2, 2)))
    spec = BinaryDataSpec(
        train_path=str(tmp_path / "a.bin"),
        test_path=str(tmp_path / "a.bin"),
        num_classes=2,
        image_shape=(1, 2, 2),
    )
    assert len(spec.read("test")) == 2
    with pytest.raises(ValidationError):
        BinaryDataSpec(train_path="a", test_path="b", num_classes=2, label_index=1)
