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

"""Shared fixtures."""

import numpy as np
import pytest

from sskt.data.synthetic import SyntheticTaskPair, generate
from sskt.models.network import ConvBlockSpec, TrunkSpec
from sskt.tools.experiments.config import ExperimentConfig, load_config
from sskt.tools.experiments.presets import preset


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def small_trunk():
    return TrunkSpec(
        input_shape=(1, 8, 8),
        blocks=(
            ConvBlockSpec(out_channels=4, kernel=3, stride=1, pad=1),
            ConvBlockSpec(out_channels=6, kernel=4, stride=2, pad=1),
        ),
    )


@pytest.fixture
def toy_pair():
    return SyntheticTaskPair(
        k_target=3,
        k_source=3,
        n_train=60,
        n_source_train=60,
        n_test=30,
        seed=3,
    )


@pytest.fixture
def toy_data(toy_pair):
    return generate(toy_pair)


def tiny_document(name: str, out_dir, **data_changes) -> dict:
    """A preset shrunk to a few seconds of training."""
    document = preset(name)
    document["data"].update(
        {"n_train": 40, "n_source_train": 80, "n_test": 40, **data_changes}
    )
    for key in ("train", "source_train"):
        document[key]["epochs"] = 2
        document[key]["scheduler"]["milestones"] = [1]
    document["output_dir"] = str(out_dir)
    return document


@pytest.fixture
def tiny_config(tmp_path):
    """Factory: `tiny_config(preset_name, subdir)` -> ExperimentConfig."""

    def make(name: str, subdir: str = "run", **data_changes) -> ExperimentConfig:
        return load_config(tiny_document(name, tmp_path / subdir, **data_changes))

    return make
