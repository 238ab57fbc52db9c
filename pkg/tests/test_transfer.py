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
"""Multi-seed end-to-end runs on the pinned image-to-image preset.

The SSKT-minus-scratch margin is recorded in `transfer_margin.json` by the
first run on a fresh checkout and asserted within 1.5 points afterwards.
"""

import json
from pathlib import Path

import numpy as np
import pytest

from sskt.tools.experiments.compare import compare
from sskt.tools.experiments.config import apply_overrides, load_config
from sskt.tools.experiments.presets import preset
from sskt.tools.experiments.runner import pretrain_source, run_experiment

SEEDS = range(5)
MARGIN_FILE = Path(__file__).with_name("transfer_margin.json")
MARGIN_TOLERANCE = 0.015


@pytest.fixture(scope="module")
def pretrained(tmp_path_factory):
    out = tmp_path_factory.mktemp("source")
    summary = pretrain_source(load_config("preset:ic_to_ic"), out)
    return out, summary


@pytest.mark.slow
def test_source_learns_the_source_task(pretrained):
    _, summary = pretrained
    # Four balanced classes: chance is 0.25.
    assert summary["test_accuracy"] > 0.7


@pytest.mark.slow
def test_low_noise_source_is_accurate(tmp_path):
    document = preset("ic_to_ic")
    document["data"]["noise"] = 0.05
    summary = pretrain_source(load_config(document), tmp_path)
    assert summary["test_accuracy"] > 0.9


def _recorded_margin(measured: float) -> float:
    if not MARGIN_FILE.exists():
        MARGIN_FILE.write_text(
            json.dumps({"preset": "ic_to_ic", "seeds": len(SEEDS), "margin": measured})
            + "\n"
        )
    return json.loads(MARGIN_FILE.read_text())["margin"]


@pytest.mark.slow
def test_soft_label_transfer_beats_scratch_on_average(pretrained, tmp_path):
    source_dir, _ = pretrained
    base = load_config("preset:ic_to_ic")
    deltas = []
    for seed in SEEDS:
        scratch = run_experiment(
            apply_overrides(base, seed=seed, out=tmp_path / f"scratch{seed}")
        )
        sskt = run_experiment(
            apply_overrides(
                base,
                seed=seed,
                out=tmp_path / f"sskt{seed}",
                sources=[str(source_dir)],
                alpha=1.0,
            )
        )
        deltas.append(sskt.run.final_metric - scratch.run.final_metric)
    result = compare(
        [tmp_path / f"{kind}{seed}" for kind in ("scratch", "sskt") for seed in SEEDS],
        tmp_path / "comparison",
    )
    assert len(result["groups"]) == 2

    margin = float(np.mean(deltas))
    standard_error = float(np.std(deltas, ddof=1)) / np.sqrt(len(deltas))
    assert margin > 0.0
    assert margin > standard_error, deltas
    assert margin == pytest.approx(_recorded_margin(margin), abs=MARGIN_TOLERANCE)
