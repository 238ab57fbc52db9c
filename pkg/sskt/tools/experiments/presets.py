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

"""Built-in experiment presets, one per transfer scenario.

Presets are plain config documents, validated like a config file. Each
describes a scratch run; attaching sources (`--sources`) turns it into the
matching SSKT run.
"""

import copy
from typing import Any, Dict

_TOY_DATA: Dict[str, Any] = {
    "kind": "synthetic",
    "n_latent": 8,
    "k_target": 4,
    "k_source": 4,
    "overlap": 1.0,
    "image_shape": [1, 8, 8],
    "clip_depth": 0,
    "noise": 0.1,
    "n_train": 40,
    "n_source_train": 2000,
    "n_test": 1000,
    "target_kind": "single",
    "seed": 0,
}

_BLOCKS = [
    {"out_channels": 16, "kernel": 3, "stride": 1, "pad": 1},
    {"out_channels": 32, "kernel": 4, "stride": 2, "pad": 1},
]

_TRAIN: Dict[str, Any] = {
    "lr": 0.05,
    "momentum": 0.9,
    "weight_decay": 5e-4,
    "scheduler": {"kind": "step", "gamma": 0.1, "milestones": [70]},
    "epochs": 100,
    "batch_size": 10,
    "seed": 0,
    "loss_plan": {"alpha": 1.0, "primary_kind": "ce", "aux_specs": []},
}

_SOURCE_TRAIN: Dict[str, Any] = {
    "lr": 0.05,
    "momentum": 0.9,
    "weight_decay": 5e-4,
    "scheduler": {"kind": "step", "gamma": 0.1, "milestones": [30]},
    "epochs": 40,
    "batch_size": 32,
    "seed": 0,
}


def _preset(scenario: str, **changes: Any) -> Dict[str, Any]:
    data = {**_TOY_DATA, **changes.pop("data", {})}
    channels, height, width = data["image_shape"]
    depth = max(data["clip_depth"], 1)
    train = copy.deepcopy(_TRAIN)
    train["loss_plan"].update(changes.pop("loss_plan", {}))
    return {
        "version": 1,
        "scenario": scenario,
        "data": data,
        "trunk": {"input_shape": [channels * depth, height, width], "blocks": _BLOCKS},
        "source_trunk": {"input_shape": [channels, height, width], "blocks": _BLOCKS},
        "use_tm": False,
        "train": train,
        "source_train": copy.deepcopy(_SOURCE_TRAIN),
        "sources": [],
        "source_transforms": changes.pop("source_transforms", []),
        "output_dir": f"runs/{scenario}",
        **changes,
    }


PRESETS: Dict[str, Dict[str, Any]] = {
    "ic_to_ic": _preset("ic_to_ic"),
    "ic_to_mcic": _preset(
        "ic_to_mcic",
        data={"target_kind": "multi"},
        loss_plan={"primary_kind": "bce"},
    ),
    "ic_to_ac": _preset(
        "ic_to_ac",
        data={"clip_depth": 8},
        source_transforms=[{"kind": "center_frame"}],
    ),
    "multi_source": _preset("multi_source"),
}


def preset(name: str) -> Dict[str, Any]:
    """Returns a copy of the named preset document.

    Raises:
        KeyError: For an unknown preset name.
    """
    if name not in PRESETS:
        raise KeyError(
            f"unknown preset {name!r}; choose one of {', '.join(sorted(PRESETS))}"
        )
    return copy.deepcopy(PRESETS[name])
