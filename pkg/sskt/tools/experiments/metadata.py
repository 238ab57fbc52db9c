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

"""Informational tools: experiment presets and training recipes."""

from typing import Any, Dict, List

from sskt.coordinator import mcp
from sskt.tools.experiments.presets import PRESETS
from sskt.tools.utils import model_to_dict
from sskt.training.config import RECIPES, recipe


def get_config_hints() -> str:
    """Describes the accepted forms of the `config` argument."""
    return f"""
          `config` is one of:

          1.  `preset:<name>` with a name from {", ".join(sorted(PRESETS))}.
              Use the `list_presets` tool to see the full documents.
          2.  The path of a `.json` or `.toml` config file on the server.
          3.  An inline config document, shaped like a preset document.

          Unknown keys are rejected. Every document carries `version = 1`.
          """


@mcp.tool(title="List the built-in experiment presets")
async def list_presets() -> List[Dict[str, Any]]:
    """Returns every built-in preset with its scenario and full config document."""
    return [
        {"name": name, "scenario": document["scenario"], "config": document}
        for name, document in sorted(PRESETS.items())
    ]


@mcp.tool(title="Gets an optimizer recipe of the reference experiments")
async def get_training_recipe(name: str) -> Dict[str, Any]:
    """Returns a named training recipe (lr, momentum, weight decay, schedule).

    Args:
        name: One of cifar10, cifar100, stl10, imagenet, places365, voc,
          voc_finetune, ucf101, ucf101_finetune, hmdb51, hmdb51_finetune.
    """
    return {"name": name, "recipe": model_to_dict(recipe(name)), "all": sorted(RECIPES)}
