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

"""Tools for generating data, pretraining sources and running experiments.

Training is CPU bound, so every tool runs its work on a worker thread and
leaves the event loop free to serve other requests.
"""

import functools
from typing import Any, Callable, Dict, List

import anyio.to_thread

from sskt.coordinator import mcp
from sskt.tools.experiments.compare import compare
from sskt.tools.experiments.config import apply_overrides, load_config
from sskt.tools.experiments.metadata import get_config_hints
from sskt.tools.experiments.runner import (
    evaluate_run,
    generate_data,
    pretrain_source,
    run_experiment,
)


async def _in_worker_thread(fn: Callable[..., Any], *args: Any, **kwargs: Any) -> Any:
    return await anyio.to_thread.run_sync(functools.partial(fn, *args, **kwargs))


@mcp.tool(title="Generate a synthetic source/target task pair")
async def generate_task_pair(
    config: str | Dict[str, Any], out_dir: str
) -> Dict[str, Any]:
    """Writes the source and target train/test splits of a config's data as `.npz` files.

    Args:
        config: A `preset:<name>`, a config file path or an inline config.
        out_dir: Directory receiving the split files.
    """
    return await _in_worker_thread(generate_data, load_config(config), out_dir)


@mcp.tool(title="Pretrain a source network")
async def pretrain_source_network(
    config: str | Dict[str, Any], out_dir: str, seed: int = None
) -> Dict[str, Any]:
    """Trains a source network on the source labels and saves its checkpoint.

    Args:
        config: A `preset:<name>`, a config file path or an inline config.
        out_dir: Directory receiving the checkpoint, metrics and summary.
        seed: Overrides the pretraining seed.
    """
    cfg = apply_overrides(load_config(config), seed=seed, out=out_dir)
    return await _in_worker_thread(pretrain_source, cfg)


async def train_target_network(
    config: str | Dict[str, Any],
    out_dir: str,
    seed: int = None,
    sources: List[str] = None,
    alpha: float = None,
    temperature: float = None,
    use_tm: bool = None,
) -> Dict[str, Any]:
    """Trains a target network from scratch or with frozen source networks.

    Without sources this is the scratch baseline. Each source checkpoint adds
    an auxiliary head trained to predict that source's soft labels.

    Args:
        config: A `preset:<name>`, a config file path or an inline config.
        out_dir: Directory receiving the checkpoint, metrics and summary.
        seed: Overrides the training seed.
        sources: Source checkpoint directories, replacing the config's.
        alpha: Overrides the weight of the summed auxiliary losses.
        temperature: Overrides the temperature of every auxiliary loss.
        use_tm: Feed auxiliary heads through transfer modules.
    """
    cfg = apply_overrides(
        load_config(config),
        seed=seed,
        out=out_dir,
        sources=sources,
        alpha=alpha,
        temperature=temperature,
        use_tm=use_tm,
    )
    result = await _in_worker_thread(run_experiment, cfg)
    return result.summary


def _train_target_network_description() -> str:
    """Returns the description for the `train_target_network` tool."""
    return f"""
          {train_target_network.__doc__}

          ## Hints for arguments

          ### Hints for `config`
          {get_config_hints()}

          ### Hints for `sources`

          Pass directories written by the `pretrain_source_network` tool. The
          `ic_to_ac` preset applies a center-frame transform to every source.
          """


mcp.add_tool(
    train_target_network,
    title="Train a target network with self-supervised knowledge transfer",
    description=_train_target_network_description(),
)


@mcp.tool(title="Evaluate a trained network")
async def evaluate_target_network(run_dir: str) -> Dict[str, Any]:
    """Re-evaluates a run's checkpoint on its test split.

    Args:
        run_dir: A directory written by a training tool.
    """
    return await _in_worker_thread(evaluate_run, run_dir)


@mcp.tool(title="Compare completed runs")
async def compare_runs(run_dirs: List[str], out_dir: str = None) -> Dict[str, Any]:
    """Aligns the final metrics of runs, with per-seed deltas and group mean±std.

    Args:
        run_dirs: At least two run directories recording the same metric.
        out_dir: If given, receives `comparison.csv` and `comparison.txt`.
    """
    return await _in_worker_thread(compare, run_dirs, out_dir)
