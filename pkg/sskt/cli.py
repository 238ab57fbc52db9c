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

"""Command line: `sskt generate | pretrain-source | train | evaluate | compare | serve`."""

import contextlib
import json
import logging
from typing import Any, Iterator, List, Optional

import typer

from sskt.errors import ConfigError, SSKTError
from sskt.tools.experiments.compare import compare as compare_run_dirs
from sskt.tools.experiments.compare import format_comparison
from sskt.tools.experiments.config import ExperimentConfig, apply_overrides, load_config
from sskt.tools.experiments.runner import (
    evaluate_run,
    generate_data,
    pretrain_source,
    run_experiment,
)


LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"

app = typer.Typer(
    help="Self-supervised knowledge transfer experiments.",
    no_args_is_help=True,
    pretty_exceptions_enable=False,
)

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}

ConfigOption = typer.Option(..., "--config", help="Config file (.json/.toml) or preset:<name>.")
SeedOption = typer.Option(None, "--seed", help="Overrides the training seeds.")
OutOption = typer.Option(None, "--out", help="Output directory; overrides output_dir.")
EpochsOption = typer.Option(None, "--epochs", help="Overrides the number of epochs.")


@contextlib.contextmanager
def _reporting_errors() -> Iterator[None]:
    try:
        yield
    except ConfigError as err:
        typer.echo(f"config error: {err}", err=True)
        raise typer.Exit(code=2) from err
    except SSKTError as err:
        typer.echo(f"error: {err}", err=True)
        raise typer.Exit(code=1) from err


def _parse_bool(value: Optional[str]) -> Optional[bool]:
    if value is None:
        return None
    if value.lower() in _TRUE:
        return True
    if value.lower() in _FALSE:
        return False
    raise typer.BadParameter(f"expected true or false, got {value!r}")


def _load(config: str, **overrides: Any) -> ExperimentConfig:
    return apply_overrides(load_config(config), **overrides)


def _echo(document: Any) -> None:
    typer.echo(json.dumps(document, indent=2, sort_keys=True))


@app.callback()
def main(
    log_level: str = typer.Option("INFO", "--log-level", help="Logging level."),
) -> None:
    logging.basicConfig(level=log_level.upper(), format=LOG_FORMAT)


@app.command()
def generate(
    config: str = ConfigOption,
    out: Optional[str] = OutOption,
) -> None:
    """Writes the source and target train/test splits as .npz files."""
    with _reporting_errors():
        _echo(generate_data(_load(config, out=out)))


@app.command("pretrain-source")
def pretrain_source_command(
    config: str = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[str] = OutOption,
    epochs: Optional[int] = EpochsOption,
) -> None:
    """Pretrains a source network on the source labels."""
    with _reporting_errors():
        summary = pretrain_source(_load(config, seed=seed, out=out, epochs=epochs))
        typer.echo(f"source test accuracy: {summary['test_accuracy']:.4f}")


@app.command()
def train(
    config: str = ConfigOption,
    seed: Optional[int] = SeedOption,
    out: Optional[str] = OutOption,
    sources: Optional[str] = typer.Option(
        None, "--sources", help="Comma-separated source checkpoint directories."
    ),
    alpha: Optional[float] = typer.Option(None, "--alpha", help="Auxiliary loss weight."),
    temperature: Optional[float] = typer.Option(
        None, "--temperature", help="Temperature of every auxiliary loss."
    ),
    use_tm: Optional[str] = typer.Option(
        None, "--use-tm", help="true to feed auxiliary heads through transfer modules."
    ),
    epochs: Optional[int] = EpochsOption,
) -> None:
    """Trains a target network, from scratch or with source networks."""
    source_list = None
    if sources is not None:
        source_list = [s.strip() for s in sources.split(",") if s.strip()]
    with _reporting_errors():
        cfg = _load(
            config,
            seed=seed,
            out=out,
            sources=source_list,
            alpha=alpha,
            temperature=temperature,
            use_tm=_parse_bool(use_tm),
            epochs=epochs,
        )
        result = run_experiment(cfg)
        typer.echo(f"{result.run.metric}: {result.run.final_metric:.4f}")


@app.command()
def evaluate(run_dir: str = typer.Argument(..., help="A completed run directory.")) -> None:
    """Re-evaluates a run's checkpoint on its test split."""
    with _reporting_errors():
        _echo(evaluate_run(run_dir))


@app.command()
def compare(
    run_dirs: List[str] = typer.Argument(..., help="Two or more run directories."),
    out: Optional[str] = OutOption,
) -> None:
    """Compares the final metrics of completed runs."""
    with _reporting_errors():
        typer.echo(format_comparison(compare_run_dirs(run_dirs, out)))


@app.command()
def serve() -> None:
    """Starts the MCP tool server on stdio."""
    from sskt.server import run_server

    run_server()


if __name__ == "__main__":
    app()
