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

"""Experiment configuration: schema, file loading and command-line overrides."""

import enum
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Annotated, Any, Dict, Literal, Sequence

from pydantic import BaseModel, ConfigDict, Field, model_validator

from sskt.data.binary import BinaryDataSpec
from sskt.data.synthetic import SyntheticTaskPair
from sskt.errors import ConfigError
from sskt.losses import AuxSpec, LossPlan, PrimaryLossKind
from sskt.models.network import TrunkSpec
from sskt.source import TransformSpec
from sskt.tools.experiments.presets import preset
from sskt.tools.utils import validate_model
from sskt.training.config import TrainConfig

logger = logging.getLogger(__name__)

PRESET_PREFIX = "preset:"


class Scenario(str, enum.Enum):
    IC_TO_IC = "ic_to_ic"
    IC_TO_MCIC = "ic_to_mcic"
    IC_TO_AC = "ic_to_ac"
    MULTI_SOURCE = "multi_source"


DataSpec = Annotated[SyntheticTaskPair | BinaryDataSpec, Field(discriminator="kind")]


class SourceRef(BaseModel):
    """A pretrained source checkpoint and the transform applied before it."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    checkpoint: str
    transforms: tuple[TransformSpec, ...] = ()


class ExperimentConfig(BaseModel):
    """Everything one experiment run needs.

    Attributes:
        version: Config format version, always 1.
        scenario: Which transfer setting the run belongs to.
        data: Synthetic task pair parameters or binary record files.
        trunk: Target trunk; clip inputs enter with frames stacked as channels.
        source_trunk: Trunk used when pretraining a source; defaults to the
          target trunk's blocks on single frames.
        use_tm: Feed auxiliary heads through transfer modules.
        tm_width: Transfer module width; defaults to the trunk feature width.
        train: Target training config, including the loss plan.
        source_train: Source pretraining config; defaults to `train`
          without auxiliary losses.
        sources: Source checkpoints, one per auxiliary loss.
        source_transforms: Transforms given to sources attached from the
          command line.
        output_dir: Directory receiving every output file.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    version: Literal[1] = 1
    scenario: Scenario = Scenario.IC_TO_IC
    data: DataSpec
    trunk: TrunkSpec
    source_trunk: TrunkSpec | None = None
    use_tm: bool = False
    tm_width: int | None = Field(default=None, ge=1)
    train: TrainConfig
    source_train: TrainConfig | None = None
    sources: tuple[SourceRef, ...] = ()
    source_transforms: tuple[TransformSpec, ...] = ()
    output_dir: str = "runs/default"

    @model_validator(mode="after")
    def _check_consistency(self) -> "ExperimentConfig":
        if self.trunk.input_shape != self.data.target_input_shape:
            raise ValueError(
                f"trunk.input_shape: {self.trunk.input_shape} does not match the "
                f"target input shape {self.data.target_input_shape}"
            )
        if self.source_trunk_spec.input_shape != self.data.image_shape:
            raise ValueError(
                f"source_trunk.input_shape: {self.source_trunk_spec.input_shape} does "
                f"not match the source image shape {self.data.image_shape}"
            )
        plan = self.train.loss_plan
        if len(plan.aux_specs) != len(self.sources):
            raise ValueError(
                f"train.loss_plan.aux_specs: {len(plan.aux_specs)} auxiliary losses "
                f"for {len(self.sources)} sources"
            )
        if self.source_train is not None and (
            self.source_train.loss_plan.aux_specs
            or self.source_train.loss_plan.primary_kind is not PrimaryLossKind.CE
        ):
            raise ValueError(
                "source_train.loss_plan: source pretraining uses plain cross-entropy"
            )
        if self.multi_label_target != (plan.primary_kind is PrimaryLossKind.BCE):
            raise ValueError(
                f"train.loss_plan.primary_kind: {plan.primary_kind.value} does not fit "
                f"{'multi' if self.multi_label_target else 'single'}-label targets"
            )
        self._check_scenario()
        return self

    def _check_scenario(self) -> None:
        clips = self.clip_depth > 0
        if self.scenario is Scenario.IC_TO_AC:
            if not clips:
                raise ValueError("data.clip_depth: ic_to_ac needs clip inputs (clip_depth > 0)")
            for i, source in enumerate(self.sources):
                if not any(t.kind == "center_frame" for t in source.transforms):
                    raise ValueError(
                        f"sources.{i}.transforms: ic_to_ac sources need a center_frame transform"
                    )
        elif clips:
            raise ValueError(f"data.clip_depth: {self.scenario.value} takes 2D images")
        if self.scenario is Scenario.IC_TO_MCIC and not self.multi_label_target:
            raise ValueError("data.target_kind: ic_to_mcic needs a multi-label target")
        if self.scenario is Scenario.MULTI_SOURCE and len(self.sources) == 1:
            raise ValueError("sources: multi_source takes no sources or at least two")

    @property
    def clip_depth(self) -> int:
        return getattr(self.data, "clip_depth", 0)

    @property
    def multi_label_target(self) -> bool:
        return getattr(self.data, "target_kind", "single") == "multi"

    @property
    def num_target_classes(self) -> int:
        if isinstance(self.data, SyntheticTaskPair):
            return self.data.k_target
        return self.data.num_classes

    @property
    def num_source_classes(self) -> int:
        if isinstance(self.data, SyntheticTaskPair):
            return self.data.k_source
        return self.data.num_classes

    @property
    def source_trunk_spec(self) -> TrunkSpec:
        if self.source_trunk is not None:
            return self.source_trunk
        return TrunkSpec(input_shape=self.data.image_shape, blocks=self.trunk.blocks)

    @property
    def source_train_config(self) -> TrainConfig:
        if self.source_train is not None:
            return self.source_train
        return self.train.model_copy(update={"loss_plan": LossPlan()})


def _read_document(path: Path) -> Dict[str, Any]:
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    try:
        if path.suffix == ".toml":
            with open(path, "rb") as f:
                return tomllib.load(f)
        if path.suffix == ".json":
            return json.loads(path.read_text())
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as err:
        raise ConfigError(f"{path}: {err}") from err
    raise ConfigError(f"{path}: config files are .json or .toml")


def load_config(config: str | Path | Dict[str, Any]) -> ExperimentConfig:
    """Loads a config document, a `.json`/`.toml` file or a `preset:<name>`.

    Raises:
        ConfigError: For unreadable files, unknown presets and invalid
          documents, with one `field.path: message` line per failure.
    """
    if isinstance(config, dict):
        document = config
    elif str(config).startswith(PRESET_PREFIX):
        try:
            document = preset(str(config)[len(PRESET_PREFIX) :])
        except KeyError as err:
            raise ConfigError(err.args[0]) from err
    else:
        document = _read_document(Path(config))
    return validate_model(ExperimentConfig, document)


def apply_overrides(
    cfg: ExperimentConfig,
    seed: int | None = None,
    out: str | Path | None = None,
    sources: Sequence[str] | None = None,
    alpha: float | None = None,
    temperature: float | None = None,
    use_tm: bool | None = None,
    epochs: int | None = None,
) -> ExperimentConfig:
    """Returns `cfg` with command-line overrides applied and re-validated.

    `seed` and `epochs` apply to both target training and source
    pretraining. New sources get `source_transforms` and reuse the first
    auxiliary spec, or CE_soft at T=1 when there is none.
    """
    document = cfg.model_dump(mode="json")
    train = document["train"]
    source_train = cfg.source_train_config.model_dump(mode="json")
    plan = train["loss_plan"]
    if seed is not None:
        train["seed"] = seed
        source_train["seed"] = seed
    if epochs is not None:
        train["epochs"] = epochs
        source_train["epochs"] = epochs
    if cfg.source_train is not None or seed is not None or epochs is not None:
        document["source_train"] = source_train
    if out is not None:
        document["output_dir"] = str(out)
    if sources is not None:
        template = plan["aux_specs"][0] if plan["aux_specs"] else AuxSpec().model_dump(mode="json")
        document["sources"] = [
            {"checkpoint": str(path), "transforms": document["source_transforms"]}
            for path in sources
        ]
        plan["aux_specs"] = [dict(template) for _ in sources]
    if alpha is not None:
        plan["alpha"] = alpha
    if temperature is not None:
        for spec in plan["aux_specs"]:
            spec["temperature"] = temperature
    if use_tm is not None:
        document["use_tm"] = use_tm
    return validate_model(ExperimentConfig, document)
