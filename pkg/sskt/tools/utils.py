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

"""Common utilities used by the command line and the MCP tools."""

from importlib import metadata
from pathlib import Path
from typing import Any, Dict, Type, TypeVar

from pydantic import BaseModel, ValidationError

from sskt.errors import ConfigError
from sskt.training.report import SUMMARY_FILE

ModelT = TypeVar("ModelT", bound=BaseModel)


def _get_package_version_with_fallback() -> str:
    """Returns the version of the package.

    Falls back to 'unknown' if the version can't be resolved.
    """
    try:
        return metadata.version("sskt")
    except metadata.PackageNotFoundError:
        return "unknown"


def format_validation_error(err: ValidationError) -> str:
    """One `field.path: message` line per validation failure."""
    lines = []
    for error in err.errors():
        message = error["msg"].removeprefix("Value error, ")
        path = ".".join(str(part) for part in error["loc"])
        lines.append(f"{path}: {message}" if path else message)
    return "\n".join(lines)


def validate_model(model: Type[ModelT], data: Any) -> ModelT:
    """Validates `data` into `model`, reporting failures as a ConfigError."""
    try:
        return model.model_validate(data)
    except ValidationError as err:
        raise ConfigError(
            f"invalid {model.__name__}:\n{format_validation_error(err)}"
        ) from err


def construct_run_dir(run_dir: str | Path) -> Path:
    """Returns the path of a completed run directory.

    Raises:
        ConfigError: If the directory does not exist or holds no summary.
    """
    path = Path(run_dir).expanduser()
    if not path.is_dir():
        raise ConfigError(f"Invalid run directory: {run_dir}. It does not exist.")
    if not (path / SUMMARY_FILE).is_file():
        raise ConfigError(
            f"Invalid run directory: {run_dir}. A completed run directory "
            f"contains {SUMMARY_FILE}."
        )
    return path


def model_to_dict(obj: BaseModel) -> Dict[str, Any]:
    """Converts a pydantic model to a JSON-compatible dictionary."""
    return obj.model_dump(mode="json")
