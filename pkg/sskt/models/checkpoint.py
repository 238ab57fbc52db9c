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

"""Checkpoint files: a JSON manifest plus raw little-endian float64 payload.

`checkpoint.manifest` records the format version, byte order, dtype, the
architecture, and for every parameter (in order) its name, shape, byte
offset and length; `checkpoint.bin` holds the values back to back. A round
trip is bitwise exact.
"""

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from sskt.autodiff.tensor import Tensor
from sskt.errors import CheckpointError
from sskt.models.network import TargetNetwork, TrunkSpec, build_target

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
CHECKPOINT_FILE = "checkpoint.bin"
MANIFEST_FILE = "checkpoint.manifest"

_DTYPE = np.dtype("<f8")


def checkpoint_paths(location: str | Path) -> tuple[Path, Path]:
    """Resolves a run directory or a `.bin` path to (payload, manifest)."""
    location = Path(location)
    if location.is_dir() or not location.suffix:
        return location / CHECKPOINT_FILE, location / MANIFEST_FILE
    return location, location.with_suffix(".manifest")


def save_checkpoint(net: TargetNetwork, location: str | Path) -> dict:
    """Writes the network's parameters; returns the manifest.

    Args:
        net: The network to save.
        location: A directory (files get their default names) or the path of
          the payload file.
    """
    payload_path, manifest_path = checkpoint_paths(location)
    payload_path.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    chunks = []
    offset = 0
    for name, tensor in net.params.items():
        raw = tensor.data.astype(_DTYPE).tobytes()
        entries.append(
            {
                "name": name,
                "shape": list(tensor.shape),
                "offset": offset,
                "nbytes": len(raw),
            }
        )
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    manifest = {
        "format_version": FORMAT_VERSION,
        "endianness": "little",
        "dtype": "float64",
        "architecture": net.architecture(),
        "parameters": entries,
        "nbytes": len(payload),
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    payload_path.write_bytes(payload)
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info("wrote checkpoint %s (%d bytes)", payload_path, len(payload))
    return manifest


def load_checkpoint(location: str | Path, requires_grad: bool = True) -> TargetNetwork:
    """Reads a checkpoint written by `save_checkpoint`.

    Raises:
        CheckpointError: If a file is missing or any manifest field does not
          match the payload.
    """
    payload_path, manifest_path = checkpoint_paths(location)
    for path in (payload_path, manifest_path):
        if not path.is_file():
            raise CheckpointError(f"checkpoint file not found: {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as err:
        raise CheckpointError(f"{manifest_path}: invalid manifest: {err}") from err

    if manifest.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(
            f"unsupported checkpoint format version {manifest.get('format_version')!r}"
        )
    if manifest.get("endianness") != "little" or manifest.get("dtype") != "float64":
        raise CheckpointError("checkpoint must hold little-endian float64 values")

    payload = payload_path.read_bytes()
    if len(payload) != manifest.get("nbytes"):
        raise CheckpointError(
            f"{payload_path}: expected {manifest.get('nbytes')} bytes, found {len(payload)}"
        )
    if hashlib.sha256(payload).hexdigest() != manifest.get("sha256"):
        raise CheckpointError(f"{payload_path}: sha256 mismatch")

    try:
        params = _read_parameters(manifest["parameters"], payload, requires_grad)
        arch = manifest["architecture"]
        trunk = TrunkSpec.model_validate(arch["trunk"])
        expected = build_target(
            trunk,
            arch["num_classes"],
            arch["source_classes"],
            use_tm=arch["use_tm"],
            tm_width=arch["tm_width"],
        )
    except CheckpointError:
        raise
    except (KeyError, TypeError, ValueError) as err:
        raise CheckpointError(f"{manifest_path}: malformed manifest: {err!r}") from err

    layout = {name: t.shape for name, t in expected.params.items()}
    found = {name: t.shape for name, t in params.items()}
    if found != layout:
        reshaped = [n for n in layout.keys() & found.keys() if layout[n] != found[n]]
        raise CheckpointError(
            f"{manifest_path}: parameters do not match the architecture; "
            f"missing {sorted(layout.keys() - found.keys())}, "
            f"unexpected {sorted(found.keys() - layout.keys())}, "
            f"reshaped {sorted(reshaped)}"
        )
    return TargetNetwork(
        trunk,
        expected.num_classes,
        expected.source_classes,
        expected.use_tm,
        expected.tm_width,
        {name: params[name] for name in layout},
    )


def _read_parameters(
    entries: list[dict], payload: bytes, requires_grad: bool
) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    for entry in entries:
        shape = tuple(entry["shape"])
        count = int(np.prod(shape))
        if entry["nbytes"] != count * _DTYPE.itemsize:
            raise CheckpointError(f"parameter {entry['name']}: size does not match shape")
        values = np.frombuffer(
            payload, dtype=_DTYPE, count=count, offset=entry["offset"]
        ).reshape(shape)
        params[entry["name"]] = Tensor(
            values.astype(np.float64), requires_grad=requires_grad, name=entry["name"]
        )
    return params
