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

"""Exceptions raised by the SSKT library.

Every error derives from `SSKTError` and from the builtin it refines, so code
that catches `ValueError` or `RuntimeError` keeps working.
"""


class SSKTError(Exception):
    """Base class for all library errors."""


class ShapeError(SSKTError, ValueError):
    """Operand shapes, ranks or channel counts do not conform."""


class NonFiniteError(SSKTError, ArithmeticError):
    """A tensor would hold NaN or Inf values."""


class GraphError(SSKTError, RuntimeError):
    """The loss cannot be differentiated through the given tape."""


class ConfigError(SSKTError, ValueError):
    """A configuration is invalid."""


class CheckpointError(SSKTError, ValueError):
    """A checkpoint is missing, malformed, or fails verification."""


class FreezeViolationError(SSKTError, RuntimeError):
    """The parameters of a frozen source network changed."""


class TrainingDivergedError(SSKTError, RuntimeError):
    """Training produced a non-finite loss."""
