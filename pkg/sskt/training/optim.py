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

"""SGD with classical momentum and coupled L2 weight decay."""

import dataclasses
from typing import Mapping

import numpy as np

from sskt.autodiff.tensor import Tensor
from sskt.errors import ShapeError


@dataclasses.dataclass
class SGDState:
    """Momentum buffers by parameter name; absent until a parameter's first step."""

    velocity: dict[str, np.ndarray] = dataclasses.field(default_factory=dict)


def sgd_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: SGDState,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> dict[str, Tensor]:
    """One update of every parameter.

        g' = grad + weight_decay * param
        v  = momentum * v + g'
        param <- param - lr * v

    Returns:
        New parameter tensors; `state` is updated in place.
    """
    updated: dict[str, Tensor] = {}
    for name, param in params.items():
        grad = np.asarray(grads[name])
        if grad.shape != param.shape:
            raise ShapeError(
                f"gradient for {name} has shape {grad.shape}, parameter {param.shape}"
            )
        if weight_decay:
            grad = grad + weight_decay * param.data
        previous = state.velocity.get(name)
        velocity = grad if previous is None else momentum * previous + grad
        state.velocity[name] = velocity
        updated[name] = Tensor(
            param.data - lr * velocity, requires_grad=param.requires_grad, name=name
        )
    return updated
