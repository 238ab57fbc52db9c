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

"""Central finite-difference gradient checking."""

from typing import Callable

import numpy as np

from sskt.autodiff.tensor import Tape, Tensor, as_array, backward, no_grad


def finite_diff_check(
    f: Callable[[Tensor], Tensor],
    x: Tensor | np.ndarray,
    eps: float = 1e-6,
) -> float:
    """Compares the tape gradient of a scalar function with central differences.

    Args:
        f: Maps a tensor to a scalar tensor using differentiable operations.
        x: The point at which to check the gradient.
        eps: Step size, in [1e-7, 1e-3].

    Returns:
        max over coordinates of |analytic - numeric| / max(1, |analytic|).
    """
    if not 1e-7 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    point = np.array(as_array(x), dtype=np.float64)

    leaf = Tensor(point, requires_grad=True)
    with Tape() as tape:
        out = f(leaf)
    analytic = backward(out, tape)[leaf]

    numeric = np.empty_like(point)
    with no_grad():
        for index in np.ndindex(point.shape):
            plus = point.copy()
            plus[index] += eps
            minus = point.copy()
            minus[index] -= eps
            numeric[index] = (f(Tensor(plus)).item() - f(Tensor(minus)).item()) / (
                2 * eps
            )
    if point.size == 0:
        return 0.0
    error = np.abs(analytic - numeric) / np.maximum(1.0, np.abs(analytic))
    return float(error.max())
