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

"""Differentiable operations over `Tensor`.

Only the operators the target networks and losses need are provided; there
is no general broadcasting.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from sskt.autodiff.tensor import Function, Tensor
from sskt.errors import ShapeError


def stable_log_softmax(logits: np.ndarray, temperature: float) -> np.ndarray:
    """Row-wise log softmax of `logits / temperature` with max subtraction."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    scaled = logits / temperature
    shifted = scaled - scaled.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def stable_softmax(logits: np.ndarray, temperature: float) -> np.ndarray:
    """Row-wise softmax of `logits / temperature` with max subtraction."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    scaled = logits / temperature
    exp = np.exp(scaled - scaled.max(axis=-1, keepdims=True))
    return exp / exp.sum(axis=-1, keepdims=True)


def _require_same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


class _Add(Function):
    def forward(self, a, b):
        return a + b

    def backward(self, grad):
        return grad, grad


class _Mul(Function):
    def forward(self, a, b):
        self.a, self.b = a, b
        return a * b

    def backward(self, grad):
        return grad * self.b, grad * self.a


class _Scale(Function):
    def forward(self, x, *, factor):
        self.factor = factor
        return x * factor

    def backward(self, grad):
        return (grad * self.factor,)


class _Sum(Function):
    def forward(self, x):
        self.shape = x.shape
        return np.asarray(x.sum())

    def backward(self, grad):
        return (np.full(self.shape, float(grad)),)


class _Mean(Function):
    def forward(self, x):
        self.shape = x.shape
        return np.asarray(x.mean())

    def backward(self, grad):
        return (np.full(self.shape, float(grad) / np.prod(self.shape)),)


class _Reshape(Function):
    def forward(self, x, *, shape):
        self.shape = x.shape
        return x.reshape(shape)

    def backward(self, grad):
        return (grad.reshape(self.shape),)


def add(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise sum of two tensors of the same shape."""
    _require_same_shape("add", a, b)
    return _Add.apply(a, b)


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product of two tensors of the same shape."""
    _require_same_shape("mul", a, b)
    return _Mul.apply(a, b)


def scale(x: Tensor, factor: float) -> Tensor:
    """Multiplies every element by a constant."""
    return _Scale.apply(x, factor=float(factor))


def reduce_sum(x: Tensor) -> Tensor:
    """Sum of all elements as a scalar tensor."""
    return _Sum.apply(x)


def reduce_mean(x: Tensor) -> Tensor:
    """Mean of all elements as a scalar tensor."""
    return _Mean.apply(x)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"cannot reshape {x.shape} to {shape}")
    return _Reshape.apply(x, shape=tuple(shape))


class _Linear(Function):
    def forward(self, x, w, b):
        self.x, self.w = x, w
        return x @ w + b

    def backward(self, grad):
        return grad @ self.w.T, self.x.T @ grad, grad.sum(axis=0)


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Affine map `x @ w + b` for `x[B,I]`, `w[I,O]`, `b[O]`."""
    if x.ndim != 2 or w.ndim != 2 or b.ndim != 1:
        raise ShapeError(
            f"linear expects x[B,I], w[I,O], b[O]; got {x.shape}, {w.shape}, {b.shape}"
        )
    if x.shape[1] != w.shape[0] or w.shape[1] != b.shape[0]:
        raise ShapeError(
            f"linear: x{x.shape}, w{w.shape}, b{b.shape} do not conform"
        )
    return _Linear.apply(x, w, b)


def conv_output_size(size: int, kernel: int, stride: int, pad: int) -> int:
    """Output extent of a convolution, or ShapeError if it is not a positive integer."""
    span = size + 2 * pad - kernel
    if stride < 1 or pad < 0 or span < 0 or span % stride:
        raise ShapeError(
            f"conv2d: size {size} with kernel {kernel}, stride {stride}, "
            f"pad {pad} has no integer output size"
        )
    return span // stride + 1


class _Conv2d(Function):
    def forward(self, x, k, *bias, stride, pad):
        batch, channels, height, width = x.shape
        filters, _, kh, kw = k.shape
        out_h = conv_output_size(height, kh, stride, pad)
        out_w = conv_output_size(width, kw, stride, pad)
        padded = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
        # [B, C, out_h, out_w, kh, kw]
        windows = sliding_window_view(padded, (kh, kw), axis=(2, 3))[
            :, :, ::stride, ::stride
        ][:, :, :out_h, :out_w]
        self.windows = windows
        self.k = k
        self.padded_shape = padded.shape
        self.stride, self.pad = stride, pad
        self.input_hw = (height, width)
        self.has_bias = bool(bias)
        out = np.tensordot(windows, k, axes=([1, 4, 5], [1, 2, 3]))
        out = np.ascontiguousarray(out.transpose(0, 3, 1, 2))
        if bias:
            out = out + bias[0][None, :, None, None]
        return out

    def backward(self, grad):
        stride, pad = self.stride, self.pad
        _, _, out_h, out_w = grad.shape
        kh, kw = self.k.shape[2:]
        grad_k = np.tensordot(grad, self.windows, axes=([0, 2, 3], [0, 2, 3]))
        # [B, out_h, out_w, C, kh, kw]
        cols = np.tensordot(grad, self.k, axes=([1], [0]))
        grad_padded = np.zeros(self.padded_shape)
        for i in range(kh):
            for j in range(kw):
                grad_padded[
                    :,
                    :,
                    i : i + stride * (out_h - 1) + 1 : stride,
                    j : j + stride * (out_w - 1) + 1 : stride,
                ] += cols[..., i, j].transpose(0, 3, 1, 2)
        height, width = self.input_hw
        grad_x = grad_padded[:, :, pad : pad + height, pad : pad + width]
        grads = (np.ascontiguousarray(grad_x), grad_k)
        if self.has_bias:
            grads += (grad.sum(axis=(0, 2, 3)),)
        return grads


def conv2d(
    x: Tensor,
    k: Tensor,
    stride: int = 1,
    pad: int = 0,
    bias: Tensor | None = None,
) -> Tensor:
    """2D cross-correlation of `x[B,C,H,W]` with kernels `k[F,C,Kh,Kw]`.

    Raises:
        ShapeError: On rank or channel mismatch, or when
          `(H + 2*pad - Kh) / stride + 1` is not a positive integer.
    """
    if x.ndim != 4 or k.ndim != 4:
        raise ShapeError(f"conv2d expects x[B,C,H,W] and k[F,C,Kh,Kw]; got {x.shape}, {k.shape}")
    if x.shape[1] != k.shape[1]:
        raise ShapeError(
            f"conv2d: input has {x.shape[1]} channels, kernel expects {k.shape[1]}"
        )
    conv_output_size(x.shape[2], k.shape[2], stride, pad)
    conv_output_size(x.shape[3], k.shape[3], stride, pad)
    if bias is None:
        return _Conv2d.apply(x, k, stride=stride, pad=pad)
    if bias.shape != (k.shape[0],):
        raise ShapeError(f"conv2d: bias shape {bias.shape} != ({k.shape[0]},)")
    return _Conv2d.apply(x, k, bias, stride=stride, pad=pad)


class _Relu(Function):
    def forward(self, x):
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad):
        return (np.where(self.mask, grad, 0.0),)


def relu(x: Tensor) -> Tensor:
    return _Relu.apply(x)


class _AvgPool2d(Function):
    def forward(self, x, *, out_h, out_w):
        batch, channels, height, width = x.shape
        self.tile = (height // out_h, width // out_w)
        self.shape = x.shape
        tiles = x.reshape(batch, channels, out_h, self.tile[0], out_w, self.tile[1])
        return tiles.mean(axis=(3, 5))

    def backward(self, grad):
        th, tw = self.tile
        spread = np.repeat(np.repeat(grad, th, axis=2), tw, axis=3)
        return (spread / (th * tw),)


def avgpool2d(x: Tensor, out_h: int, out_w: int) -> Tensor:
    """Adaptive average pooling restricted to evenly tiling output sizes."""
    if x.ndim != 4:
        raise ShapeError(f"avgpool2d expects x[B,C,H,W]; got {x.shape}")
    height, width = x.shape[2:]
    if out_h < 1 or out_w < 1 or height % out_h or width % out_w:
        raise ShapeError(
            f"avgpool2d: output {out_h}x{out_w} does not tile input {height}x{width}"
        )
    return _AvgPool2d.apply(x, out_h=out_h, out_w=out_w)


class _GlobalAvgPool(Function):
    def forward(self, x):
        self.shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        height, width = self.shape[2:]
        spread = np.broadcast_to(grad[:, :, None, None], self.shape)
        return (spread / (height * width),)


def global_avgpool(x: Tensor) -> Tensor:
    """Mean over the spatial extent: `[B,C,H,W] -> [B,C]`."""
    if x.ndim != 4:
        raise ShapeError(f"global_avgpool expects x[B,C,H,W]; got {x.shape}")
    return _GlobalAvgPool.apply(x)


class _Softmax(Function):
    def forward(self, logits, *, temperature):
        self.temperature = temperature
        self.probs = stable_softmax(logits, temperature)
        return self.probs

    def backward(self, grad):
        p = self.probs
        inner = (grad * p).sum(axis=-1, keepdims=True)
        return (p * (grad - inner) / self.temperature,)


class _LogSoftmax(Function):
    def forward(self, logits, *, temperature):
        self.temperature = temperature
        out = stable_log_softmax(logits, temperature)
        self.probs = np.exp(out)
        return out

    def backward(self, grad):
        total = grad.sum(axis=-1, keepdims=True)
        return ((grad - self.probs * total) / self.temperature,)


def softmax_t(logits: Tensor, temperature: float = 1.0) -> Tensor:
    """Tempered softmax over the last axis of `logits[B,K]`.

    Raises:
        ValueError: If `temperature <= 0`.
    """
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return _Softmax.apply(logits, temperature=float(temperature))


def log_softmax_t(logits: Tensor, temperature: float = 1.0) -> Tensor:
    """Tempered log softmax over the last axis."""
    if not temperature > 0:
        raise ValueError(f"temperature must be positive, got {temperature}")
    return _LogSoftmax.apply(logits, temperature=float(temperature))
