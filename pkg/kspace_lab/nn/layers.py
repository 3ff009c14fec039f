"""
Differentiable layers with hand-written backward passes.

Every layer owns its learnable `params`, the matching `grads` (filled by
`backward`), non-learnable `buffers` (batch-norm running statistics) and a
forward `cache`. The cache is written only in training mode and released by
`backward`; a layer in eval mode keeps no per-call state.

Tensors are numpy arrays shaped (batch, channels, height, width).
"""

from typing import Dict, Iterator, Optional, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from kspace_lab.utils.validators import (
    BackwardBeforeForward, DegenerateBatch, ShapeMismatch, ValidationError, require_tensor4
)


class Layer:
    """Base class: parameter bookkeeping, train/eval switch, state (de)serialisation."""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, Optional[np.ndarray]] = {}
        self.buffers: Dict[str, np.ndarray] = {}
        self.cache = None
        self.training = True

    def children(self) -> Dict[str, 'Layer']:
        return {}

    def train(self, mode: bool = True) -> 'Layer':
        self.training = mode
        for child in self.children().values():
            child.train(mode)
        return self

    def eval(self) -> 'Layer':
        return self.train(False)

    def _take_cache(self):
        if self.cache is None:
            raise BackwardBeforeForward(f"{type(self).__name__}.backward called without a training-mode forward")
        cache, self.cache = self.cache, None
        return cache

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, 'Layer', str]]:
        """Yield (qualified name, owning layer, key) for every learnable array."""
        for key in self.params:
            yield f"{prefix}{key}", self, key
        for name, child in self.children().items():
            yield from child.named_parameters(f"{prefix}{name}.")

    def named_buffers(self, prefix: str = '') -> Iterator[Tuple[str, 'Layer', str]]:
        for key in self.buffers:
            yield f"{prefix}{key}", self, key
        for name, child in self.children().items():
            yield from child.named_buffers(f"{prefix}{name}.")

    def zero_grad(self) -> None:
        for _, layer, key in self.named_parameters():
            layer.grads[key] = None

    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: layer.params[key] for name, layer, key in self.named_parameters()}
        state.update({name: layer.buffers[key] for name, layer, key in self.named_buffers()})
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        for name, layer, key in list(self.named_parameters()):
            layer.params[key] = self._restore(name, layer.params[key], state)
        for name, layer, key in list(self.named_buffers()):
            layer.buffers[key] = self._restore(name, layer.buffers[key], state)

    @staticmethod
    def _restore(name: str, current: np.ndarray, state: Dict[str, np.ndarray]) -> np.ndarray:
        if name not in state:
            raise ShapeMismatch(f"Checkpoint has no entry '{name}'")
        value = np.asarray(state[name])
        if value.shape != current.shape:
            raise ShapeMismatch(f"Entry '{name}' has shape {value.shape}, expected {current.shape}")
        return value.astype(current.dtype, copy=True)


def he_normal(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    return (rng.standard_normal(shape) * np.sqrt(2.0 / fan_in)).astype(dtype)


class Conv2d(Layer):
    """Stride-1 cross-correlation with zero padding that preserves height and width."""

    def __init__(self, c_in: int, c_out: int, kernel: int = 3, rng: Optional[np.random.Generator] = None,
                 dtype=np.float32):
        super().__init__()
        if kernel % 2 == 0:
            raise ValidationError("Convolution kernel size must be odd")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.c_in, self.c_out, self.kernel = c_in, c_out, kernel
        self.params['weight'] = he_normal(rng, (c_out, c_in, kernel, kernel), c_in * kernel * kernel, dtype)
        self.params['bias'] = np.zeros(c_out, dtype=dtype)
        self.grads = {'weight': None, 'bias': None}

    def _windows(self, x: np.ndarray) -> np.ndarray:
        p = self.kernel // 2
        padded = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
        return sliding_window_view(padded, (self.kernel, self.kernel), axis=(2, 3))

    def forward(self, x: np.ndarray) -> np.ndarray:
        require_tensor4(x, "convolution input")
        if x.shape[1] != self.c_in:
            raise ShapeMismatch(f"Convolution expects {self.c_in} channels, got {x.shape[1]}")

        windows = self._windows(x)
        out = np.tensordot(windows, self.params['weight'], axes=([1, 4, 5], [1, 2, 3]))
        out = out.transpose(0, 3, 1, 2) + self.params['bias'][None, :, None, None]
        if self.training:
            self.cache = windows
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        windows = self._take_cache()
        weight = self.params['weight']

        self.grads['weight'] = np.tensordot(grad_out, windows, axes=([0, 2, 3], [0, 2, 3]))
        self.grads['bias'] = grad_out.sum(axis=(0, 2, 3))

        # Full correlation with the flipped kernel.
        flipped = weight[:, :, ::-1, ::-1]
        grad_windows = self._windows(grad_out)
        grad_in = np.tensordot(grad_windows, flipped, axes=([1, 4, 5], [0, 2, 3]))
        return grad_in.transpose(0, 3, 1, 2)


class BatchNorm2d(Layer):
    """Per-channel batch normalisation with affine parameters and running statistics."""

    def __init__(self, channels: int, eps: float = 1e-5, momentum: float = 0.1, dtype=np.float32):
        super().__init__()
        self.channels, self.eps, self.momentum = channels, eps, momentum
        self.params['gamma'] = np.ones(channels, dtype=dtype)
        self.params['beta'] = np.zeros(channels, dtype=dtype)
        self.grads = {'gamma': None, 'beta': None}
        self.buffers['running_mean'] = np.zeros(channels, dtype=dtype)
        self.buffers['running_var'] = np.ones(channels, dtype=dtype)

    def forward(self, x: np.ndarray) -> np.ndarray:
        require_tensor4(x, "batch-norm input")
        if x.shape[1] != self.channels:
            raise ShapeMismatch(f"Batch norm expects {self.channels} channels, got {x.shape[1]}")

        gamma = self.params['gamma'][None, :, None, None]
        beta = self.params['beta'][None, :, None, None]

        if not self.training:
            mean = self.buffers['running_mean'][None, :, None, None]
            var = self.buffers['running_var'][None, :, None, None]
            return gamma * (x - mean) / np.sqrt(var + self.eps) + beta

        n = x.shape[0] * x.shape[2] * x.shape[3]
        if n < 2:
            raise DegenerateBatch(f"Batch statistics need at least 2 values per channel, got {n}")

        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        inv_std = 1.0 / np.sqrt(var + self.eps)
        x_hat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]

        m = self.momentum
        self.buffers['running_mean'] = ((1 - m) * self.buffers['running_mean'] + m * mean).astype(x_hat.dtype)
        self.buffers['running_var'] = ((1 - m) * self.buffers['running_var']
                                       + m * var * n / (n - 1)).astype(x_hat.dtype)

        self.cache = (x_hat, inv_std)
        return gamma * x_hat + beta

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x_hat, inv_std = self._take_cache()
        n = grad_out.shape[0] * grad_out.shape[2] * grad_out.shape[3]

        self.grads['gamma'] = np.sum(grad_out * x_hat, axis=(0, 2, 3))
        self.grads['beta'] = grad_out.sum(axis=(0, 2, 3))

        g_hat = grad_out * self.params['gamma'][None, :, None, None]
        sum_g = g_hat.sum(axis=(0, 2, 3), keepdims=True)
        sum_gx = np.sum(g_hat * x_hat, axis=(0, 2, 3), keepdims=True)
        return inv_std[None, :, None, None] / n * (n * g_hat - sum_g - x_hat * sum_gx)


class PoLU(Layer):
    """Power linear unit: v for v >= 0, (1 - v)^(-n) - 1 for v < 0."""

    def __init__(self, order: float = 1.0):
        super().__init__()
        if order <= 0:
            raise ValidationError("PoLU order must be positive")
        self.order = order

    def forward(self, x: np.ndarray) -> np.ndarray:
        neg = np.minimum(x, 0)
        out = np.where(x >= 0, x, (1 - neg) ** (-self.order) - 1)
        if self.training:
            self.cache = x
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        neg = np.minimum(x, 0)
        slope = np.where(x >= 0, 1, self.order * (1 - neg) ** (-self.order - 1))
        return grad_out * slope


class ReLU(Layer):
    def forward(self, x: np.ndarray) -> np.ndarray:
        if self.training:
            self.cache = x > 0
        return np.maximum(x, 0)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out * self._take_cache()


def make_activation(polu_order: float) -> Layer:
    """PoLU(n) for n > 0, ReLU for n == 0."""
    return PoLU(polu_order) if polu_order > 0 else ReLU()


class MaxPool2(Layer):
    """2x2 max pooling, stride 2. Ties go to the first element in row-major order."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        require_tensor4(x, "pooling input")
        b, c, h, w = x.shape
        if h % 2 or w % 2:
            raise ShapeMismatch(f"Pooling needs even height and width, got {h}x{w}")

        windows = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
        index = np.argmax(windows, axis=-1)
        out = np.take_along_axis(windows, index[..., None], axis=-1)[..., 0]
        if self.training:
            self.cache = (index, x.shape)
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        index, shape = self._take_cache()
        b, c, h, w = shape
        routed = np.zeros(grad_out.shape + (4,), dtype=grad_out.dtype)
        np.put_along_axis(routed, index[..., None], grad_out[..., None], axis=-1)
        return routed.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h, w)


class ConvTranspose2x2(Layer):
    """Transposed convolution, kernel 2x2, stride 2: doubles height and width.

    Without an explicit `c_out` the layer halves the channel count, which
    requires an even `c_in`.
    """

    def __init__(self, c_in: int, c_out: Optional[int] = None, rng: Optional[np.random.Generator] = None,
                 dtype=np.float32):
        super().__init__()
        if c_out is None:
            if c_in % 2:
                raise ShapeMismatch(f"Channel-halving upsampling needs an even channel count, got {c_in}")
            c_out = c_in // 2
        rng = rng if rng is not None else np.random.default_rng(0)
        self.c_in, self.c_out = c_in, c_out
        self.params['weight'] = he_normal(rng, (c_in, c_out, 2, 2), c_in, dtype)
        self.params['bias'] = np.zeros(c_out, dtype=dtype)
        self.grads = {'weight': None, 'bias': None}

    def forward(self, x: np.ndarray) -> np.ndarray:
        require_tensor4(x, "upsampling input")
        if x.shape[1] != self.c_in:
            raise ShapeMismatch(f"Upsampling expects {self.c_in} channels, got {x.shape[1]}")

        b, _, h, w = x.shape
        out = np.tensordot(x, self.params['weight'], axes=([1], [0]))  # (b, h, w, o, 2, 2)
        out = out.transpose(0, 3, 1, 4, 2, 5).reshape(b, self.c_out, 2 * h, 2 * w)
        out = out + self.params['bias'][None, :, None, None]
        if self.training:
            self.cache = x
        return out

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        x = self._take_cache()
        b, _, h, w = x.shape
        blocks = grad_out.reshape(b, self.c_out, h, 2, w, 2)

        self.grads['weight'] = np.tensordot(x, blocks, axes=([0, 2, 3], [0, 2, 4]))
        self.grads['bias'] = grad_out.sum(axis=(0, 2, 3))
        grad_in = np.tensordot(blocks, self.params['weight'], axes=([1, 3, 5], [1, 2, 3]))
        return grad_in.transpose(0, 3, 1, 2)


def concat_channels(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack channels of `a` then `b`."""
    require_tensor4(a, "first operand")
    require_tensor4(b, "second operand")
    if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
        raise ShapeMismatch(f"Cannot concatenate {a.shape} and {b.shape} along channels")
    return np.concatenate([a, b], axis=1)


def split_channels(grad: np.ndarray, first: int) -> Tuple[np.ndarray, np.ndarray]:
    """Backward of concat_channels: gradient of the first and second operand."""
    return grad[:, :first], grad[:, first:]
