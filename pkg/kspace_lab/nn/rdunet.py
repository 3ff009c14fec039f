"""
Residual dense U-Net.

Encoder level k (k = 0..depth-1) runs two conv+BN+activation stages with
base_channels * 2^k channels and then max-pools; the bottleneck doubles the
channel count once more. Each decoder level upsamples with a channel-halving
transposed convolution, refines the same-level encoder features with a
residual dense block, concatenates (refined skip first, then the upsampled
stream) and runs two conv+BN+activation stages. A 1x1 convolution maps to a
single channel and the input is added back (global residual), so the
network learns the correction to its input.
"""

import logging
from typing import Dict

import numpy as np

from kspace_lab.models.configs import NetConfig
from kspace_lab.nn.blocks import ConvBNAct, make_skip
from kspace_lab.nn.layers import (
    Conv2d, ConvTranspose2x2, Layer, MaxPool2, concat_channels, split_channels
)
from kspace_lab.utils.validators import (
    BackwardBeforeForward, ShapeMismatch, require_tensor4, validate_spatial_divisibility
)

logger = logging.getLogger(__name__)


class EncoderLevel(Layer):
    def __init__(self, c_in: int, c_out: int, polu_order: float, rng, dtype):
        super().__init__()
        self.conv_a = ConvBNAct(c_in, c_out, polu_order, rng, dtype)
        self.conv_b = ConvBNAct(c_out, c_out, polu_order, rng, dtype)
        self.pool = MaxPool2()

    def children(self) -> Dict[str, Layer]:
        return {'conv_a': self.conv_a, 'conv_b': self.conv_b, 'pool': self.pool}


class DecoderLevel(Layer):
    def __init__(self, channels: int, dense_skip: bool, polu_order: float, rng, dtype):
        super().__init__()
        self.channels = channels
        self.up = ConvTranspose2x2(2 * channels, rng=rng, dtype=dtype)
        self.skip = make_skip(channels, dense_skip, polu_order, rng, dtype)
        self.conv_a = ConvBNAct(2 * channels, channels, polu_order, rng, dtype)
        self.conv_b = ConvBNAct(channels, channels, polu_order, rng, dtype)

    def children(self) -> Dict[str, Layer]:
        return {'up': self.up, 'skip': self.skip, 'conv_a': self.conv_a, 'conv_b': self.conv_b}


class RDUNet(Layer):
    """Encoder-decoder network with residual dense skips and a global residual."""

    def __init__(self, config: NetConfig, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.config = config
        self.dtype = np.dtype(dtype)
        rng = np.random.default_rng(seed)
        order = config.polu_order

        self.encoders = []
        c_prev = config.in_channels
        for level in range(config.depth):
            channels = config.channels_at(level)
            self.encoders.append(EncoderLevel(c_prev, channels, order, rng, dtype))
            c_prev = channels

        bottom = config.channels_at(config.depth)
        self.bottleneck_a = ConvBNAct(c_prev, bottom, order, rng, dtype)
        self.bottleneck_b = ConvBNAct(bottom, bottom, order, rng, dtype)

        # Stored from the deepest level up, in execution order.
        self.decoders = [
            DecoderLevel(config.channels_at(level), config.dense_skips, order, rng, dtype)
            for level in reversed(range(config.depth))
        ]
        self.head = Conv2d(config.base_channels, config.out_channels, 1, rng=rng, dtype=dtype)
        self._cached = False

    def children(self) -> Dict[str, Layer]:
        nodes: Dict[str, Layer] = {f"enc{k}": enc for k, enc in enumerate(self.encoders)}
        nodes['bottleneck_a'] = self.bottleneck_a
        nodes['bottleneck_b'] = self.bottleneck_b
        for position, dec in enumerate(self.decoders):
            nodes[f"dec{self.config.depth - 1 - position}"] = dec
        nodes['head'] = self.head
        return nodes

    def check_input(self, x: np.ndarray) -> None:
        require_tensor4(x, "network input")
        if x.shape[1] != self.config.in_channels:
            raise ShapeMismatch(f"Network expects {self.config.in_channels} input channel, got {x.shape[1]}")
        error = validate_spatial_divisibility(x.shape, self.config.depth)
        if error:
            raise ShapeMismatch(error)

    def forward(self, x: np.ndarray) -> np.ndarray:
        self.check_input(x)
        x = x.astype(self.dtype, copy=False)

        skips = []
        h = x
        for enc in self.encoders:
            h = enc.conv_b.forward(enc.conv_a.forward(h))
            skips.append(h)
            h = enc.pool.forward(h)

        h = self.bottleneck_b.forward(self.bottleneck_a.forward(h))

        for dec, skip in zip(self.decoders, reversed(skips)):
            up = dec.up.forward(h)
            h = concat_channels(dec.skip.forward(skip), up)
            h = dec.conv_b.forward(dec.conv_a.forward(h))

        self._cached = self.training
        return x + self.head.forward(h)

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        """Reverse pass; fills every parameter gradient and returns d(loss)/d(input)."""
        if not self._cached:
            raise BackwardBeforeForward("Network backward called without a training-mode forward")
        self._cached = False

        grad = self.head.backward(grad_out)

        skip_grads = []
        for dec in reversed(self.decoders):
            grad = dec.conv_a.backward(dec.conv_b.backward(grad))
            grad_skip, grad_up = split_channels(grad, dec.channels)
            skip_grads.append(dec.skip.backward(grad_skip))
            grad = dec.up.backward(grad_up)

        grad = self.bottleneck_a.backward(self.bottleneck_b.backward(grad))

        for enc, grad_skip in zip(reversed(self.encoders), reversed(skip_grads)):
            grad = enc.pool.backward(grad) + grad_skip
            grad = enc.conv_a.backward(enc.conv_b.backward(grad))

        # Global residual passes the output gradient straight to the input.
        return grad_out + grad

    def parameter_count(self) -> int:
        return int(sum(layer.params[key].size for _, layer, key in self.named_parameters()))

    def zero_parameters(self) -> None:
        """Set every learnable array to zero (the network becomes the identity map in eval mode)."""
        for _, layer, key in self.named_parameters():
            layer.params[key] = np.zeros_like(layer.params[key])

    def predict(self, x: np.ndarray) -> np.ndarray:
        """Eval-mode forward that restores the previous mode afterwards."""
        was_training = self.training
        self.eval()
        try:
            return self.forward(x)
        finally:
            self.train(was_training)
