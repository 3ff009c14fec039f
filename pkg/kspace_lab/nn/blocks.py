from typing import Dict, Optional

import numpy as np

from kspace_lab.nn.layers import (
    BatchNorm2d, Conv2d, Layer, concat_channels, make_activation, split_channels
)


class ConvBNAct(Layer):
    """3x3 convolution -> batch norm -> activation."""

    def __init__(self, c_in: int, c_out: int, polu_order: float, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.conv = Conv2d(c_in, c_out, 3, rng=rng, dtype=dtype)
        self.bn = BatchNorm2d(c_out, dtype=dtype)
        self.act = make_activation(polu_order)

    def children(self) -> Dict[str, Layer]:
        return {'conv': self.conv, 'bn': self.bn, 'act': self.act}

    def forward(self, x: np.ndarray) -> np.ndarray:
        return self.act.forward(self.bn.forward(self.conv.forward(x)))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return self.conv.backward(self.bn.backward(self.act.backward(grad_out)))


class ResidualDenseBlock(Layer):
    """Dense part: conv(c->c)+BN+act, concatenated with the input, conv(2c->c).
    Residual part: the block input is added to the dense output.

    Zeroing the second convolution turns the block into an exact identity.
    """

    def __init__(self, channels: int, polu_order: float, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.channels = channels
        self.expand = ConvBNAct(channels, channels, polu_order, rng, dtype)
        self.fuse = Conv2d(2 * channels, channels, 3, rng=rng, dtype=dtype)

    def children(self) -> Dict[str, Layer]:
        return {'expand': self.expand, 'fuse': self.fuse}

    def forward(self, x: np.ndarray) -> np.ndarray:
        dense = self.expand.forward(x)
        return x + self.fuse.forward(concat_channels(x, dense))

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        grad_cat = self.fuse.backward(grad_out)
        grad_x, grad_dense = split_channels(grad_cat, self.channels)
        return grad_out + grad_x + self.expand.backward(grad_dense)


class CopySkip(Layer):
    """Plain U-Net skip connection: features pass through unchanged."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        return x

    def backward(self, grad_out: np.ndarray) -> np.ndarray:
        return grad_out


def make_skip(channels: int, dense: bool, polu_order: float, rng: Optional[np.random.Generator],
              dtype=np.float32) -> Layer:
    if dense:
        return ResidualDenseBlock(channels, polu_order, rng, dtype)
    return CopySkip()
