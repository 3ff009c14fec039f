from kspace_lab.nn.layers import (
    BatchNorm2d, Conv2d, ConvTranspose2x2, Layer, MaxPool2, PoLU, ReLU,
    concat_channels, make_activation, split_channels
)
from kspace_lab.nn.blocks import ConvBNAct, CopySkip, ResidualDenseBlock, make_skip
from kspace_lab.nn.rdunet import RDUNet

__all__ = [
    'BatchNorm2d', 'Conv2d', 'ConvTranspose2x2', 'Layer', 'MaxPool2', 'PoLU', 'ReLU',
    'concat_channels', 'make_activation', 'split_channels',
    'ConvBNAct', 'CopySkip', 'ResidualDenseBlock', 'make_skip', 'RDUNet',
]
