#!/usr/bin/env python3
"""
Tests for the residual dense U-Net assembly.
"""

import numpy as np
import pytest

from kspace_lab.loss import loss_backward, loss_forward
from kspace_lab.models import NetConfig
from kspace_lab.nn import CopySkip, RDUNet, ResidualDenseBlock
from kspace_lab.train import SGD
from kspace_lab.utils.gradcheck import check_gradients
from kspace_lab.utils.validators import BackwardBeforeForward, ShapeMismatch


def small_net(depth=1, base=4, seed=0, dense=True):
    return RDUNet(NetConfig(depth=depth, base_channels=base, dense_skips=dense), seed=seed, dtype=np.float64)


def test_zero_network_is_identity(rng):
    net = small_net(depth=2)
    net.zero_parameters()
    net.eval()
    x = rng.standard_normal((2, 1, 8, 8))
    assert np.array_equal(net.forward(x), x)


@pytest.mark.parametrize('depth, base, size', [(1, 4, 8), (2, 4, 16), (3, 2, 8)])
def test_output_shape_matches_input(rng, depth, base, size):
    net = small_net(depth, base)
    x = rng.standard_normal((3, 1, size, size + 8))
    assert net.forward(x).shape == x.shape


def test_indivisible_input_rejected():
    net = small_net(depth=2)
    with pytest.raises(ShapeMismatch):
        net.forward(np.zeros((1, 1, 10, 10)))
    with pytest.raises(ShapeMismatch):
        net.forward(np.zeros((1, 2, 8, 8)))


def test_channel_algebra():
    net = small_net(depth=3, base=2)
    for level, enc in enumerate(net.encoders):
        assert enc.conv_b.conv.params['weight'].shape[0] == 2 * 2 ** level
    assert net.bottleneck_b.conv.params['weight'].shape[0] == 16
    widths = [dec.conv_b.conv.params['weight'].shape[0] for dec in net.decoders]
    assert widths == [8, 4, 2]
    assert net.head.params['weight'].shape == (1, 2, 1, 1)


def test_same_seed_same_network(rng):
    a, b = small_net(seed=11), small_net(seed=11)
    for (name, layer_a, key), (_, layer_b, _) in zip(a.named_parameters(), b.named_parameters()):
        assert np.array_equal(layer_a.params[key], layer_b.params[key]), name
    x = rng.standard_normal((2, 1, 8, 8))
    assert np.array_equal(a.forward(x), b.forward(x))
    assert not np.array_equal(small_net(seed=12).forward(x), a.forward(x))


def test_full_network_gradient_check():
    rng = np.random.default_rng(99)
    net = small_net(depth=1, base=4, seed=5)
    result = check_gradients(net, rng.standard_normal((1, 1, 8, 8)), rng, n_samples=4)
    assert result.worst < 1e-3, result.failing(1e-3)


@pytest.mark.parametrize('dense', [True, False])
def test_two_level_gradient_check(dense):
    rng = np.random.default_rng(7)
    net = small_net(depth=2, base=2, seed=3, dense=dense)
    result = check_gradients(net, rng.standard_normal((2, 1, 8, 8)), rng, n_samples=4)
    assert result.worst < 1e-3, result.failing(1e-3)


def test_three_level_backward_shapes(rng):
    net = small_net(depth=3, base=2)
    x = rng.standard_normal((2, 1, 16, 16))
    net.forward(x)
    assert net.backward(np.ones_like(x)).shape == x.shape
    for name, layer, key in net.named_parameters():
        assert layer.grads[key].shape == layer.params[key].shape, name


def test_two_level_train_step_lowers_loss(rng):
    net = small_net(depth=2, base=2, seed=4)
    x = rng.standard_normal((4, 1, 16, 16))
    target = rng.standard_normal(x.shape)
    optimizer = SGD(net, momentum=0.0)

    before = loss_forward(net.forward(x), target, 0.0).total
    net.zero_grad()
    net.backward(loss_backward(net.forward(x), target, 0.0))
    optimizer.step(1e-3)
    after = loss_forward(net.forward(x), target, 0.0).total
    assert after < before


def test_zero_network_passes_gradient_straight_through(rng):
    net = small_net(depth=1)
    net.zero_parameters()
    x = rng.standard_normal((2, 1, 8, 8))
    net.forward(x)
    grad_out = rng.standard_normal(x.shape)
    assert np.array_equal(net.backward(grad_out), grad_out)


def test_zero_output_gradient_gives_zero_parameter_gradients(rng):
    net = small_net(depth=1)
    x = rng.standard_normal((2, 1, 8, 8))
    net.forward(x)
    net.backward(np.zeros_like(x))
    for name, layer, key in net.named_parameters():
        assert not np.any(layer.grads[key]), name


def test_backward_before_forward():
    net = small_net()
    with pytest.raises(BackwardBeforeForward):
        net.backward(np.zeros((1, 1, 8, 8)))

    net.eval()
    net.forward(np.zeros((1, 1, 8, 8)))
    with pytest.raises(BackwardBeforeForward):
        net.backward(np.zeros((1, 1, 8, 8)))


def test_plain_unet_uses_copy_skips():
    dense, plain = small_net(depth=2), small_net(depth=2, dense=False)
    assert all(isinstance(dec.skip, ResidualDenseBlock) for dec in dense.decoders)
    assert all(isinstance(dec.skip, CopySkip) for dec in plain.decoders)
    assert plain.parameter_count() < dense.parameter_count()


def test_state_dict_round_trip(rng):
    source = small_net(seed=1)
    source.forward(rng.standard_normal((2, 1, 8, 8)))
    target = small_net(seed=2)
    target.load_state_dict(source.state_dict())
    source.eval()
    target.eval()
    x = rng.standard_normal((1, 1, 8, 8))
    assert np.array_equal(source.forward(x), target.forward(x))


def test_load_state_dict_rejects_wrong_architecture():
    with pytest.raises(ShapeMismatch):
        small_net(base=4).load_state_dict(small_net(base=2).state_dict())


def test_predict_restores_training_mode(rng):
    net = small_net()
    net.predict(rng.standard_normal((1, 1, 8, 8)))
    assert net.training and net.encoders[0].conv_a.bn.training
