#!/usr/bin/env python3
"""
Tests for the MSE metric and the method comparison harness.
"""

import numpy as np
import pytest

from kspace_lab.metrics import (
    GrappaMethod, NetworkMethod, ZeroFillMethod, build_eval_cases, default_methods,
    evaluate_methods, make_eval_case, mse
)
from kspace_lab.models import NetConfig, TrainConfig
from kspace_lab.nn import RDUNet
from kspace_lab.simulate import build_mask, forward_acquire, make_sensitivities, random_phantom, shepp_logan
from kspace_lab.train import build_pairs, train_loop
from kspace_lab.utils.validators import MissingModel, ShapeMismatch, ValidationError


@pytest.fixture
def cases():
    rng = np.random.default_rng(31)
    images = [random_phantom(64, 64, rng) for _ in range(3)]
    return build_eval_cases(images, build_mask(64, 4, 16), make_sensitivities(8, 64, 64))


def identity_net():
    net = RDUNet(NetConfig(depth=2, base_channels=2), dtype=np.float64)
    net.zero_parameters()
    return net


def test_mse_examples(rng):
    y = np.array([[1.0, 0.0], [0.0, 1.0]])
    assert mse(y, np.zeros((2, 2))) == pytest.approx(0.5)
    assert mse(y, y) == 0

    a, b = rng.standard_normal((4, 4)), rng.standard_normal((4, 4))
    assert mse(3 * a, 3 * b) == pytest.approx(9 * mse(a, b))

    with pytest.raises(ShapeMismatch):
        mse(np.zeros((2, 2)), np.zeros((2, 3)))


def test_single_seed_has_zero_spread(cases):
    report = evaluate_methods(cases, {'zero-fill': ZeroFillMethod()}, seeds=[0])
    score = report.per_method['zero-fill']
    assert score.mse_std == 0
    assert score.n_trials == 1
    assert score.mse_mean > 0


def test_duplicate_methods_score_identically(cases):
    report = evaluate_methods(cases, {'a': GrappaMethod(), 'b': GrappaMethod()}, seeds=[0, 1])
    assert report.per_method['a'] == report.per_method['b']


def test_evaluation_is_repeatable(cases):
    first = evaluate_methods(cases, default_methods(), seeds=[0, 1, 2])
    second = evaluate_methods(cases, default_methods(), seeds=[0, 1, 2])
    assert first.per_method == second.per_method


def test_grappa_ranks_above_zero_fill(cases):
    report = evaluate_methods(cases, default_methods(), seeds=[0])
    assert report.ranked() == ['grappa', 'zero-fill']
    assert report.per_method['grappa'].mse_mean < report.per_method['zero-fill'].mse_mean


def test_identity_network_matches_zero_fill(cases):
    methods = {'zero-fill': ZeroFillMethod(), 'net': NetworkMethod({0: identity_net(), 1: identity_net()})}
    report = evaluate_methods(cases, methods, seeds=[0, 1])
    assert report.per_method['net'].mse_mean == pytest.approx(report.per_method['zero-fill'].mse_mean, rel=1e-12)


def test_missing_checkpoint(cases, tmp_path):
    with pytest.raises(MissingModel):
        evaluate_methods(cases, {'net': NetworkMethod({0: identity_net()})}, seeds=[0, 1])
    with pytest.raises(MissingModel):
        evaluate_methods(cases, {'net': NetworkMethod({0: str(tmp_path / 'absent.ksr')})}, seeds=[0])


def test_fully_sampled_case_scores_zero():
    sens = make_sensitivities(4, 32, 32)
    case = make_eval_case(forward_acquire(shepp_logan(32, 32), sens), build_mask(32, 1, 0))
    report = evaluate_methods([case], {'zero-fill': ZeroFillMethod()}, seeds=[0])
    assert report.per_method['zero-fill'].mse_mean < 1e-20


def test_preconditions(cases):
    with pytest.raises(ValidationError):
        evaluate_methods([], default_methods(), seeds=[0])
    with pytest.raises(ValidationError):
        evaluate_methods(cases, default_methods(), seeds=[])


def test_report_formats(cases):
    report = evaluate_methods(cases, default_methods(), seeds=[0, 1])
    text = report.to_text()
    assert text.splitlines()[0].split() == ['method', 'mse_mean', 'mse_std', 'trials']
    assert len(text.splitlines()) == 3

    pairs = dict(line.split(' = ') for line in report.to_key_values().splitlines())
    assert float(pairs['grappa.mse_mean']) == report.per_method['grappa'].mse_mean
    assert pairs['zero-fill.n_trials'] == '2'


@pytest.mark.slow
def test_trained_network_and_grappa_beat_zero_fill():
    rng = np.random.default_rng(2018)
    mask = build_mask(64, 4, 16)
    sens = make_sensitivities(8, 64, 64)
    train_pairs = build_pairs([random_phantom(64, 64, rng) for _ in range(4)], mask, sens, augment=True)
    test_cases = build_eval_cases([random_phantom(64, 64, rng) for _ in range(8)], mask, sens)

    nets = {}
    for seed in (0, 1):
        cfg = TrainConfig(epochs=200, batch_size=3, lr0=0.02, momentum=0.5, lr_halve_every=20,
                          alpha=0.01, seed=seed, precision=32, augment=True, max_iterations=200)
        nets[seed] = RDUNet(NetConfig(depth=2, base_channels=16), seed=seed)
        train_loop(train_pairs, nets[seed], cfg)

    methods = default_methods()
    methods['rd-unet'] = NetworkMethod(nets)
    report = evaluate_methods(test_cases, methods, seeds=[0, 1])

    # At this budget GRAPPA still leads; both learned and parallel imaging beat zero-filling.
    assert report.ranked()[-1] == 'zero-fill'
    assert report.per_method['rd-unet'].mse_mean < report.per_method['zero-fill'].mse_mean
    assert report.per_method['grappa'].mse_mean < report.per_method['rd-unet'].mse_mean
