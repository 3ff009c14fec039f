"""
Training protocol: per-image normalisation, dihedral augmentation, SGD with
heavy-ball momentum, a halving step schedule and the epoch loop.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence

import numpy as np

from kspace_lab.io.checkpoint import save_checkpoint
from kspace_lab.loss import loss_backward, loss_forward
from kspace_lab.models.configs import NetConfig, TrainConfig
from kspace_lab.models.reports import EpochRecord, LossReport
from kspace_lab.models.sampling import SamplingMask
from kspace_lab.nn.rdunet import RDUNet
from kspace_lab.simulate import undersample
from kspace_lab.utils.validators import (
    DivergedTraining, NoGradient, ShapeMismatch, ValidationError, require_same_shape
)

logger = logging.getLogger(__name__)

NORMALIZE_EPS = 1e-8


def normalize(img: np.ndarray) -> np.ndarray:
    """Zero mean, unit (population) standard deviation; constant images map to zeros."""
    img = np.asarray(img, dtype=np.float64)
    return (img - img.mean()) / (img.std() + NORMALIZE_EPS)


def augment8(img: np.ndarray) -> List[np.ndarray]:
    """The 8 rotations/reflections of a square image; element 0 is the image itself."""
    img = np.asarray(img)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ShapeMismatch(f"Augmentation needs a square image, got shape {img.shape}")
    mirrored = np.fliplr(img)
    return ([np.rot90(img, k).copy() for k in range(4)]
            + [np.rot90(mirrored, k).copy() for k in range(4)])


@dataclass
class SamplePairs:
    """Aligned (normalised zero-filled input, normalised fully sampled target) images."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs)
        self.targets = np.asarray(self.targets)
        require_same_shape(self.inputs, self.targets, "inputs and targets")
        if self.inputs.ndim != 3:
            raise ShapeMismatch(f"Pairs must be stacked as (n, ny, nx), got {self.inputs.shape}")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def batch(self, indices: np.ndarray, dtype):
        return (self.inputs[indices][:, None].astype(dtype),
                self.targets[indices][:, None].astype(dtype))

    def subset(self, indices: Sequence[int]) -> 'SamplePairs':
        indices = np.asarray(indices, dtype=int)
        return SamplePairs(self.inputs[indices], self.targets[indices])


def make_pairs(zero_filled: Iterable[np.ndarray], truth: Iterable[np.ndarray],
               augment: bool = False) -> SamplePairs:
    """Normalise reconstructed (input, target) images; augmentation yields 8 pairs per image."""
    inputs, targets = [], []
    for zf, full in zip(zero_filled, truth):
        x, y = normalize(zf), normalize(full)
        if augment:
            inputs.extend(augment8(x))
            targets.extend(augment8(y))
        else:
            inputs.append(x)
            targets.append(y)

    if not inputs:
        raise ValidationError("Dataset must contain at least one image")
    logger.info(f"Built {len(inputs)} training pairs (augment={augment})")
    return SamplePairs(np.stack(inputs), np.stack(targets))


def build_pairs(images: Iterable[np.ndarray], mask: SamplingMask, sens: np.ndarray,
                augment: bool = False) -> SamplePairs:
    """Simulate every ground-truth image through coil acquisition and undersampling."""
    simulated = [undersample(img, sens, mask) for img in images]
    return make_pairs([zf for _, zf, _ in simulated], [full for _, _, full in simulated], augment)


class SGD:
    """v <- momentum * v + grad; p <- p - lr * v. Velocities start at zero."""

    def __init__(self, net, momentum: float = 0.0):
        if not (0 <= momentum < 1):
            raise ValidationError("Momentum must lie in [0, 1)")
        self.net = net
        self.momentum = momentum
        self.velocity = {}

    def step(self, lr: float) -> None:
        named = list(self.net.named_parameters())
        for name, layer, key in named:
            if layer.grads.get(key) is None:
                raise NoGradient(f"Parameter '{name}' has no gradient; run backward first")

        for name, layer, key in named:
            grad = layer.grads[key]
            velocity = self.velocity.get(name)
            velocity = grad.copy() if velocity is None else self.momentum * velocity + grad
            self.velocity[name] = velocity
            layer.params[key] -= (lr * velocity).astype(layer.params[key].dtype, copy=False)


def lr_schedule(epoch: int, cfg: TrainConfig) -> float:
    if epoch < 0:
        raise ValidationError("Epoch index must not be negative")
    return cfg.lr0 * 0.5 ** (epoch // cfg.lr_halve_every)


def predict_images(net: RDUNet, inputs: np.ndarray, batch_size: int = 8) -> np.ndarray:
    """Eval-mode network output for a stack of images (n, ny, nx)."""
    inputs = np.asarray(inputs)
    outputs = [net.predict(inputs[start:start + batch_size][:, None])[:, 0]
               for start in range(0, inputs.shape[0], batch_size)]
    return np.concatenate(outputs, axis=0)


def evaluate_pairs(net: RDUNet, pairs: SamplePairs, alpha: float, batch_size: int = 8) -> LossReport:
    """Objective over a held-out set in eval mode; its l2_term is the set's MSE."""
    pred = predict_images(net, pairs.inputs, batch_size)
    return loss_forward(pred[:, None], pairs.targets[:, None].astype(pred.dtype), alpha)


def _mean_report(reports: List[LossReport], weights: List[int], alpha: float) -> LossReport:
    w = np.asarray(weights, dtype=np.float64) / float(np.sum(weights))
    l2 = float(np.dot(w, [r.l2_term for r in reports]))
    fourier = float(np.dot(w, [r.fourier_term for r in reports]))
    return LossReport(total=l2 + alpha * fourier, l2_term=l2, fourier_term=fourier, alpha=alpha)


@dataclass
class TrainResult:
    net: RDUNet
    history: List[EpochRecord] = field(default_factory=list)
    iteration_losses: List[float] = field(default_factory=list)
    checkpoints: List[str] = field(default_factory=list)

    @property
    def iterations(self) -> int:
        return len(self.iteration_losses)


def _write_checkpoint(result: TrainResult, checkpoint_dir: Optional[str], tag: str) -> None:
    if not checkpoint_dir:
        return
    path = os.path.join(checkpoint_dir, f"checkpoint_{tag}.ksr")
    save_checkpoint(path, result.net)
    result.checkpoints.append(path)
    logger.info(f"Wrote checkpoint {path}")


def train_loop(pairs: SamplePairs, net: RDUNet, cfg: TrainConfig,
               validation: Optional[SamplePairs] = None,
               checkpoint_dir: Optional[str] = None) -> TrainResult:
    """Shuffle, batch, forward, loss, backward and step for cfg.epochs epochs.

    Checkpoints go to `checkpoint_dir` every cfg.checkpoint_every epochs and
    once at the end (also when no epoch runs).
    """
    if len(pairs) == 0:
        raise ValidationError("Training set is empty")
    net.check_input(pairs.inputs[:1][:, None])
    if validation is not None and validation.inputs.shape[1:] != pairs.inputs.shape[1:]:
        raise ShapeMismatch("Validation images differ in size from training images")

    rng = np.random.default_rng(cfg.seed)
    optimizer = SGD(net, cfg.momentum)
    result = TrainResult(net=net)
    cap = cfg.max_iterations
    n = len(pairs)

    net.train()
    for epoch in range(cfg.epochs):
        if cap is not None and result.iterations >= cap:
            break

        lr = lr_schedule(epoch, cfg)
        order = rng.permutation(n)
        reports, sizes = [], []

        for start in range(0, n, cfg.batch_size):
            if cap is not None and result.iterations >= cap:
                break
            x, y = pairs.batch(order[start:start + cfg.batch_size], cfg.dtype)

            pred = net.forward(x)
            report = loss_forward(pred, y, cfg.alpha)
            if not np.isfinite(report.total):
                raise DivergedTraining(epoch, f"Non-finite loss at epoch {epoch}, "
                                              f"iteration {result.iterations}")

            net.zero_grad()
            net.backward(loss_backward(pred, y, cfg.alpha))
            optimizer.step(lr)

            result.iteration_losses.append(report.total)
            reports.append(report)
            sizes.append(x.shape[0])

        train_report = _mean_report(reports, sizes, cfg.alpha)
        record = EpochRecord(epoch=epoch, lr=lr, train=train_report, iterations=result.iterations)
        if validation is not None:
            val_report = evaluate_pairs(net, validation, cfg.alpha, cfg.batch_size)
            record = EpochRecord(epoch=epoch, lr=lr, train=train_report, iterations=result.iterations,
                                 validation=val_report, validation_mse=val_report.l2_term)
        result.history.append(record)

        logger.info(
            f"Epoch {epoch}: lr={lr:.3e} loss={train_report.total:.6f} "
            f"(l2={train_report.l2_term:.6f}, fourier={train_report.fourier_term:.6f})"
            + (f" val_mse={record.validation_mse:.6f}" if record.validation_mse is not None else "")
        )

        if (epoch + 1) % cfg.checkpoint_every == 0:
            _write_checkpoint(result, checkpoint_dir, f"epoch{epoch + 1:04d}")

    _write_checkpoint(result, checkpoint_dir, "final")
    return result


@dataclass(frozen=True)
class AlphaTrial:
    alpha: float
    validation_mse: float
    result: TrainResult


def sweep_alpha(train_pairs: SamplePairs, val_pairs: SamplePairs, net_cfg: NetConfig,
                train_cfg: TrainConfig, alphas: Sequence[float]) -> List[AlphaTrial]:
    """Train one network per alpha from the same initialisation; least validation MSE first."""
    if not alphas:
        raise ValidationError("Alpha sweep needs at least one value")

    trials = []
    for alpha in alphas:
        cfg = train_cfg.with_changes(alpha=float(alpha))
        net = RDUNet(net_cfg, seed=cfg.seed, dtype=cfg.dtype)
        result = train_loop(train_pairs, net, cfg)
        val_mse = evaluate_pairs(net, val_pairs, cfg.alpha, cfg.batch_size).l2_term
        logger.info(f"alpha={alpha:g}: validation MSE {val_mse:.6f}")
        trials.append(AlphaTrial(alpha=float(alpha), validation_mse=val_mse, result=result))

    return sorted(trials, key=lambda trial: trial.validation_mse)
