"""
Evaluation: mean squared error on normalised images and the head-to-head
comparison of reconstruction methods across trials.

Every method sees the same masked coil k-space of each test case. Zero-fill
and GRAPPA outputs are normalised before scoring; network outputs already
live in the normalised domain the network was trained on. A trial is one
seed; learned methods use one checkpoint per seed, the analytic methods give
the same score for every seed.
"""

import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence

import numpy as np

from kspace_lab.grappa import grappa_recon
from kspace_lab.io.checkpoint import load_checkpoint
from kspace_lab.models.reports import EvalReport, MethodScore
from kspace_lab.models.sampling import SamplingMask
from kspace_lab.simulate import apply_mask, forward_acquire, zero_filled_recon
from kspace_lab.train import normalize, predict_images
from kspace_lab.utils.validators import MissingModel, ValidationError, require_same_shape

logger = logging.getLogger(__name__)


def mse(y: np.ndarray, yhat: np.ndarray) -> float:
    """Sum of squared differences divided by the pixel count."""
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    require_same_shape(y, yhat, "images")
    return float(np.sum((y - yhat) ** 2) / y.size)


@dataclass(frozen=True, eq=False)
class EvalCase:
    """One slice: masked coil k-space plus the normalised fully sampled reference, if known."""

    masked_kspace: np.ndarray
    mask: SamplingMask
    truth: Optional[np.ndarray] = None

    @property
    def zero_filled(self) -> np.ndarray:
        return zero_filled_recon(self.masked_kspace)


def make_eval_case(full_kspace: np.ndarray, mask: SamplingMask) -> EvalCase:
    full_kspace = np.asarray(full_kspace)
    return EvalCase(masked_kspace=apply_mask(full_kspace, mask), mask=mask,
                    truth=normalize(zero_filled_recon(full_kspace)))


def build_eval_cases(images: Iterable[np.ndarray], mask: SamplingMask, sens: np.ndarray) -> List[EvalCase]:
    return [make_eval_case(forward_acquire(img, sens), mask) for img in images]


class ReconMethod:
    """`raw` is the method's own output; `reconstruct` is that output in the normalised domain."""

    output_is_normalized = False

    def raw(self, case: EvalCase, seed: int) -> np.ndarray:
        raise NotImplementedError

    def reconstruct(self, case: EvalCase, seed: int) -> np.ndarray:
        out = self.raw(case, seed)
        return out if self.output_is_normalized else normalize(out)


class ZeroFillMethod(ReconMethod):
    def raw(self, case: EvalCase, seed: int) -> np.ndarray:
        return case.zero_filled


class GrappaMethod(ReconMethod):
    def __init__(self, n_src_lines: int = 4, kx: int = 5, lam: Optional[float] = None):
        self.n_src_lines = n_src_lines
        self.kx = kx
        self.lam = lam

    def raw(self, case: EvalCase, seed: int) -> np.ndarray:
        return grappa_recon(case.masked_kspace, case.mask, self.n_src_lines, self.kx, self.lam)


class NetworkMethod(ReconMethod):
    """A trained network per seed, given as checkpoint paths or ready networks."""

    output_is_normalized = True

    def __init__(self, checkpoints: Mapping[int, object]):
        self.checkpoints = dict(checkpoints)
        self._nets = {}

    def network(self, seed: int):
        if seed not in self._nets:
            source = self.checkpoints.get(seed)
            if source is None:
                raise MissingModel(f"No checkpoint supplied for seed {seed}")
            self._nets[seed] = load_checkpoint(source) if isinstance(source, str) else source
        return self._nets[seed]

    def raw(self, case: EvalCase, seed: int) -> np.ndarray:
        net = self.network(seed)
        x = normalize(case.zero_filled)
        return predict_images(net, x[None])[0].astype(np.float64)


def evaluate_methods(cases: Sequence[EvalCase], methods: Mapping[str, object],
                     seeds: Sequence[int]) -> EvalReport:
    """Per method: MSE averaged over the test set for each seed, then mean and std across seeds."""
    if not cases:
        raise ValidationError("Test set is empty")
    if any(case.truth is None for case in cases):
        raise ValidationError("Every test case needs a ground-truth image")
    if not seeds:
        raise ValidationError("At least one seed is required")

    report = EvalReport()
    for name, method in methods.items():
        per_seed = []
        for seed in seeds:
            scores = [mse(case.truth, method.reconstruct(case, seed)) for case in cases]
            per_seed.append(float(np.mean(scores)))

        values = np.asarray(per_seed)
        score = MethodScore(mse_mean=float(values.mean()), mse_std=float(values.std()),
                            n_trials=len(per_seed))
        report.per_method[name] = score
        logger.info(f"{name}: MSE {score.mse_mean:.6f} +/- {score.mse_std:.6f} over {score.n_trials} trials")

    return report


def default_methods(unet_checkpoints: Optional[Dict[int, object]] = None,
                    rdunet_checkpoints: Optional[Dict[str, Dict[int, object]]] = None,
                    n_src_lines: int = 4, kx: int = 5) -> Dict[str, object]:
    """zero-fill and GRAPPA, plus any supplied network arms keyed by display name."""
    methods: Dict[str, object] = {
        'zero-fill': ZeroFillMethod(),
        'grappa': GrappaMethod(n_src_lines, kx),
    }
    if unet_checkpoints is not None:
        methods['unet'] = NetworkMethod(unet_checkpoints)
    for label, checkpoints in (rdunet_checkpoints or {}).items():
        methods[label] = NetworkMethod(checkpoints)
    return methods
