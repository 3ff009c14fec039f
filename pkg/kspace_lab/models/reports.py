from dataclasses import dataclass, field
from typing import Dict, List, Optional


@dataclass(frozen=True)
class LossReport:
    """Components of the image-plus-Fourier training objective."""

    total: float
    l2_term: float
    fourier_term: float
    alpha: float

    def to_dict(self):
        return {
            'total': self.total,
            'l2_term': self.l2_term,
            'fourier_term': self.fourier_term,
            'alpha': self.alpha,
        }


@dataclass(frozen=True)
class EpochRecord:
    """Mean training loss of one epoch, plus held-out scores when available."""

    epoch: int
    lr: float
    train: LossReport
    iterations: int
    validation: Optional[LossReport] = None
    validation_mse: Optional[float] = None


@dataclass(frozen=True)
class MethodScore:
    mse_mean: float
    mse_std: float
    n_trials: int

    def __post_init__(self):
        if self.mse_mean < 0 or self.mse_std < 0 or self.n_trials < 1:
            raise ValueError(f"Invalid method score {self}")


@dataclass
class EvalReport:
    """Per-method MSE statistics across trials."""

    per_method: Dict[str, MethodScore] = field(default_factory=dict)

    def ranked(self) -> List[str]:
        """Method names ordered from lowest to highest mean MSE."""
        return sorted(self.per_method, key=lambda name: self.per_method[name].mse_mean)

    def to_text(self) -> str:
        """Plain-text table."""
        width = max([len('method')] + [len(name) for name in self.per_method])
        lines = [f"{'method':<{width}}  {'mse_mean':>12}  {'mse_std':>12}  {'trials':>6}"]
        for name, score in self.per_method.items():
            lines.append(
                f"{name:<{width}}  {score.mse_mean:>12.6f}  {score.mse_std:>12.6f}  {score.n_trials:>6d}"
            )
        return '\n'.join(lines) + '\n'

    def to_key_values(self) -> str:
        """Machine-readable `key = value` lines."""
        lines = []
        for name, score in self.per_method.items():
            lines.append(f"{name}.mse_mean = {score.mse_mean!r}")
            lines.append(f"{name}.mse_std = {score.mse_std!r}")
            lines.append(f"{name}.n_trials = {score.n_trials}")
        return '\n'.join(lines) + '\n'
