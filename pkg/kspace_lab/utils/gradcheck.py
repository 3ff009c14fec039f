"""
Central finite-difference checks for hand-written backward passes.

A layer is checked through the scalar loss sum(forward(x) * G) for a fixed random
G, so backward(G) is the exact gradient of that loss. Sampled coordinates of
the input and of every parameter array are then perturbed by +/- eps and the
difference quotients compared against the reverse-mode values.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> float:
    """||a - n|| / max(||a||, ||n||); plain ||a - n|| when both norms are below `floor`."""
    diff = float(np.linalg.norm(np.ravel(analytic) - np.ravel(numeric)))
    scale = max(float(np.linalg.norm(analytic)), float(np.linalg.norm(numeric)))
    return diff / scale if scale > floor else diff


def sample_indices(shape: Tuple[int, ...], rng: np.random.Generator, n_samples: Optional[int]) -> List[tuple]:
    size = int(np.prod(shape))
    if n_samples is None or size <= n_samples:
        flat = np.arange(size)
    else:
        flat = np.sort(rng.choice(size, n_samples, replace=False))
    return [tuple(int(i) for i in np.unravel_index(k, shape)) for k in flat]


def numerical_gradient(f: Callable[[], float], array: np.ndarray, indices: List[tuple],
                       eps: float = 1e-5) -> np.ndarray:
    """Central differences of the scalar f() w.r.t. `array` entries, perturbed in place."""
    grads = np.empty(len(indices))
    for k, index in enumerate(indices):
        original = array[index]
        array[index] = original + eps
        plus = f()
        array[index] = original - eps
        minus = f()
        array[index] = original
        grads[k] = (plus - minus) / (2.0 * eps)
    return grads


def directional_derivative(f: Callable[[np.ndarray], float], x: np.ndarray, direction: np.ndarray,
                           eps: float = 1e-5) -> float:
    return (f(x + eps * direction) - f(x - eps * direction)) / (2.0 * eps)


@dataclass
class GradCheckResult:
    errors: Dict[str, float] = field(default_factory=dict)

    @property
    def worst(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

    def failing(self, tolerance: float) -> Dict[str, float]:
        return {name: err for name, err in self.errors.items() if err >= tolerance}


def check_gradients(module, x: np.ndarray, rng: np.random.Generator, n_samples: Optional[int] = 8,
                    eps: float = 1e-5) -> GradCheckResult:
    """Compare `module.backward` against central differences for its input and parameters.

    `module` is any object with forward/backward and, optionally, the Layer
    parameter interface. The input is copied to 64-bit; the module should be
    built in 64-bit too.
    """
    x = np.array(x, dtype=np.float64)
    if hasattr(module, 'train'):
        module.train()

    weights = rng.standard_normal(module.forward(x).shape)
    if hasattr(module, 'zero_grad'):
        module.zero_grad()
    module.forward(x)
    grad_in = module.backward(weights)

    def weighted_loss() -> float:
        return float(np.sum(module.forward(x) * weights))

    result = GradCheckResult()
    indices = sample_indices(x.shape, rng, n_samples)
    numeric = numerical_gradient(weighted_loss, x, indices, eps)
    result.errors['input'] = relative_error(np.array([grad_in[i] for i in indices]), numeric)

    named = list(module.named_parameters()) if hasattr(module, 'named_parameters') else []
    for name, layer, key in named:
        array = layer.params[key]
        analytic = layer.grads[key]
        indices = sample_indices(array.shape, rng, n_samples)
        numeric = numerical_gradient(weighted_loss, array, indices, eps)
        result.errors[name] = relative_error(np.array([analytic[i] for i in indices]), numeric)

    for name, err in result.errors.items():
        logger.debug(f"gradcheck {type(module).__name__}.{name}: relative error {err:.3e}")
    return result
