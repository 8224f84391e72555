from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo integral estimate and the standard deviation of the estimator."""

    mean: float
    std: float

    @classmethod
    def zero(cls) -> "McEstimate":
        return cls(0.0, 0.0)


def uniform_cube_samples(rng: np.random.Generator, n_samples: int, shape, half_width: float) -> np.ndarray:
    """n_samples points drawn uniformly from [-half_width, half_width]^shape."""
    shape = (int(n_samples),) + tuple(np.atleast_1d(shape).astype(int))
    return rng.uniform(-half_width, half_width, size=shape)


def estimates_from_values(values: np.ndarray, volume: float):
    """
    Uniform-sampling MC estimate along the last axis.

    Returns (mean, std) arrays with the last axis reduced.
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[-1]
    mean = volume * values.mean(axis=-1)
    if n < 2:
        return mean, np.zeros_like(mean)
    std = volume * values.std(axis=-1, ddof=1) / np.sqrt(n)
    return mean, std


def mc_integrate(
    integrand: Callable[[np.ndarray], np.ndarray],
    rng: np.random.Generator,
    n_samples: int,
    shape,
    half_width: float,
) -> McEstimate:
    """Integrate over the cube [-half_width, half_width]^shape by uniform sampling."""
    samples = uniform_cube_samples(rng, n_samples, shape, half_width)
    dim = int(np.prod(shape))
    mean, std = estimates_from_values(integrand(samples), (2.0 * half_width) ** dim)
    return McEstimate(float(mean), float(std))
