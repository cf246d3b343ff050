"""Fixed-dimension model with a known evidence, for checking the sampler."""
from __future__ import annotations

import math

import numpy as np

from ..kernels import Rng, step_unit
from .base import Model


class GaussianState:
    __slots__ = ("theta", "ssq")

    def __init__(self, theta: np.ndarray, ssq: float):
        self.theta = theta
        self.ssq = ssq


class GaussianTestModel(Model):
    """Uniform prior on [-0.5, 0.5]^d, isotropic Gaussian likelihood at 0.

    Each proposal moves a heavy-tailed number of coordinates; the sum of
    squares is updated from the moved coordinates only, or recomputed in
    full when ``incremental`` is False.
    """

    name = "gaussian-test"

    def __init__(self, dim: int = 10, width: float = 0.01, incremental: bool = True):
        if dim < 1 or not 0.0 < width < 0.1:
            raise ValueError("need dim >= 1 and 0 < width < 0.1")
        self.dim = dim
        self.width = width
        self.incremental = incremental
        self._norm = -dim * math.log(width * math.sqrt(2.0 * math.pi))

    def describe(self):
        return {"model": self.name, "dim": self.dim, "width": self.width,
                "incremental": self.incremental}

    @property
    def log_evidence(self) -> float:
        return self.dim * math.log(math.erf(0.5 / (self.width * math.sqrt(2.0))))

    @property
    def information(self) -> float:
        """Prior-to-posterior KL divergence, neglecting prior truncation."""
        return self.dim * (-math.log(self.width * math.sqrt(2.0 * math.pi)) - 0.5)

    def from_prior(self, rng: Rng) -> GaussianState:
        theta = rng.uniform(self.dim) - 0.5
        return GaussianState(theta, float(theta @ theta))

    def perturb(self, state: GaussianState, rng: Rng):
        theta = state.theta.copy()
        ssq = state.ssq
        reps = 1 if rng.rand() < 0.5 else 1 + int(self.dim * 10.0 ** (-2.0 * rng.rand()))
        for _ in range(min(reps, self.dim)):
            i = rng.randint(self.dim)
            old = theta[i]
            new = step_unit(old + 0.5, rng.rand(), rng.randn()) - 0.5
            theta[i] = new
            ssq += new * new - old * old
        if not self.incremental:
            ssq = float(theta @ theta)
        return GaussianState(theta, ssq), 0.0

    def log_likelihood(self, state: GaussianState) -> float:
        return self._norm - 0.5 * state.ssq / (self.width * self.width)

    def log_likelihood_from_scratch(self, state: GaussianState) -> float:
        return self._norm - 0.5 * float(state.theta @ state.theta) / (self.width * self.width)

    def serialize(self, state: GaussianState) -> np.ndarray:
        return state.theta.copy()

    def deserialize(self, flat) -> GaussianState:
        theta = np.asarray(flat, dtype=float).copy()
        return GaussianState(theta, float(theta @ theta))

    def column_names(self) -> list[str]:
        return [f"theta[{i}]" for i in range(self.dim)]
