from __future__ import annotations

import math

import numpy as np

from ..kernels import Rng, wrap_unit, heavy_step_unit


class Model:
    """A problem definition the sampler can explore.

    ``perturb`` must return a *new* state and leave its argument untouched;
    the sampler discards the proposal on rejection, which is all the rollback
    a cached mock signal needs. ``log_likelihood`` may read caches carried by
    the state, ``log_likelihood_from_scratch`` must not.
    """

    name = "model"

    def from_prior(self, rng: Rng):
        raise NotImplementedError

    def perturb(self, state, rng: Rng) -> tuple[object, float]:
        raise NotImplementedError

    def log_likelihood(self, state) -> float:
        raise NotImplementedError

    def log_likelihood_from_scratch(self, state) -> float:
        return self.log_likelihood(state)

    def serialize(self, state) -> np.ndarray:
        raise NotImplementedError

    def deserialize(self, flat):
        raise NotImplementedError

    def column_names(self) -> list[str]:
        raise NotImplementedError

    def describe(self) -> dict:
        """Settings worth echoing in output headers."""
        return {"model": self.name}


class ConstantLikelihood(Model):
    """Wraps a model and replaces its likelihood by zero.

    Used to check that the proposals alone sample the prior.
    """

    def __init__(self, model: Model):
        self.model = model
        self.name = f"{model.name}-constant"

    def __getattr__(self, item):
        return getattr(self.model, item)

    def from_prior(self, rng):
        return self.model.from_prior(rng)

    def perturb(self, state, rng):
        propose = getattr(self.model, "propose", None)
        if propose is None:
            return self.model.perturb(state, rng)
        # the likelihood is never read, so the mock data cache is left stale
        new, logh, _ = propose(state, rng)
        return new, logh

    def log_likelihood(self, state):
        return 0.0

    def log_likelihood_from_scratch(self, state):
        return 0.0

    def serialize(self, state):
        return self.model.serialize(state)

    def deserialize(self, flat):
        return self.model.deserialize(flat)

    def column_names(self):
        return self.model.column_names()

    def describe(self):
        return {**self.model.describe(), "model": self.name}


class LogUniform:
    """Log-uniform prior on [lo, hi] handled through its CDF."""

    def __init__(self, lo: float, hi: float):
        self.lo = lo
        self.hi = hi
        self.log_lo = math.log(lo)
        self.log_span = math.log(hi / lo)

    def to_unit(self, x: float) -> float:
        return (math.log(x) - self.log_lo) / self.log_span

    def from_unit(self, u: float) -> float:
        return math.exp(self.log_lo + u * self.log_span)

    def draw(self, rng: Rng) -> float:
        return self.from_unit(rng.rand())

    def perturb(self, x: float, rng: Rng) -> float:
        return self.from_unit(heavy_step_unit(wrap_unit(self.to_unit(x)), rng))


def gaussian_log_likelihood(ssr: float, count: int, sigma: float) -> float:
    """Independent N(0, sigma^2) errors with residual sum of squares ``ssr``."""
    return -0.5 * count * math.log(2.0 * math.pi * sigma * sigma) - ssr / (2.0 * sigma * sigma)
