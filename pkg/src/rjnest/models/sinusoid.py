"""Unknown number of sinusoids in noisy time-series data.

Each component is ``(A, T, phi)``. Amplitudes are exponential with a mean
``mu`` that is itself log-uniform on [1e-3, 1e3]; periods are log-uniform
between fixed bounds and phases uniform on [0, 2 pi). The noise level is a
free log-uniform parameter unless fixed at construction.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..kernels import Rng
from ..rjcontainer import ComponentSet, ConditionalPrior, DiffRecord
from .base import LogUniform, Model, gaussian_log_likelihood

TWO_PI = 2.0 * math.pi
MU_PRIOR = LogUniform(1e-3, 1e3)
SIGMA_PRIOR = LogUniform(1e-3, 1e3)
SIGMA_MOVE_PROB = 0.1

TRUE_COMPONENTS = np.array([[1.0, 30.0, 0.0], [0.3, 2.0, 1.0]])
TRUE_SIGMA = 0.5


class SinusoidPrior(ConditionalPrior):
    """Exponential amplitudes, log-uniform periods, uniform phases."""

    dim = 3

    def __init__(self, t_lo: float = 0.1, t_hi: float = 1000.0):
        self.t_lo = t_lo
        self.t_hi = t_hi
        self.log_t_lo = math.log(t_lo)
        self.log_t_span = math.log(t_hi / t_lo)

    def hyper_from_prior(self, rng):
        return np.array([MU_PRIOR.draw(rng)])

    def hyper_perturb(self, hyper, rng):
        return np.array([MU_PRIOR.perturb(hyper[0], rng)]), 0.0

    def to_uniform(self, x, hyper):
        u = np.empty_like(x)
        u[:, 0] = -np.expm1(-x[:, 0] / hyper[0])
        u[:, 1] = (np.log(x[:, 1]) - self.log_t_lo) / self.log_t_span
        u[:, 2] = x[:, 2] / TWO_PI
        return u

    def from_uniform(self, u, hyper):
        x = np.empty_like(u)
        x[:, 0] = -hyper[0] * np.log1p(-u[:, 0])
        x[:, 1] = np.exp(self.log_t_lo + u[:, 1] * self.log_t_span)
        x[:, 2] = TWO_PI * u[:, 2]
        return x

    def log_density(self, x, hyper):
        mu = hyper[0]
        return (
            -math.log(mu) - x[:, 0] / mu
            - np.log(x[:, 1]) - math.log(self.log_t_span)
            - math.log(TWO_PI)
        )


def sinusoid_signal(two_pi_t: np.ndarray, components: np.ndarray) -> np.ndarray:
    """Sum of ``A sin(2 pi t / T + phi)`` over the rows of ``components``."""
    if len(components) == 0:
        return np.zeros_like(two_pi_t)
    if len(components) == 1:
        a, period, phase = components[0]
        return a * np.sin(two_pi_t / period + phase)
    a, period, phase = components.T
    return a @ np.sin(np.outer(1.0 / period, two_pi_t) + phase[:, None])


class SinusoidState:
    __slots__ = ("comps", "sigma", "signal", "ssr")

    def __init__(self, comps: ComponentSet, sigma: float, signal=None, ssr=None):
        self.comps = comps
        self.sigma = sigma
        self.signal = signal
        self.ssr = ssr


class SinusoidModel(Model):
    """Sum of sinusoids observed with Gaussian noise.

    With ``incremental=True`` the mock signal is updated from the components
    a proposal removed and added; otherwise it is rebuilt on every proposal.
    """

    name = "sinusoid"

    def __init__(self, t, y, n_max: int = 10, t_lo: float = 0.1, t_hi: float = 1000.0,
                 sigma: float | None = None, incremental: bool = True):
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.two_pi_t = TWO_PI * self.t
        self.n_max = n_max
        self.prior = SinusoidPrior(t_lo, t_hi)
        self.fixed_sigma = sigma
        self.incremental = incremental

    def describe(self):
        return {
            "model": self.name, "n_max": self.n_max, "t_lo": self.prior.t_lo,
            "t_hi": self.prior.t_hi, "fixed_sigma": self.fixed_sigma,
            "num_data": len(self.t), "incremental": self.incremental,
        }

    def render(self, components) -> np.ndarray:
        return sinusoid_signal(self.two_pi_t, components)

    def _set_signal(self, state, signal):
        r = self.y - signal
        state.signal = signal
        state.ssr = float(r @ r)

    def from_prior(self, rng: Rng) -> SinusoidState:
        comps = ComponentSet.from_prior(self.prior, self.n_max, rng)
        comps.consume_diff()
        sigma = self.fixed_sigma if self.fixed_sigma is not None else SIGMA_PRIOR.draw(rng)
        state = SinusoidState(comps, sigma)
        self._set_signal(state, self.render(comps.components))
        return state

    def update_cache(self, state: SinusoidState, diff) -> None:
        """Bring the cached signal in line with the components after ``diff``."""
        comps = state.comps
        if not self.incremental:
            self._set_signal(state, self.render(comps.components))
            return
        if diff.is_empty():
            return
        if diff.all_changed or len(diff) >= comps.n:
            self._set_signal(state, self.render(comps.components))
            return
        # removed components enter with negated amplitude; one render covers both
        rows = np.array(diff.removed + diff.added)
        rows[: len(diff.removed), 0] *= -1.0
        self._set_signal(state, state.signal + self.render(rows))

    def propose(self, state: SinusoidState, rng: Rng):
        """Parameter move only; returns ``(new_state, log_factor, diff)``.

        The new state shares the old cache, which ``update_cache`` then
        brings up to date from ``diff``.
        """
        new = SinusoidState(state.comps, state.sigma, state.signal, state.ssr)
        if self.fixed_sigma is None and rng.rand() < SIGMA_MOVE_PROB:
            new.sigma = SIGMA_PRIOR.perturb(state.sigma, rng)
            return new, 0.0, DiffRecord()
        new.comps = state.comps.copy()
        logh = new.comps.perturb(rng)
        return new, logh, new.comps.consume_diff()

    def perturb(self, state: SinusoidState, rng: Rng):
        new, logh, diff = self.propose(state, rng)
        self.update_cache(new, diff)
        return new, logh

    def log_likelihood(self, state: SinusoidState) -> float:
        return gaussian_log_likelihood(state.ssr, len(self.y), state.sigma)

    def log_likelihood_from_scratch(self, state: SinusoidState) -> float:
        r = self.y - self.render(state.comps.components)
        return gaussian_log_likelihood(float(r @ r), len(self.y), state.sigma)

    def serialize(self, state: SinusoidState) -> np.ndarray:
        return np.append(state.comps.to_flat(), state.sigma)

    def deserialize(self, flat) -> SinusoidState:
        flat = np.asarray(flat, dtype=float)
        comps = ComponentSet.from_flat(self.prior, self.n_max, flat[:-1])
        state = SinusoidState(comps, float(flat[-1]))
        self._set_signal(state, self.render(comps.components))
        return state

    def column_names(self) -> list[str]:
        cols = ["n"]
        for i in range(self.n_max):
            cols += [f"A[{i}]", f"T[{i}]", f"phi[{i}]"]
        return cols + ["mu", "sigma"]


def true_signal(t) -> np.ndarray:
    """``sin(2 pi t / 30) + 0.3 sin(2 pi t / 2 + 1)``."""
    return sinusoid_signal(TWO_PI * np.asarray(t, dtype=float), TRUE_COMPONENTS)


def generate_sinusoid_data(seed: int, num_points: int = 1001, t_max: float = 100.0,
                           sigma: float = TRUE_SIGMA) -> tuple[np.ndarray, np.ndarray]:
    """Two sinusoids sampled on an even grid over [0, t_max] with white noise."""
    rng = np.random.Generator(np.random.PCG64(seed))
    t = np.linspace(0.0, t_max, num_points)
    y = true_signal(t) + sigma * rng.standard_normal(num_points)
    return t, y


def write_sinusoid_data(path, t, y, seed: int | None = None) -> None:
    lines = ["# sinusoid data: columns t Y"]
    lines.append("# true signal: sin(2 pi t/30) + 0.3 sin(2 pi t/2 + 1)")
    if seed is not None:
        lines.append(f"# seed = {seed}")
    lines += [f"{a:.17g} {b:.17g}" for a, b in zip(t, y)]
    Path(path).write_text("\n".join(lines) + "\n")


def load_sinusoid_data(path) -> tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, comments="#", ndmin=2)
    return data[:, 0], data[:, 1]
