"""Random numbers and heavy-tailed proposal steps.

Every proposal in the package draws its step size from a scale mixture of
normals, ``10**(1.5 - 6a) * b`` with ``a ~ U(0, 1)`` and ``b ~ N(0, 1)``.
Large steps (a near 0) effectively redraw a coordinate from its prior, small
ones (a near 1) move it by ~1e-4 of the prior width, so no per-level tuning
is needed.
"""
from __future__ import annotations

import math

import numpy as np

_BLOCK = 4096


class Rng:
    """Seeded generator with cheap scalar draws.

    Scalars are served from pre-drawn blocks, which keeps the per-draw cost
    of the inner MCMC loop low. Array draws go straight to the underlying
    PCG64 stream, so the output sequence depends only on the seed and the
    order of calls.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.generator = np.random.Generator(np.random.PCG64(self.seed))
        self._u: list[float] = []
        self._ui = 0
        self._n: list[float] = []
        self._ni = 0

    def spawn(self, count: int) -> list["Rng"]:
        """Independent child generators, deterministic in the parent seed."""
        seeds = np.random.SeedSequence(self.seed).spawn(count)
        return [Rng(int(s.generate_state(1, np.uint64)[0])) for s in seeds]

    def rand(self) -> float:
        """Uniform draw on [0, 1)."""
        i = self._ui
        if i == len(self._u):
            self._u = self.generator.random(_BLOCK).tolist()
            i = 0
        self._ui = i + 1
        return self._u[i]

    def randn(self) -> float:
        """Standard normal draw."""
        i = self._ni
        if i == len(self._n):
            self._n = self.generator.standard_normal(_BLOCK).tolist()
            i = 0
        self._ni = i + 1
        return self._n[i]

    def randint(self, k: int) -> int:
        """Uniform integer on {0, ..., k-1}."""
        j = int(self.rand() * k)
        return j if j < k else k - 1

    def randh(self) -> float:
        """A heavy-tailed step ``10**(1.5 - 6a) * b``."""
        return 10.0 ** (1.5 - 6.0 * self.rand()) * self.randn()

    def uniform(self, size) -> np.ndarray:
        return self.generator.random(size)

    def normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def choice(self, n: int, k: int) -> np.ndarray:
        """k distinct indices out of range(n), uniformly."""
        return self.generator.choice(n, size=k, replace=False)


def wrap_unit(x: float) -> float:
    """x mod 1 mapped into [0, 1) even under round-off."""
    y = x - math.floor(x)
    return 0.0 if y >= 1.0 else y


def step_unit(u: float, a: float, b: float) -> float:
    """Deterministic part of the heavy-tailed move for given draws (a, b)."""
    return wrap_unit(u + 10.0 ** (1.5 - 6.0 * a) * b)


def heavy_step_unit(u: float, rng: Rng) -> float:
    """Heavy-tailed symmetric move of a coordinate with a U(0, 1) prior."""
    assert 0.0 <= u < 1.0, u
    return step_unit(u, rng.rand(), rng.randn())


def heavy_step_integer(n: int, n_max: int, rng: Rng) -> int:
    """Symmetric heavy-tailed move on the discrete torus {0, ..., n_max}.

    The integer is spread uniformly over its unit cell before the
    continuous step is applied; without that the floor would make the kernel
    asymmetric. A proposal that lands back on ``n`` becomes ``n +/- 1``.
    """
    size = n_max + 1
    if size == 1:
        return 0
    x = n + rng.rand() + size * rng.randh()
    m = int(math.floor(x - size * math.floor(x / size)))
    if m >= size:
        m = size - 1
    if m == n:
        m = n + 1 if rng.rand() < 0.5 else n - 1
        m %= size
    return m
