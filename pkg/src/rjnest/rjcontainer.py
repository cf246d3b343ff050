"""Trans-dimensional component container with prior-preserving proposals.

A :class:`ComponentSet` holds an unknown number ``n`` of exchangeable
components, each a vector of ``dim`` reals, together with the hyperparameters
of their shared conditional prior. Four Metropolis proposals act on it:

* birth/death moves that change ``n``,
* moves of a few components in the conditional prior's uniform coordinates,
* hyperparameter moves that keep components fixed,
* hyperparameter moves that drag every component along.

Each returns the log of the factor to include in the Metropolis ratio so that,
with no likelihood, the chain samples ``p(n) p(alpha) prod p(x_i | alpha)``
exactly. Any hard likelihood constraint is applied by the caller.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .kernels import Rng, heavy_step_integer, heavy_step_unit

MOVES = ("n", "components", "hyper_fixed", "hyper_drag")
# CDFs can round to 1.0 far in a tail
_BELOW_ONE = np.nextafter(1.0, 0.0)


class ConditionalPrior:
    """Interface for a hierarchical prior ``p(x | alpha)`` over components.

    ``to_uniform`` (F) and ``from_uniform`` (G) act row-wise on ``(k, dim)``
    arrays and must be exact inverses; ``to_uniform`` must map draws from
    ``p(x | alpha)`` to iid U(0, 1) coordinates. ``hyper_perturb`` returns the
    proposed hyperparameters and the log of
    ``p(alpha') q(alpha | alpha') / (p(alpha) q(alpha' | alpha))``.
    """

    dim: int

    def hyper_from_prior(self, rng: Rng) -> np.ndarray:
        raise NotImplementedError

    def hyper_perturb(self, hyper: np.ndarray, rng: Rng) -> tuple[np.ndarray, float]:
        raise NotImplementedError

    def to_uniform(self, x: np.ndarray, hyper: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def from_uniform(self, u: np.ndarray, hyper: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_density(self, x: np.ndarray, hyper: np.ndarray) -> np.ndarray:
        """Per-row log density; only differences in ``hyper`` matter."""
        raise NotImplementedError


@dataclass
class DiffRecord:
    """Components removed and added since the diff was last consumed."""

    removed: list = field(default_factory=list)
    added: list = field(default_factory=list)
    all_changed: bool = False

    def __len__(self):
        return len(self.removed) + len(self.added)

    def is_empty(self) -> bool:
        return not (self.removed or self.added or self.all_changed)


class ComponentSet:
    """The state ``(n, alpha, x_1..x_n)`` of a trans-dimensional model.

    Components are stored as rows of ``components``; their order carries no
    meaning. Deaths pick rows uniformly and births append, and that
    exchangeability is what makes the birth/death acceptance factor vanish.
    """

    __slots__ = ("prior", "n_max", "components", "hyper", "diff")

    def __init__(self, prior: ConditionalPrior, n_max: int, components=None, hyper=None):
        self.prior = prior
        self.n_max = int(n_max)
        if components is None:
            components = np.empty((0, prior.dim))
        self.components = np.asarray(components, dtype=float).reshape(-1, prior.dim)
        self.hyper = None if hyper is None else np.asarray(hyper, dtype=float)
        self.diff = DiffRecord()
        if not 0 <= self.n <= self.n_max:
            raise ValueError(f"n={self.n} outside [0, {self.n_max}]")

    @classmethod
    def from_prior(cls, prior: ConditionalPrior, n_max: int, rng: Rng) -> "ComponentSet":
        hyper = prior.hyper_from_prior(rng)
        n = rng.randint(n_max + 1)
        comps = prior.from_uniform(rng.uniform((n, prior.dim)), hyper)
        out = cls(prior, n_max, comps, hyper)
        out.diff.all_changed = True
        return out

    @property
    def n(self) -> int:
        return self.components.shape[0]

    @property
    def dim(self) -> int:
        return self.prior.dim

    def copy(self) -> "ComponentSet":
        out = ComponentSet.__new__(ComponentSet)
        out.prior = self.prior
        out.n_max = self.n_max
        out.components = self.components.copy()
        out.hyper = self.hyper.copy()
        out.diff = DiffRecord(list(self.diff.removed), list(self.diff.added), self.diff.all_changed)
        return out

    # diff bookkeeping

    def _record(self, removed, added):
        d = self.diff
        if d.all_changed:
            return
        d.removed.extend(removed)
        d.added.extend(added)
        if len(d) >= self.n:
            # entries are kept for inspection; consumers must check the flag first
            d.all_changed = True

    def consume_diff(self) -> DiffRecord:
        d = self.diff
        self.diff = DiffRecord()
        return d

    # proposals

    def move_probabilities(self, n: int | None = None) -> tuple[float, float, float, float]:
        """Mixture weights over (n, components, hyper_fixed, hyper_drag).

        With no components the component move is impossible and its share is
        given to the birth/death move.
        """
        n = self.n if n is None else n
        if n == 0:
            return (0.5, 0.0, 0.25, 0.25)
        return (0.25, 0.25, 0.25, 0.25)

    def choose_move(self, rng: Rng) -> str:
        p = self.move_probabilities()
        r = rng.rand()
        acc = 0.0
        for name, w in zip(MOVES, p):
            acc += w
            if r < acc:
                return name
        return MOVES[-1]

    def perturb(self, rng: Rng) -> float:
        """Apply one randomly chosen proposal in place; return its log factor."""
        move = self.choose_move(rng)
        if move == "n":
            p_before = self.move_probabilities()[0]
            logh = self.propose_n(rng)
            # Selection probability depends on whether n == 0.
            return logh + math.log(self.move_probabilities()[0] / p_before)
        if move == "components":
            return self.propose_components(rng)
        if move == "hyper_fixed":
            return self.propose_hyper_fixed(rng)
        return self.propose_hyper_drag(rng)

    def propose_n(self, rng: Rng) -> float:
        """Birth or death of one or more components."""
        n = self.n
        if self.n_max == 0:
            return 0.0
        n_new = heavy_step_integer(n, self.n_max, rng)
        if n_new > n:
            born = self.prior.from_uniform(rng.uniform((n_new - n, self.dim)), self.hyper)
            self.components = np.vstack([self.components, born])
            self._record((), list(born))
        elif n_new < n:
            kill = rng.choice(n, n - n_new)
            keep = np.ones(n, dtype=bool)
            keep[kill] = False
            dead = self.components[kill]
            self.components = self.components[keep]
            self._record(list(dead), ())
        return 0.0

    def num_to_change(self, rng: Rng) -> int:
        """Heavy-tailed count in {1..n} with mode 1."""
        n = self.n
        k = 1 + int(n * 10.0 ** (-6.0 * rng.rand()))
        return min(max(k, 1), n)

    def propose_components(self, rng: Rng) -> float:
        """Move one coordinate of each of k components in uniform space."""
        n = self.n
        if n == 0:
            return 0.0
        k = self.num_to_change(rng)
        which = [rng.randint(n)] if k == 1 else rng.choice(n, k)
        old = self.components[which]
        u = np.minimum(self.prior.to_uniform(old, self.hyper), _BELOW_ONE)
        for row in range(k):
            c = rng.randint(self.dim)
            u[row, c] = heavy_step_unit(u[row, c], rng)
        new = self.prior.from_uniform(u, self.hyper)
        self.components[which] = new
        self._record(list(old), list(new))
        return 0.0

    def propose_hyper_fixed(self, rng: Rng) -> float:
        """Move the hyperparameters with every component held in place."""
        hyper, logq = self.prior.hyper_perturb(self.hyper, rng)
        if self.n:
            logq += float(
                np.sum(self.prior.log_density(self.components, hyper))
                - np.sum(self.prior.log_density(self.components, self.hyper))
            )
        self.hyper = hyper
        return logq

    def propose_hyper_drag(self, rng: Rng) -> float:
        """Move the hyperparameters and carry components along.

        Each component keeps its uniform coordinates, so it represents the new
        conditional prior as well as it did the old one and no density ratio
        enters the acceptance factor.
        """
        hyper, logq = self.prior.hyper_perturb(self.hyper, rng)
        if self.n:
            u = np.minimum(self.prior.to_uniform(self.components, self.hyper), _BELOW_ONE)
            self.components = self.prior.from_uniform(u, hyper)
            self.diff.removed.clear()
            self.diff.added.clear()
            self.diff.all_changed = True
        self.hyper = hyper
        return logq

    # serialization

    def to_flat(self) -> np.ndarray:
        """n, then n_max zero-padded component slots, then the hyperparameters."""
        d = self.dim
        out = np.zeros(1 + self.n_max * d + len(self.hyper))
        out[0] = self.n
        out[1 : 1 + self.n * d] = self.components.ravel()
        out[1 + self.n_max * d :] = self.hyper
        return out

    @classmethod
    def from_flat(cls, prior: ConditionalPrior, n_max: int, flat) -> "ComponentSet":
        flat = np.asarray(flat, dtype=float)
        n = int(flat[0])
        d = prior.dim
        comps = flat[1 : 1 + n_max * d].reshape(n_max, d)[:n]
        hyper = flat[1 + n_max * d :]
        return cls(prior, n_max, comps.copy(), hyper.copy())

    def flat_size(self) -> int:
        return 1 + self.n_max * self.dim + len(self.hyper)

    def column_names(self, component_names, hyper_names) -> list[str]:
        cols = ["n"]
        for i in range(self.n_max):
            cols.extend(f"{name}[{i}]" for name in component_names)
        return cols + list(hyper_names)
