"""Diffusive Nested Sampling.

Particles explore a mixture of constrained priors ``pi(theta) 1[L > l_j] / X_j``
with an auxiliary level index ``j``. Levels are added one at a time, each
enclosing roughly ``e^-1`` of the prior mass of the one below, until
``max_num_levels`` exist; from then on the mixture weights are uniform and
the sampler just refines the level masses and saves samples.

Likelihood values carry a uniform tiebreak so that states are totally
ordered even on likelihood plateaus.
"""
from __future__ import annotations

import dataclasses
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .kernels import Rng, heavy_step_integer, heavy_step_unit

log = logging.getLogger(__name__)

__version__ = "0.1.0"

LEVEL_QUANTILE = 1.0 - math.exp(-1.0)
REFINE_PSEUDOCOUNT = 100.0
ENFORCE_PSEUDOCOUNT = 1000.0
REFINE_INTERVAL = 100
SPOT_CHECK_EVERY = 100
SPOT_CHECK_RTOL = 1e-6


class LikelihoodValue(NamedTuple):
    """``(log_l, tiebreak)``, ordered lexicographically."""

    log_l: float
    tiebreak: float


BOTTOM = LikelihoodValue(-math.inf, 0.0)


class LikelihoodError(FloatingPointError):
    """The model returned NaN; ``state`` holds the offending serialization."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state


class CacheConsistencyError(AssertionError):
    pass


@dataclass
class Options:
    num_particles: int = 1
    new_level_interval: int = 10000
    save_interval: int = 1000
    max_num_levels: int = 100
    lam: float = 10.0
    beta: float = 10.0
    max_num_saves: int = 10000
    seed: int = 0

    def __post_init__(self):
        for name in ("num_particles", "new_level_interval", "save_interval",
                     "max_num_levels", "max_num_saves"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
            setattr(self, name, int(getattr(self, name)))
        if not self.lam > 0:
            raise ValueError("lambda must be > 0")
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        self.seed = int(self.seed)

    def items(self):
        """``(file key, value)`` pairs; ``lam`` is spelled ``lambda`` on disk."""
        for f in dataclasses.fields(self):
            yield ("lambda" if f.name == "lam" else f.name), getattr(self, f.name)


def parse_options(text: str, base: Options | None = None) -> Options:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    known = {f.name: f for f in dataclasses.fields(Options)}
    values = dataclasses.asdict(base) if base is not None else {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        name = "lam" if key == "lambda" else key
        if name not in known or key == "lam":
            raise ValueError(f"line {lineno}: unknown option {key!r}")
        kind = known[name].type
        try:
            values[name] = float(value) if kind in (float, "float") else int(value)
        except ValueError:
            raise ValueError(f"line {lineno}: bad value for {key}: {value!r}") from None
    return Options(**values)


def read_options(path, base: Options | None = None) -> Options:
    return parse_options(Path(path).read_text(), base)


def format_options(options: Options) -> str:
    return "".join(f"{k} = {v}\n" for k, v in options.items())


# level bookkeeping


@dataclass
class Levels:
    """Thresholds and statistics, stored column-wise for speed."""

    thresholds: list = field(default_factory=lambda: [BOTTOM])
    log_x: list = field(default_factory=lambda: [0.0])
    visits: list = field(default_factory=lambda: [0])
    exceeds: list = field(default_factory=lambda: [0])
    accepts: list = field(default_factory=lambda: [0])
    tries: list = field(default_factory=lambda: [0])

    def __len__(self):
        return len(self.thresholds)

    def append(self, threshold: LikelihoodValue) -> None:
        self.thresholds.append(threshold)
        self.log_x.append(self.log_x[-1] - 1.0)
        for counts in (self.visits, self.exceeds, self.accepts, self.tries):
            counts.append(0)

    def as_array(self) -> np.ndarray:
        """Rows of the levels file."""
        n = len(self)
        return np.column_stack([
            np.arange(n), self.log_x,
            [t.log_l for t in self.thresholds], [t.tiebreak for t in self.thresholds],
            self.visits, self.exceeds, self.accepts, self.tries,
        ])

    @classmethod
    def from_array(cls, table) -> "Levels":
        table = np.atleast_2d(np.asarray(table, dtype=float))
        lv = cls([], [], [], [], [], [])
        for row in table:
            lv.thresholds.append(LikelihoodValue(float(row[2]), float(row[3])))
            lv.log_x.append(float(row[1]))
            for counts, v in zip((lv.visits, lv.exceeds, lv.accepts, lv.tries), row[4:8]):
                counts.append(int(v))
        return lv


LEVEL_COLUMNS = ["level_index", "log_x", "log_l_threshold", "tiebreak_threshold",
                 "visits", "exceeds", "accepts", "tries"]


def level_weights(num_levels: int, lam: float, complete: bool) -> np.ndarray:
    """Normalized mixture weights: uniform once complete, else tilted to the top."""
    if complete:
        return np.full(num_levels, 1.0 / num_levels)
    w = np.exp((np.arange(num_levels) - (num_levels - 1)) / lam)
    return w / w.sum()


def create_level(buffer: list) -> tuple[LikelihoodValue, list]:
    """Threshold at the ``1 - e^-1`` quantile of ``buffer``, and the pruned buffer."""
    ordered = sorted(buffer)
    threshold = ordered[int(LEVEL_QUANTILE * len(ordered))]
    return threshold, [v for v in buffer if v > threshold]


def refine_log_x(levels: Levels, pseudocount: float = REFINE_PSEUDOCOUNT) -> None:
    """Re-estimate enclosed masses from the traffic between adjacent levels."""
    if len(levels) < 2:
        return
    exceeds = np.asarray(levels.exceeds[:-1], dtype=float)
    visits = np.asarray(levels.visits[:-1], dtype=float)
    ratio = (exceeds + pseudocount * math.exp(-1.0)) / (visits + pseudocount)
    levels.log_x[1:] = np.cumsum(np.log(ratio)).tolist()


def index_acceptance(j: int, j_new: int, levels: Levels, log_w, beta: float) -> float:
    """Log acceptance ratio of moving a particle from level j to j_new."""
    r = log_w[j_new] - log_w[j] + levels.log_x[j] - levels.log_x[j_new]
    if beta:
        r += beta * (math.log(levels.visits[j] + ENFORCE_PSEUDOCOUNT)
                     - math.log(levels.visits[j_new] + ENFORCE_PSEUDOCOUNT))
    return r


def index_move(j: int, value: LikelihoodValue, levels: Levels, log_w, beta: float,
               rng: Rng) -> int:
    """One Metropolis update of a particle's level index."""
    n = len(levels)
    if n == 1:
        return j
    j_new = heavy_step_integer(j, n - 1, rng)
    if not value > levels.thresholds[j_new]:
        return j
    r = index_acceptance(j, j_new, levels, log_w, beta)
    if r >= 0.0 or rng.rand() < math.exp(r):
        return j_new
    return j


class Particle:
    __slots__ = ("state", "value", "level", "rng")

    def __init__(self, state, value: LikelihoodValue, level: int, rng: Rng):
        self.state = state
        self.value = value
        self.level = level
        self.rng = rng


def particle_move(particle: Particle, threshold: LikelihoodValue, model) -> bool:
    """Metropolis step under the constraint ``value > threshold``.

    The model proposal is judged with the current tiebreak, then the tiebreak
    gets its own constrained heavy-tailed move. Each half leaves the target
    invariant; a joint move would stall on plateaus, where only a sliver of
    tiebreak values clears a high threshold. Returns whether the model
    proposal was accepted; on rejection the state is left as it was.
    """
    rng = particle.rng
    accepted = False
    proposal, logh = model.perturb(particle.state, rng)
    if logh >= 0.0 or rng.rand() < math.exp(logh):
        log_l = model.log_likelihood(proposal)
        if log_l != log_l:
            raise LikelihoodError("likelihood is NaN", model.serialize(proposal))
        value = LikelihoodValue(log_l, particle.value.tiebreak)
        if value > threshold:
            particle.state = proposal
            particle.value = value
            accepted = True
    value = LikelihoodValue(particle.value.log_l, heavy_step_unit(particle.value.tiebreak, rng))
    if value > threshold:
        particle.value = value
    return accepted


@dataclass
class RunResult:
    levels: Levels
    samples: np.ndarray  # sample_id, level_index, log_l, tiebreak, model columns
    columns: list
    options: Options
    header: dict
    steps: int

    @property
    def sample_columns(self) -> list[str]:
        return ["sample_id", "level_index", "log_l", "tiebreak"] + list(self.columns)


class Sampler:
    """Round-robin Diffusive Nested Sampling driver.

    All particles share one level structure. Each step moves one particle,
    then its level index, then records its likelihood for level creation and
    mass estimation. For a fixed seed the whole run is reproducible.
    """

    def __init__(self, model, options: Options, progress_every: int = 0, stream=None):
        self.model = model
        self.options = options
        self.rng = Rng(options.seed)
        self.levels = Levels()
        self.buffer: list = []
        self.complete = options.max_num_levels == 1
        self.steps = 0
        self.progress_every = progress_every
        self.stream = stream if stream is not None else sys.stderr
        rngs = self.rng.spawn(options.num_particles)
        self.particles = []
        for prng in rngs:
            state = model.from_prior(prng)
            log_l = model.log_likelihood(state)
            if log_l != log_l:
                raise LikelihoodError("likelihood is NaN", model.serialize(state))
            self.particles.append(Particle(state, LikelihoodValue(log_l, prng.rand()), 0, prng))
        self._update_weights()
        ncol = 4 + len(model.column_names())
        self.samples = np.empty((min(options.max_num_saves, 1 << 16), ncol))
        self.num_saved = 0

    def _update_weights(self):
        n = len(self.levels)
        self.log_w = np.log(level_weights(n, self.options.lam, self.complete)).tolist()
        self.beta = 0.0 if self.complete else self.options.beta

    def header(self) -> dict:
        return {"version": __version__, **dict(self.options.items()), **self.model.describe()}

    def _bookkeep(self, p: Particle):
        lv = self.levels
        j = p.level
        top = len(lv) - 1
        if j < top:
            lv.visits[j] += 1
            if p.value > lv.thresholds[j + 1]:
                lv.exceeds[j] += 1
        if not self.complete and p.value > lv.thresholds[top]:
            self.buffer.append(p.value)
            if len(self.buffer) >= self.options.new_level_interval:
                self._add_level()

    def _add_level(self):
        threshold, self.buffer = create_level(self.buffer)
        self.levels.append(threshold)
        if len(self.levels) >= self.options.max_num_levels:
            self.complete = True
            self.buffer = []
        refine_log_x(self.levels)
        self._update_weights()

    def _save(self, p: Particle):
        if self.num_saved == len(self.samples):
            grown = np.empty((min(2 * len(self.samples), self.options.max_num_saves),
                              self.samples.shape[1]))
            grown[: self.num_saved] = self.samples
            self.samples = grown
        row = self.samples[self.num_saved]
        row[0] = self.num_saved
        row[1] = p.level
        row[2] = p.value.log_l
        row[3] = p.value.tiebreak
        row[4:] = self.model.serialize(p.state)
        if self.num_saved % SPOT_CHECK_EVERY == 0:
            fresh = self.model.log_likelihood_from_scratch(p.state)
            if abs(fresh - p.value.log_l) > SPOT_CHECK_RTOL * max(1.0, abs(fresh)):
                raise CacheConsistencyError(
                    f"cached log-likelihood {p.value.log_l!r} != recomputed {fresh!r}")
        self.num_saved += 1

    def step(self) -> None:
        i = self.steps % len(self.particles)
        p = self.particles[i]
        lv = self.levels
        j = p.level
        lv.tries[j] += 1
        if particle_move(p, lv.thresholds[j], self.model):
            lv.accepts[j] += 1
        p.level = index_move(j, p.value, lv, self.log_w, self.beta, p.rng)
        self._bookkeep(p)
        self.steps += 1
        if self.steps % REFINE_INTERVAL == 0:
            refine_log_x(lv)
        if self.steps % self.options.save_interval == 0:
            self._save(p)
            if self.progress_every and self.num_saved % self.progress_every == 0:
                self.report()

    def report(self) -> None:
        lv = self.levels
        top = lv.thresholds[-1].log_l
        bands = np.array_split(np.arange(len(lv)), min(4, len(lv)))
        rates = []
        for band in bands:
            a = sum(lv.accepts[k] for k in band)
            t = sum(lv.tries[k] for k in band)
            rates.append(f"{a / t:.2f}" if t else "-")
        print(f"saves {self.num_saved}/{self.options.max_num_saves}  levels {len(lv)}"
              f"  top log_l {top:.3f}  log_x {lv.log_x[-1]:.2f}"
              f"  acceptance by band {' '.join(rates)}", file=self.stream)

    def run(self) -> RunResult:
        while self.num_saved < self.options.max_num_saves:
            self.step()
        refine_log_x(self.levels)
        return RunResult(self.levels, self.samples[: self.num_saved],
                         self.model.column_names(), self.options, self.header(), self.steps)


def run(model, options: Options, out_dir=None, progress_every: int = 0) -> RunResult:
    """Run the sampler to ``max_num_saves`` and optionally write its files."""
    result = Sampler(model, options, progress_every=progress_every).run()
    if out_dir is not None:
        write_run(result, out_dir)
    return result


# files


def header_lines(header: dict) -> str:
    return "".join(f"# {k} = {v}\n" for k, v in header.items())


def _write_table(path: Path, header: dict, columns, rows) -> None:
    with open(path, "w") as fh:
        fh.write(header_lines(header))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def write_run(result: RunResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_table(out / "levels.csv", result.header, LEVEL_COLUMNS, result.levels.as_array())
    _write_table(out / "samples.csv", result.header, result.sample_columns, result.samples)
    (out / "options.txt").write_text(
        header_lines({k: v for k, v in result.header.items() if k not in dict(result.options.items())})
        + format_options(result.options))


def read_table(path) -> tuple[dict, list, np.ndarray]:
    """Header dict, column names and data of a file written by ``write_run``."""
    header = {}
    with open(path) as fh:
        text = fh.read()
    if text and not text.endswith("\n"):
        raise ValueError(f"{path}: truncated (no final newline)")
    lines = text.splitlines()
    k = 0
    while k < len(lines) and lines[k].startswith("#"):
        key, _, value = lines[k][1:].partition("=")
        header[key.strip()] = value.strip()
        k += 1
    if k >= len(lines):
        raise ValueError(f"{path}: missing column header")
    columns = lines[k].split(",")
    body = [ln for ln in lines[k + 1:] if ln.strip()]
    data = np.array([[float(x) for x in ln.split(",")] for ln in body]) if body else np.empty((0, len(columns)))
    if data.ndim != 2 or data.shape[1] != len(columns):
        raise ValueError(f"{path}: ragged or truncated rows")
    return header, columns, data
