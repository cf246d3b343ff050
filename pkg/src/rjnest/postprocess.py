"""Posterior weights, evidence and diagnostics from a sampler run.

Each saved sample is binned by its own likelihood: bin ``j`` holds samples
above level ``j``'s threshold but not above level ``j + 1``'s, and so stands
for prior mass ``X_j - X_{j+1}`` (the top bin for all of ``X_top``). Within a
bin the mass is shared equally among its samples, and a sample's posterior
weight is that share times its likelihood.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .dnscore import LEVEL_COLUMNS, Levels, read_table

SAMPLE_META = ["sample_id", "level_index", "log_l", "tiebreak"]


class EmptyBinWarning(UserWarning):
    pass


@dataclass
class WeightedSamples:
    """Samples with their bins and unnormalized log posterior weights."""

    log_l: np.ndarray
    tiebreak: np.ndarray
    bins: np.ndarray
    log_weight: np.ndarray
    bin_log_mass: np.ndarray
    records: np.ndarray | None = None
    columns: list | None = None

    @property
    def probabilities(self) -> np.ndarray:
        return np.exp(self.log_weight - logsumexp(self.log_weight))

    def column(self, name: str) -> np.ndarray:
        return self.records[:, self.columns.index(name)]


def bin_samples(log_l, tiebreak, thresholds) -> np.ndarray:
    """Index of the highest threshold each ``(log_l, tiebreak)`` exceeds.

    ``thresholds`` is a sequence of ``(log_l, tiebreak)`` pairs in increasing
    order.
    """
    log_l = np.asarray(log_l, dtype=float)
    tiebreak = np.asarray(tiebreak, dtype=float)
    t_l = np.array([t[0] for t in thresholds])
    t_b = np.array([t[1] for t in thresholds])
    below = np.searchsorted(t_l, log_l, side="left")
    ties = np.searchsorted(t_l, log_l, side="right") - below
    count = below.copy()
    for s in np.flatnonzero(ties):
        lo = below[s]
        count[s] += np.searchsorted(t_b[lo : lo + ties[s]], tiebreak[s], side="left")
    return count - 1


def bin_log_masses(log_x) -> np.ndarray:
    """``log(X_j - X_{j+1})`` for each level, ``log X_top`` for the top one."""
    log_x = np.asarray(log_x, dtype=float)
    out = log_x.copy()
    with np.errstate(divide="ignore"):
        out[:-1] = log_x[:-1] + np.log1p(-np.exp(log_x[1:] - log_x[:-1]))
    return out


def assign_weights(log_l, tiebreak, levels: Levels, records=None, columns=None,
                   warn_fraction: float = 1e-3) -> WeightedSamples:
    """Posterior weights for saved samples given refined levels."""
    log_l = np.asarray(log_l, dtype=float)
    if log_l.size == 0:
        raise ValueError("no samples to weight; the run was too short")
    bins = bin_samples(log_l, tiebreak, levels.thresholds)
    if np.any(bins < 0):
        raise ValueError("a sample lies below the bottom level")
    nlev = len(levels)
    counts = np.bincount(bins, minlength=nlev)
    log_mass = bin_log_masses(levels.log_x)
    with np.errstate(divide="ignore"):
        log_weight = log_mass[bins] - np.log(counts[bins]) + log_l
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        log_z = logsumexp(log_weight)
        floor = np.array([levels.thresholds[j][0] for j in empty])
        missing = log_mass[empty] + np.where(np.isfinite(floor), floor, -np.inf)
        if np.any(missing > log_z + math.log(warn_fraction)):
            warnings.warn(
                f"{empty.size} level bin(s) without samples may hold non-negligible "
                "evidence; run longer", EmptyBinWarning, stacklevel=2)
    return WeightedSamples(log_l, np.asarray(tiebreak, dtype=float), bins, log_weight,
                           log_mass, records, columns)


def weight_run(levels: Levels, samples: np.ndarray, columns) -> WeightedSamples:
    """``assign_weights`` on a samples table laid out as in the samples file."""
    return assign_weights(samples[:, 2], samples[:, 3], levels, samples, list(columns))


def log_evidence(weighted: WeightedSamples, rng=None, replicates: int = 100) -> tuple[float, float]:
    """``log Z`` and its bootstrap standard error over resampled records."""
    log_z = float(logsumexp(weighted.log_weight))
    if rng is None:
        rng = np.random.default_rng(0)
    n = weighted.log_l.size
    nlev = weighted.bin_log_mass.size
    l_max = weighted.log_l.max()
    lik = np.exp(weighted.log_l - l_max)
    mass = np.exp(weighted.bin_log_mass - weighted.bin_log_mass.max())
    reps = np.empty(replicates)
    for r in range(replicates):
        idx = rng.integers(0, n, n)
        b = weighted.bins[idx]
        counts = np.bincount(b, minlength=nlev)
        sums = np.bincount(b, weights=lik[idx], minlength=nlev)
        filled = counts > 0
        z = np.sum(mass[filled] * sums[filled] / counts[filled])
        reps[r] = math.log(z) if z > 0 else -math.inf
    reps += l_max + weighted.bin_log_mass.max()
    stderr = float(np.std(reps[np.isfinite(reps)], ddof=1)) if replicates > 1 else 0.0
    return log_z, stderr


def information(weighted: WeightedSamples, log_z: float | None = None) -> float:
    """KL divergence from prior to posterior in nats."""
    if log_z is None:
        log_z = float(logsumexp(weighted.log_weight))
    p = weighted.probabilities
    return float(np.sum(p * (weighted.log_l - log_z)))


def posterior_of_n(weighted: WeightedSamples, n_max: int | None = None,
                   column: str = "n") -> np.ndarray:
    """Posterior probabilities of ``n = 0 .. n_max``."""
    n = np.rint(weighted.column(column)).astype(int)
    if n_max is None:
        n_max = int(n.max())
    return np.bincount(n, weights=weighted.probabilities, minlength=n_max + 1)


def systematic_resample(probabilities, count: int, rng) -> np.ndarray:
    """Indices drawn by systematic resampling; multiplicities average ``count * p``."""
    cdf = np.cumsum(probabilities)
    cdf /= cdf[-1]
    points = (rng.random() + np.arange(count)) / count
    return np.minimum(np.searchsorted(cdf, points, side="right"), len(cdf) - 1)


def equal_weight_resample(weighted: WeightedSamples, count: int, rng=None) -> np.ndarray:
    """Records resampled to equal weight."""
    if rng is None:
        rng = np.random.default_rng(0)
    return weighted.records[systematic_resample(weighted.probabilities, count, rng)]


def sample_log_x(weighted: WeightedSamples, log_x) -> np.ndarray:
    """Per-sample prior mass estimate, spread by likelihood rank within each bin."""
    log_x = np.asarray(log_x, dtype=float)
    x_hi = np.exp(log_x)
    x_lo = np.append(x_hi[1:], 0.0)
    out = np.empty(weighted.log_l.size)
    order = np.lexsort((weighted.tiebreak, weighted.log_l, weighted.bins))
    b_sorted = weighted.bins[order]
    starts = np.searchsorted(b_sorted, np.arange(log_x.size), side="left")
    ends = np.searchsorted(b_sorted, np.arange(log_x.size), side="right")
    for j in range(log_x.size):
        k = ends[j] - starts[j]
        if k == 0:
            continue
        frac = (np.arange(k) + 0.5) / k
        out[order[starts[j] : ends[j]]] = np.log(x_hi[j] - frac * (x_hi[j] - x_lo[j]))
    return out


def concave_up_flags(log_x, log_l, window: int = 3) -> np.ndarray:
    """Levels inside runs of at least ``window`` positive second differences.

    A heuristic marker of phase transitions: log L against log X bends
    upwards where a low-volume, high-likelihood phase takes over.
    """
    x = np.asarray(log_x, dtype=float)
    y = np.asarray(log_l, dtype=float)
    flags = np.zeros(x.size, dtype=bool)
    if x.size < 3:
        return flags
    slope = np.diff(y) / np.diff(x)
    d2 = 2.0 * np.diff(slope) / (x[2:] - x[:-2])
    positive = np.concatenate([[False], d2 > 0.0, [False]])
    j = 0
    while j < x.size:
        if positive[j]:
            k = j
            while k < x.size and positive[k]:
                k += 1
            if k - j >= window:
                flags[j:k] = True
            j = k
        else:
            j += 1
    return flags


def flagged_regions(log_x, flags) -> list[tuple[int, int]]:
    """``(first, last)`` level index of each run of flags."""
    out = []
    j = 0
    while j < len(flags):
        if flags[j]:
            k = j
            while k + 1 < len(flags) and flags[k + 1]:
                k += 1
            out.append((j, k))
            j = k + 1
        else:
            j += 1
    return out


@dataclass
class Curve:
    levels: np.ndarray  # level_index, log_x, log_l, flag_concave_up
    samples: np.ndarray  # log_x, log_l, posterior probability

    def regions(self) -> list[tuple[int, int]]:
        return flagged_regions(self.levels[:, 1], self.levels[:, 3].astype(bool))


def likelihood_curve(weighted: WeightedSamples, levels: Levels, window: int = 3) -> Curve:
    """log L against log X per level with concave-up flags, plus sample scatter."""
    log_x = np.asarray(levels.log_x)
    log_l = np.array([t[0] for t in levels.thresholds])
    flags = np.zeros(len(levels), dtype=bool)
    # level 0 has no finite threshold
    flags[1:] = concave_up_flags(log_x[1:], log_l[1:], window)
    table = np.column_stack([np.arange(len(levels)), log_x, log_l, flags.astype(float)])
    scatter = np.column_stack([sample_log_x(weighted, log_x), weighted.log_l,
                               weighted.probabilities])
    return Curve(table, scatter)


def weight_profile_peaks(curve: Curve, bin_width: float = 2.0, dip: float = 0.5) -> list[float]:
    """Centres of well-separated peaks of posterior weight against log X.

    Weights are histogrammed in ``bin_width``-nat bins; a peak counts if the
    histogram falls below ``dip`` times the smaller of it and its
    predecessor somewhere in between.
    """
    lx, _, p = curve.samples.T
    edges = np.arange(np.floor(lx.min()), np.ceil(lx.max()) + bin_width, bin_width)
    hist, _ = np.histogram(lx, bins=edges, weights=p)
    centres = 0.5 * (edges[1:] + edges[:-1])
    maxima = [i for i in range(len(hist))
              if hist[i] > 0 and (i == 0 or hist[i] >= hist[i - 1])
              and (i == len(hist) - 1 or hist[i] > hist[i + 1])]
    peaks: list[int] = []
    for i in maxima:
        if not peaks:
            peaks.append(i)
            continue
        prev = peaks[-1]
        lowest = hist[prev : i + 1].min()
        if lowest < dip * min(hist[prev], hist[i]):
            peaks.append(i)
        elif hist[i] > hist[prev]:
            peaks[-1] = i
    return [float(centres[i]) for i in peaks]


# files


def load_run(run_dir):
    """``(levels, samples, model_columns, header)`` from a run directory."""
    run_dir = Path(run_dir)
    header, lcols, ltab = read_table(run_dir / "levels.csv")
    if lcols != LEVEL_COLUMNS:
        raise ValueError(f"{run_dir / 'levels.csv'}: unexpected columns")
    _, scols, stab = read_table(run_dir / "samples.csv")
    if scols[:4] != SAMPLE_META:
        raise ValueError(f"{run_dir / 'samples.csv'}: unexpected columns")
    return Levels.from_array(ltab), stab, scols, header


def _write(path: Path, header: dict, columns, rows, fmt=repr) -> None:
    with open(path, "w") as fh:
        fh.write("".join(f"# {k} = {v}\n" for k, v in header.items()))
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(x) for x in row) + "\n")


def postprocess_run(run_dir, resample_count: int | None = None, seed: int = 0) -> dict:
    """Weight a finished run and write results, curve and resampled files."""
    run_dir = Path(run_dir)
    levels, samples, columns, header = load_run(run_dir)
    weighted = weight_run(levels, samples, columns)
    rng = np.random.default_rng(seed)
    log_z, stderr = log_evidence(weighted, rng)
    h = information(weighted, log_z)
    out = {"log_z": log_z, "log_z_stderr": stderr, "information_nats": h}
    rows = [["log_z", repr(log_z)], ["log_z_stderr", repr(stderr)], ["information_nats", repr(h)]]
    if "n" in columns:
        n_max = int(header.get("n_max", int(samples[:, columns.index("n")].max())))
        pn = posterior_of_n(weighted, n_max)
        out["posterior_of_n"] = pn
        rows += [[f"p(n={k})", repr(float(v))] for k, v in enumerate(pn)]
    _write(run_dir / "results.csv", header, ["quantity", "value"], rows, fmt=str)

    curve = likelihood_curve(weighted, levels)
    out["curve"] = curve
    _write(run_dir / "curve.csv", {**header, "flags": "heuristic: concave-up over >= 3 levels"},
           ["level_index", "log_x", "log_l", "flag_concave_up"], curve.levels,
           fmt=lambda x: repr(float(x)))
    _write(run_dir / "curve_samples.csv", header, ["log_x", "log_l", "posterior_weight"],
           curve.samples, fmt=lambda x: repr(float(x)))

    count = resample_count if resample_count is not None else len(samples)
    resampled = equal_weight_resample(weighted, count, rng)
    _write(run_dir / "posterior_samples.csv", header, columns, resampled,
           fmt=lambda x: repr(float(x)))
    out["weighted"] = weighted
    return out
