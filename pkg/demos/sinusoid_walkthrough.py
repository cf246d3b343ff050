"""
Counting sinusoids in a noisy time series
=========================================

Simulate two sinusoids in white noise, sample the posterior over how many
sinusoids there are, and read off the evidence, the information and the
shape of the likelihood curve. Takes a few minutes on one core.

    python3 demos/sinusoid_walkthrough.py [data_seed]
"""
import sys
import time

import numpy as np

from rjnest import cli
from rjnest.dnscore import Sampler
from rjnest.models import SinusoidModel, generate_sinusoid_data, true_signal
from rjnest.postprocess import (
    equal_weight_resample,
    information,
    likelihood_curve,
    log_evidence,
    posterior_of_n,
    weight_run,
)

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 11

# The data: 1001 points on [0, 100], a slow sinusoid of amplitude 1 and
# period 30 plus a fast one of amplitude 0.3 and period 2, noise sd 0.5.
t, y = generate_sinusoid_data(seed)
print(f"{t.size} data points, residual sd about the truth "
      f"{np.std(y - true_signal(t)):.3f}")

# Up to ten sinusoids; amplitudes share an exponential prior whose mean is
# itself unknown, so the model decides how loud a typical component is.
model = SinusoidModel(t, y, n_max=10)

# Sixty levels, each enclosing about e^-1 of the prior mass of the last,
# take the sampler down to log X of about -60.
options = cli.resolve_options("sinusoid", seed=1)
print(options)

start = time.perf_counter()
result = Sampler(model, options, progress_every=2000).run()
print(f"{result.steps} steps in {time.perf_counter() - start:.0f} s")

# Each saved state is weighted by the prior mass of its likelihood bin.
weighted = weight_run(result.levels, result.samples, result.sample_columns)
log_z, stderr = log_evidence(weighted)
print(f"log Z = {log_z:.2f} +/- {stderr:.2f}")
print(f"H = {information(weighted, log_z):.1f} nats")

# The number of sinusoids is just another parameter of the posterior.
p_n = posterior_of_n(weighted, model.n_max)
for n, p in enumerate(p_n):
    if p > 1e-3:
        print(f"p(N={n}) = {p:.3f}")

# Where log L bends upward against log X the posterior is torn between a
# broad one-sinusoid slab and a narrow two-sinusoid spike.
curve = likelihood_curve(weighted, result.levels)
for a, b in curve.regions():
    print(f"concave-up between log X {curve.levels[a, 1]:.1f} and {curve.levels[b, 1]:.1f}")
for row in curve.levels[::5]:
    print(f"  level {int(row[0]):3d}  log X {row[1]:7.2f}  log L {row[2]:9.2f}")

# Equal-weight draws make ordinary summaries easy.
draws = equal_weight_resample(weighted, 2000, np.random.default_rng(0))
cols = result.sample_columns
two = draws[draws[:, cols.index("n")] == 2]
if len(two):
    periods = np.sort(two[:, [cols.index("T[0]"), cols.index("T[1]")]], axis=1)
    print(f"given N=2, median periods {np.median(periods, axis=0).round(2)}")
