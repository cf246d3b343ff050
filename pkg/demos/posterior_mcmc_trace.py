"""
Plain posterior MCMC on the sinusoid problem
============================================

Run ordinary Metropolis-Hastings on the posterior itself, with the same
proposals the nested sampler uses, and watch log L. The chain tends to sit
in one phase (one sinusoid, or two) for long stretches because the route
between them crosses a region of low posterior mass. Optional and slow.

    python3 demos/posterior_mcmc_trace.py [iterations] [data_seed]
"""
import math
import sys

import numpy as np

from rjnest.kernels import Rng
from rjnest.models import SinusoidModel, generate_sinusoid_data

iterations = int(sys.argv[1]) if len(sys.argv) > 1 else 2_000_000
seed = int(sys.argv[2]) if len(sys.argv) > 2 else 11

t, y = generate_sinusoid_data(seed)
model = SinusoidModel(t, y)
rng = Rng(5)
state = model.from_prior(rng)
log_l = model.log_likelihood(state)

# Metropolis on the posterior: prior proposals times the likelihood ratio.
thin = max(iterations // 2000, 1)
trace = []
n_trace = []
for it in range(iterations):
    proposal, log_h = model.perturb(state, rng)
    new_log_l = model.log_likelihood(proposal)
    if math.log(rng.rand() + 1e-300) < log_h + new_log_l - log_l:
        state, log_l = proposal, new_log_l
    if it % thin == 0:
        trace.append(log_l)
        n_trace.append(state.comps.n)

trace = np.array(trace)
n_trace = np.array(n_trace)

# A coarse text trace: one line per 5% of the run.
for chunk, ns in zip(np.array_split(trace, 20), np.array_split(n_trace, 20)):
    print(f"log L {chunk.mean():10.2f}   most common N {np.bincount(ns).argmax()}")

# Count switches between the low and high log L phases after burn-in.
settled = trace[len(trace) // 10:]
split = 0.5 * (np.percentile(settled, 10) + np.percentile(settled, 90))
phase = settled > split
print(f"phase boundary log L ~ {split:.1f}, switches seen: {int(np.sum(phase[1:] != phase[:-1]))}")
