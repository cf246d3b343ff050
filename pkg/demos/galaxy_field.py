"""
Cataloguing galaxies in a simulated image
=========================================

Generate a 100 x 100 pixel field holding ten galaxies, infer how many
galaxies there are and where, and compare with the truth. Expect tens of
minutes on one core.

    python3 demos/galaxy_field.py [data_seed]
"""
import sys
import time

import numpy as np

from rjnest.dnscore import Options, Sampler
from rjnest.models import GalaxyModel, generate_galaxy_data
from rjnest.postprocess import (
    equal_weight_resample,
    information,
    log_evidence,
    posterior_of_n,
    weight_run,
)

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 1

# Each galaxy is a pair of concentric elliptical Gaussians sharing a centre,
# flux, axis ratio and angle; the inner one is narrower by a factor u and
# carries a fraction v of the light.
image, catalog = generate_galaxy_data(seed, size=100, count=10)
print("true fluxes:", np.sort(catalog[:, 2]).round(1))

model = GalaxyModel(image, n_max=30)
options = Options(max_num_levels=300, new_level_interval=3000, save_interval=300,
                  max_num_saves=6000, seed=1)

start = time.perf_counter()
result = Sampler(model, options, progress_every=500).run()
print(f"{result.steps} steps in {time.perf_counter() - start:.0f} s")

weighted = weight_run(result.levels, result.samples, result.sample_columns)
log_z, stderr = log_evidence(weighted)
print(f"log Z = {log_z:.1f} +/- {stderr:.1f},  H = {information(weighted, log_z):.1f} nats")

# The posterior over the galaxy count; faint galaxies near the noise make
# it broader than one might hope.
p_n = posterior_of_n(weighted, model.n_max)
print(f"posterior mean N = {np.dot(np.arange(p_n.size), p_n):.2f} (truth {len(catalog)})")
for n, p in enumerate(p_n):
    if p > 0.01:
        print(f"p(N={n}) = {p:.3f}")

# Match the brightest inferred galaxies in one posterior draw to the truth.
draw = equal_weight_resample(weighted, 1, np.random.default_rng(0))[0]
cols = result.sample_columns
n = int(draw[cols.index("n")])
found = np.array([[draw[cols.index(f"{p}[{i}]")] for p in ("x", "y", "f")]
                  for i in range(n)]).reshape(-1, 3)
for x, y, f in sorted(found.tolist(), key=lambda r: -r[2])[:10]:
    d = np.hypot(catalog[:, 0] - x, catalog[:, 1] - y)
    k = int(np.argmin(d))
    print(f"inferred ({x:5.1f}, {y:5.1f}) flux {f:7.1f}   nearest true galaxy "
          f"{d[k]:.1f} px away, flux {catalog[k, 2]:.1f}")
