"""End-to-end acceptance checks, one test per criterion.

Each test prints a ``criterion N: PASS|FAIL`` line with the measured values
and then asserts. The lines are repeated in the terminal summary. The whole
file takes roughly an hour on one core::

    pytest tests/test_acceptance.py -v
"""
import math
import time

import numpy as np
import pytest
from scipy import stats

from rjnest import cli
from rjnest.dnscore import Options, Sampler
from rjnest.models import (
    ConstantLikelihood,
    GalaxyModel,
    GaussianTestModel,
    SinusoidModel,
    generate_galaxy_data,
    generate_sinusoid_data,
    write_galaxy_data,
    write_sinusoid_data,
)
from rjnest.postprocess import information, likelihood_curve, log_evidence, posterior_of_n, weight_run

pytestmark = pytest.mark.acceptance

SINE_SEED = 11  # data seed for the full sinusoid experiment
GALAXY_SEED = 1  # data seed for the desk-scale galaxy field
GALAXY_OPTIONS = dict(max_num_levels=300, new_level_interval=3000, save_interval=300,
                      max_num_saves=6000)


def log_uniform(rng, lo, hi, size):
    return np.exp(rng.uniform(math.log(lo), math.log(hi), size))


def analyse(result):
    w = weight_run(result.levels, result.samples, result.sample_columns)
    logz, se = log_evidence(w, rng=np.random.default_rng(0))
    return w, logz, se, information(w, logz)


# 1. prior recovery under a constant likelihood


def direct_sinusoid_prior(rng, count, n_max=10):
    """Independent prior draws, pooled over components."""
    n = rng.integers(0, n_max + 1, count)
    mu = log_uniform(rng, 1e-3, 1e3, count)
    sigma = log_uniform(rng, 1e-3, 1e3, count)
    owner = np.repeat(np.arange(count), n)
    amp = rng.exponential(mu[owner])
    period = log_uniform(rng, 0.1, 1e3, owner.size)
    phase = rng.uniform(0.0, 2 * math.pi, owner.size)
    return dict(n=n, mu=mu, sigma=sigma, A=amp, T=period, phi=phase)


def test_criterion_1_prior_recovery(verdict):
    t, y = generate_sinusoid_data(1)
    model = ConstantLikelihood(SinusoidModel(t, y))
    opts = Options(**{**cli.PRESETS["sinusoid"], "save_interval": 10, "max_num_saves": 100_000,
                      "seed": 7})
    t0 = time.perf_counter()
    res = Sampler(model, opts).run()
    elapsed = time.perf_counter() - t0
    assert res.steps == 1_000_000

    cols = res.sample_columns
    s = res.samples
    n = s[:, cols.index("n")].astype(int)
    active = np.arange(10)[None, :] < n[:, None]

    def pooled(name):
        return s[:, [cols.index(f"{name}[{i}]") for i in range(10)]][active]

    # thin to one draw per 100 steps so the counts are close to independent
    counts = np.bincount(n[::10], minlength=11)
    p_n = stats.chisquare(counts).pvalue
    ref = direct_sinusoid_prior(np.random.default_rng(2024), 1_000_000)
    ks = {
        "mu": stats.ks_2samp(s[:, cols.index("mu")], ref["mu"]).statistic,
        "sigma": stats.ks_2samp(s[:, cols.index("sigma")], ref["sigma"]).statistic,
        "A": stats.ks_2samp(pooled("A"), ref["A"]).statistic,
        "T": stats.ks_2samp(pooled("T"), ref["T"]).statistic,
        "phi": stats.ks_2samp(pooled("phi"), ref["phi"]).statistic,
    }
    ok = p_n > 0.001 and max(ks.values()) < 0.01 and elapsed < 120
    verdict(1, ok, f"chi2 p(N)={p_n:.3g}  KS " + " ".join(f"{k}={v:.4f}" for k, v in ks.items())
            + f"  {elapsed:.0f}s")
    assert p_n > 0.001
    assert max(ks.values()) < 0.01
    assert elapsed < 120


# 2. analytic evidence


def test_criterion_2_gaussian_evidence(verdict):
    model = GaussianTestModel(10, 0.01)
    t0 = time.perf_counter()
    res = Sampler(model, cli.resolve_options("gaussian-test", seed=1)).run()
    _, logz, se, h = analyse(res)
    elapsed = time.perf_counter() - t0
    ok_z = abs(logz - model.log_evidence) < max(0.5, 3 * se)
    ok_h = abs(h - 31.86) < 1.5
    verdict(2, ok_z and ok_h and elapsed < 300,
            f"log Z={logz:.3f} +/- {se:.3f} (exact {model.log_evidence:.4f})  H={h:.2f} "
            f"(exact 31.86)  {elapsed:.0f}s")
    assert ok_z and ok_h
    assert elapsed < 300


# 3. brute-force evidence on a small trans-dimensional problem


def monte_carlo_log_evidence(t, y, draws, rng, batch=1_000_000):
    """Plain prior-sampling estimate of log Z and its standard error.

    Two components at most, unit noise; the returned error is the standard
    error of the mean likelihood divided by the mean.
    """
    two_pi_t = 2 * math.pi * t
    const = -0.5 * t.size * math.log(2 * math.pi)
    shift = None
    total = total_sq = 0.0
    for _ in range(draws // batch):
        n = rng.integers(0, 3, batch)
        mu = log_uniform(rng, 1e-3, 1e3, batch)
        signal = np.zeros((batch, t.size))
        for k in range(2):
            amp = rng.exponential(mu) * (n > k)
            period = log_uniform(rng, 0.1, 1e3, batch)
            phase = rng.uniform(0, 2 * math.pi, batch)
            signal += amp[:, None] * np.sin(two_pi_t[None, :] / period[:, None] + phase[:, None])
        r = y[None, :] - signal
        log_l = const - 0.5 * np.einsum("ij,ij->i", r, r)
        if shift is None:
            shift = log_l.max() + 5.0
        like = np.exp(log_l - shift)
        total += like.sum()
        total_sq += (like * like).sum()
    count = (draws // batch) * batch
    mean = total / count
    var = total_sq / count - mean * mean
    return shift + math.log(mean), math.sqrt(var / count) / mean


def test_criterion_3_brute_force_evidence(verdict):
    t, y = generate_sinusoid_data(5, num_points=20, sigma=1.0)
    t0 = time.perf_counter()
    oracle, oracle_se = monte_carlo_log_evidence(t, y, 10**8, np.random.default_rng(99))
    estimates = []
    for seed in range(1, 6):
        model = SinusoidModel(t, y, n_max=2, sigma=1.0)
        opts = Options(max_num_levels=20, new_level_interval=10000, save_interval=100,
                       max_num_saves=10000, seed=seed)
        estimates.append(analyse(Sampler(model, opts).run())[1])
    elapsed = time.perf_counter() - t0
    # the spread of independent runs measures the sampler's error
    dns = float(np.mean(estimates))
    dns_se = float(np.std(estimates, ddof=1) / math.sqrt(len(estimates)))
    combined = math.hypot(dns_se, oracle_se)
    ok = abs(dns - oracle) < 3 * combined and elapsed < 1800
    verdict(3, ok, f"DNS log Z={dns:.4f} +/- {dns_se:.4f} over {len(estimates)} seeds  "
            f"oracle {oracle:.4f} +/- {oracle_se:.4f}  "
            f"|diff|={abs(dns - oracle) / combined:.2f} SE  {elapsed:.0f}s")
    assert abs(dns - oracle) < 3 * combined
    assert elapsed < 1800


# 4. the full sinusoid experiment


def regions_near(curve, target, slack=5):
    """Whether a flagged region lies within ``slack`` levels of log X = target."""
    log_x = curve.levels[:, 1]
    k = int(np.argmin(np.abs(log_x - target)))
    return any(a - slack <= k <= b + slack for a, b in curve.regions())


def test_criterion_4_sinusoid_experiment(verdict):
    t, y = generate_sinusoid_data(SINE_SEED)
    model = SinusoidModel(t, y)
    t0 = time.perf_counter()
    res = Sampler(model, cli.resolve_options("sinusoid", seed=1)).run()
    w, logz, se, h = analyse(res)
    elapsed = time.perf_counter() - t0
    mode = int(np.argmax(posterior_of_n(w, model.n_max)))
    curve = likelihood_curve(w, res.levels)
    spans = ", ".join(f"{curve.levels[a, 1]:.1f}..{curve.levels[b, 1]:.1f}"
                      for a, b in curve.regions())
    checks = {
        "mode N=2": mode == 2,
        "flag near -10": regions_near(curve, -10.0),
        "flag near -35": regions_near(curve, -35.0),
        "log Z": abs(logz + 771.8) < 20,
        "H": abs(h - 39.8) < 8,
        "runtime": elapsed < 600,
    }
    failed = [k for k, v in checks.items() if not v]
    verdict(4, not failed, f"mode N={mode}  log Z={logz:.2f} +/- {se:.2f}  H={h:.2f}  "
            f"concave-up log X: [{spans}]  {elapsed:.0f}s"
            + (f"  failed: {', '.join(failed)}" if failed else ""))
    assert not failed


# 5. galaxy field at desk scale


def test_criterion_5_galaxy_desk_scale(verdict):
    image, catalog = generate_galaxy_data(GALAXY_SEED, size=100, count=10)
    model = GalaxyModel(image, n_max=30)
    opts = Options(**GALAXY_OPTIONS, seed=1)
    t0 = time.perf_counter()
    # the sampler recomputes the likelihood from scratch every 100th save and
    # raises CacheConsistencyError on any mismatch
    res = Sampler(model, opts).run()
    w, logz, se, h = analyse(res)
    elapsed = time.perf_counter() - t0
    p_n = posterior_of_n(w, model.n_max)
    mean_n = float(np.dot(np.arange(p_n.size), p_n))
    ok = abs(mean_n - len(catalog)) <= 3 and elapsed < 3600
    verdict(5, ok, f"posterior mean N={mean_n:.2f} (truth {len(catalog)})  "
            f"log Z={logz:.1f}  H={h:.1f}  {len(res.levels)} levels  {elapsed:.0f}s")
    assert abs(mean_n - len(catalog)) <= 3
    assert elapsed < 3600


# 6. incremental likelihood exactness


def lockstep(make_model, opts, accepted_target=10_000, max_steps=200_000):
    """Run cached and uncached samplers side by side.

    Returns ``(accepted, worst relative error, sequences identical)``.
    """
    cached = Sampler(make_model(True), opts)
    plain = Sampler(make_model(False), opts)
    accepted = 0
    worst = 0.0
    identical = True
    for _ in range(max_steps):
        pc, pp = cached.particles[cached.steps % len(cached.particles)], \
            plain.particles[plain.steps % len(plain.particles)]
        before_c, before_p = pc.state, pp.state
        cached.step()
        plain.step()
        moved_c, moved_p = pc.state is not before_c, pp.state is not before_p
        identical &= moved_c == moved_p
        if moved_c:
            accepted += 1
            fresh = cached.model.log_likelihood_from_scratch(pc.state)
            worst = max(worst, abs(pc.value.log_l - fresh) / max(1.0, abs(fresh)))
        if accepted >= accepted_target:
            break
    return accepted, worst, identical


def test_criterion_6_incremental_exactness(verdict, tmp_path):
    t, y = generate_sinusoid_data(SINE_SEED)
    image, _ = generate_galaxy_data(GALAXY_SEED, size=100, count=10)
    opts = Options(max_num_levels=30, new_level_interval=1000, seed=3)
    cases = {
        "sinusoid": lambda inc: SinusoidModel(t, y, incremental=inc),
        "galaxyfield": lambda inc: GalaxyModel(image, n_max=30, incremental=inc),
        "gaussian-test": lambda inc: GaussianTestModel(10, 0.01, incremental=inc),
    }
    results = {name: lockstep(make, opts) for name, make in cases.items()}
    ok = all(a >= 10_000 and err <= 1e-6 and same for a, err, same in results.values())
    verdict(6, ok, "  ".join(f"{name}: {a} accepted, max rel err {err:.1e}, "
                             f"identical={same}" for name, (a, err, same) in results.items()))
    assert ok


# 7. caching speedup


def test_criterion_7_caching_speedup(verdict, tmp_path):
    image, catalog = generate_galaxy_data(GALAXY_SEED, size=100, count=10)
    image_path, _ = write_galaxy_data(tmp_path, image, catalog, seed=GALAXY_SEED)
    t, y = generate_sinusoid_data(SINE_SEED)
    sine_path = tmp_path / "sinusoid_data.txt"
    write_sinusoid_data(sine_path, t, y, seed=SINE_SEED)

    gc, gu, gsame = cli.bench("galaxyfield", image_path, 5000,
                              cli.resolve_options("galaxyfield", seed=1), n_max=30)
    sc, su, ssame = cli.bench("sinusoid", sine_path, 20000, cli.resolve_options("sinusoid", seed=1))
    ok = gu / gc >= 1.5 and su / sc >= 1.3 and gsame and ssame
    verdict(7, ok, f"galaxy desk {gu / gc:.2f}x (need 1.5, identical={gsame})  "
                   f"sinusoid {su / sc:.2f}x (need 1.3, identical={ssame})")
    assert ok


# 8. determinism


def test_criterion_8_determinism(verdict, tmp_path):
    assert cli.main(["generate", "sinusoid", "--seed", "3", "--out", str(tmp_path)]) == 0
    (tmp_path / "opts.txt").write_text(
        "new_level_interval = 1000\nsave_interval = 50\nmax_num_levels = 10\n"
        "max_num_saves = 400\n")
    outputs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = cli.main(["run", "--model", "sinusoid", "--data",
                         str(tmp_path / "sinusoid_data.txt"), "--options",
                         str(tmp_path / "opts.txt"), "--deterministic", "--seed", "7",
                         "--out", str(out)])
        assert code == 0
        outputs.append({f: (out / f).read_bytes() for f in ("samples.csv", "levels.csv")})
    same = outputs[0] == outputs[1]
    verdict(8, same, "samples.csv and levels.csv byte-identical across two runs" if same
            else "files differ between runs")
    assert same
