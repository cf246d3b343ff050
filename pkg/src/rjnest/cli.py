"""Command-line entry point: ``rjnest generate|run|postprocess|bench``.

Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure.
Progress goes to standard error.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import dnscore
from .dnscore import CacheConsistencyError, LikelihoodError, Options, Sampler
from .models import (
    GalaxyModel,
    GaussianTestModel,
    SinusoidModel,
    generate_galaxy_data,
    generate_sinusoid_data,
    load_galaxy_image,
    load_sinusoid_data,
    write_galaxy_data,
    write_sinusoid_data,
)
from .postprocess import postprocess_run

MODELS = ("sinusoid", "galaxyfield", "gaussian-test")

# Per-model option presets; an options file and --seed override them.
PRESETS = {
    "sinusoid": dict(max_num_levels=60, new_level_interval=10000, save_interval=200,
                     max_num_saves=10000),
    "galaxyfield": dict(max_num_levels=800, new_level_interval=10000, save_interval=1000,
                        max_num_saves=10000),
    "gaussian-test": dict(max_num_levels=50, new_level_interval=10000, save_interval=1000,
                          max_num_saves=10000),
}


class UsageError(Exception):
    pass


def build_model(name: str, data=None, n_max=None, dim: int = 10, width: float = 0.01,
                incremental: bool = True):
    if name == "sinusoid":
        if data is None:
            raise UsageError("--data is required for the sinusoid model")
        t, y = load_sinusoid_data(data)
        return SinusoidModel(t, y, n_max=10 if n_max is None else n_max, incremental=incremental)
    if name == "galaxyfield":
        if data is None:
            raise UsageError("--data is required for the galaxyfield model")
        image = load_galaxy_image(data)
        return GalaxyModel(image, n_max=100 if n_max is None else n_max, incremental=incremental)
    if name == "gaussian-test":
        return GaussianTestModel(dim, width, incremental=incremental)
    raise UsageError(f"unknown model {name!r}")


def resolve_options(model: str, options_path=None, seed=None) -> Options:
    opts = Options(**PRESETS.get(model, {}))
    if options_path is not None:
        opts = dnscore.read_options(options_path, opts)
    if seed is not None:
        opts = dataclasses.replace(opts, seed=seed)
    return opts


def cmd_generate(args) -> int:
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.kind == "sinusoid":
            t, y = generate_sinusoid_data(args.seed)
            path = out / "sinusoid_data.txt"
            write_sinusoid_data(path, t, y, seed=args.seed)
            print(path)
        else:
            image, catalog = generate_galaxy_data(args.seed, size=args.size, count=args.count)
            for path in write_galaxy_data(out, image, catalog, seed=args.seed):
                print(path)
    except OSError as exc:
        print(f"error: cannot write to {out}: {exc}", file=sys.stderr)
        return 2
    return 0


def cmd_run(args) -> int:
    out = Path(args.out)
    if (out / "levels.csv").exists() and (out / "samples.csv").exists() and not args.force:
        print(f"error: {out} already holds a completed run (use --force)", file=sys.stderr)
        return 2
    try:
        opts = resolve_options(args.model, args.options, args.seed)
        model = build_model(args.model, args.data, args.n_max, args.dim, args.width)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.threads > 1 and not args.deterministic:
        print("note: particles run round-robin in one thread; --threads is ignored",
              file=sys.stderr)
    try:
        out.mkdir(parents=True, exist_ok=True)
        sampler = Sampler(model, opts, progress_every=args.progress_every)
        result = sampler.run()
        dnscore.write_run(result, out)
    except (LikelihoodError, CacheConsistencyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        state = getattr(exc, "state", None)
        if state is not None:
            print("offending state: " + " ".join(repr(float(x)) for x in state), file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {out / 'levels.csv'} and {out / 'samples.csv'} "
          f"({len(result.levels)} levels, {len(result.samples)} samples, {result.steps} steps)",
          file=sys.stderr)
    return 0


def cmd_postprocess(args) -> int:
    try:
        res = postprocess_run(args.run_dir, resample_count=args.resample)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"log Z = {res['log_z']:.3f} +/- {res['log_z_stderr']:.3f}")
    print(f"H = {res['information_nats']:.3f} nats")
    if "posterior_of_n" in res:
        pn = res["posterior_of_n"]
        print(f"posterior mode of n = {int(np.argmax(pn))}")
        for k, v in enumerate(pn):
            print(f"  p(n={k}) = {v:.4f}")
    curve = res["curve"]
    regions = curve.regions()
    print(f"concave-up regions (heuristic): {len(regions)}")
    for a, b in regions:
        print(f"  levels {a}-{b}, log X {curve.levels[a, 1]:.1f} to {curve.levels[b, 1]:.1f}")
    return 0


def bench(model_name: str, data, steps: int, options: Options, n_max=None, dim=10, width=0.01):
    """Time the same sampler workload with and without incremental updates.

    Returns ``(seconds_cached, seconds_uncached, identical)`` where
    ``identical`` says whether both runs accepted exactly the same proposals.
    """
    timings = []
    traces = []
    for incremental in (True, False):
        model = build_model(model_name, data, n_max, dim, width, incremental=incremental)
        sampler = Sampler(model, options)
        particles = sampler.particles
        accepted = []
        t0 = time.perf_counter()
        for k in range(steps):
            p = particles[k % len(particles)]
            before = p.state
            sampler.step()
            # an accepted proposal replaces the state object
            accepted.append(p.state is not before)
        timings.append(time.perf_counter() - t0)
        traces.append(np.array(accepted))
    return timings[0], timings[1], bool(np.array_equal(traces[0], traces[1]))


def cmd_bench(args) -> int:
    try:
        opts = resolve_options(args.model, args.options, args.seed)
        cached, uncached, same = bench(args.model, args.data, args.steps, opts, args.n_max,
                                       args.dim, args.width)
    except (UsageError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"incremental: {cached:.3f} s  from scratch: {uncached:.3f} s  "
          f"speedup: {uncached / cached:.2f}x  identical chains: {same}")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rjnest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="simulate a dataset")
    g.add_argument("kind", choices=("sinusoid", "galaxyfield"))
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--out", required=True)
    g.add_argument("--size", type=int, default=200, help="galaxy image side in pixels")
    g.add_argument("--count", type=int, default=47, help="number of galaxies")
    g.set_defaults(func=cmd_generate)

    def model_args(p):
        p.add_argument("--model", required=True, choices=MODELS)
        p.add_argument("--data")
        p.add_argument("--options")
        p.add_argument("--seed", type=int)
        p.add_argument("--n-max", type=int)
        p.add_argument("--dim", type=int, default=10, help="gaussian-test dimension")
        p.add_argument("--width", type=float, default=0.01, help="gaussian-test width")

    r = sub.add_parser("run", help="run the sampler")
    model_args(r)
    r.add_argument("--out", required=True)
    r.add_argument("--deterministic", action="store_true")
    r.add_argument("--force", action="store_true")
    r.add_argument("--threads", type=int, default=1)
    r.add_argument("--progress-every", type=int, default=500, help="saves between progress lines")
    r.set_defaults(func=cmd_run)

    p = sub.add_parser("postprocess", help="weight samples and write results")
    p.add_argument("run_dir")
    p.add_argument("--resample", type=int, help="number of equal-weight samples")
    p.set_defaults(func=cmd_postprocess)

    b = sub.add_parser("bench", help="time incremental against from-scratch likelihoods")
    model_args(b)
    b.add_argument("--steps", type=int, default=20000)
    b.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
