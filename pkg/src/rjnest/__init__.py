"""Diffusive Nested Sampling over models with an unknown number of components."""
from .dnscore import (
    LikelihoodValue,
    Levels,
    Options,
    RunResult,
    Sampler,
    __version__,
    read_options,
    run,
    write_run,
)
from .kernels import Rng, heavy_step_integer, heavy_step_unit
from .postprocess import (
    equal_weight_resample,
    information,
    likelihood_curve,
    load_run,
    log_evidence,
    posterior_of_n,
    postprocess_run,
    weight_run,
)
from .rjcontainer import ComponentSet, ConditionalPrior, DiffRecord

__all__ = [
    "ComponentSet", "ConditionalPrior", "DiffRecord", "LikelihoodValue", "Levels",
    "Options", "Rng", "RunResult", "Sampler", "__version__", "equal_weight_resample",
    "heavy_step_integer", "heavy_step_unit", "information", "likelihood_curve", "load_run",
    "log_evidence", "posterior_of_n", "postprocess_run", "read_options", "run",
    "weight_run", "write_run",
]
