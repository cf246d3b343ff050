from .base import ConstantLikelihood, Model
from .galaxy import (
    GalaxyModel,
    GalaxyPrior,
    generate_galaxy_data,
    load_galaxy_catalog,
    load_galaxy_image,
    render_field,
    write_galaxy_data,
)
from .gaussian import GaussianTestModel
from .sinusoid import (
    SinusoidModel,
    SinusoidPrior,
    generate_sinusoid_data,
    load_sinusoid_data,
    true_signal,
    write_sinusoid_data,
)
