"""Unknown number of two-Gaussian "galaxies" in a noisy image.

Each component is ``(x, y, f, q, theta, w, u, v)``: centre in pixel units,
total flux, axis ratio, orientation, radius of the wider Gaussian, radius
ratio of the narrower one, and the flux fraction it carries. Flux and width
have Pareto conditional priors; u and v are uniform between hyperparameter
bounds.
"""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from ..kernels import Rng, heavy_step_unit, wrap_unit
from ..rjcontainer import ComponentSet, ConditionalPrior, DiffRecord
from .base import LogUniform, Model, gaussian_log_likelihood

COMPONENT_NAMES = ("x", "y", "f", "q", "theta", "w", "u", "v")
HYPER_NAMES = ("f_min", "a_f", "w_min", "a_w", "u_lo", "u_hi", "v_lo", "v_hi")
SCALE_PRIOR = LogUniform(1e-3, 1e3)
SIGMA_PRIOR = LogUniform(1e-3, 1e3)
SIGMA_MOVE_PROB = 0.1
Q_MIN = 0.2
PAD = 0.1
TRUNCATION = 5.0

# hyperparameters and noise used to simulate fields; the flux floor leaves
# about a fifth of galaxies below a matched-filter signal-to-noise of 8
TRUTH = {
    "f_min": 40.0, "a_f": 1.0, "w_min": 1.5, "a_w": 2.0,
    "u_lo": 0.3, "u_hi": 0.7, "v_lo": 0.2, "v_hi": 0.8, "sigma": 1.0,
}


def _hyper_to_unit(h: np.ndarray) -> np.ndarray:
    """Coordinates in which the hyperprior is uniform on [0, 1)^8."""
    f_min, a_f, w_min, a_w, u_lo, u_hi, v_lo, v_hi = h
    return np.array([
        SCALE_PRIOR.to_unit(f_min), 1.0 - 1.0 / a_f,
        SCALE_PRIOR.to_unit(w_min), 1.0 - 1.0 / a_w,
        1.0 - u_hi, u_lo / u_hi,
        1.0 - v_hi, v_lo / v_hi,
    ])


def _hyper_from_unit(c: np.ndarray) -> np.ndarray:
    # inverse slopes are 1 - c in (0, 1], upper bounds likewise
    u_hi = 1.0 - c[4]
    v_hi = 1.0 - c[6]
    return np.array([
        SCALE_PRIOR.from_unit(c[0]), 1.0 / (1.0 - c[1]),
        SCALE_PRIOR.from_unit(c[2]), 1.0 / (1.0 - c[3]),
        c[5] * u_hi, u_hi,
        c[7] * v_hi, v_hi,
    ])


class GalaxyPrior(ConditionalPrior):
    """Pareto flux and width, uniform shape and position priors."""

    dim = 8

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.x0 = -PAD * width
        self.x_span = (1.0 + 2.0 * PAD) * width
        self.y0 = -PAD * height
        self.y_span = (1.0 + 2.0 * PAD) * height

    def hyper_from_prior(self, rng):
        return _hyper_from_unit(np.array([rng.rand() for _ in range(8)]))

    def hyper_perturb(self, hyper, rng):
        c = _hyper_to_unit(hyper)
        k = rng.randint(8)
        c[k] = heavy_step_unit(wrap_unit(c[k]), rng)
        return _hyper_from_unit(c), 0.0

    def to_uniform(self, x, hyper):
        f_min, a_f, w_min, a_w, u_lo, u_hi, v_lo, v_hi = hyper
        u = np.empty_like(x)
        u[:, 0] = (x[:, 0] - self.x0) / self.x_span
        u[:, 1] = (x[:, 1] - self.y0) / self.y_span
        u[:, 2] = -np.expm1(-a_f * np.log(x[:, 2] / f_min))
        u[:, 3] = (x[:, 3] - Q_MIN) / (1.0 - Q_MIN)
        u[:, 4] = x[:, 4] / math.pi
        u[:, 5] = -np.expm1(-a_w * np.log(x[:, 5] / w_min))
        u[:, 6] = (x[:, 6] - u_lo) / (u_hi - u_lo) if u_hi > u_lo else 0.5
        u[:, 7] = (x[:, 7] - v_lo) / (v_hi - v_lo) if v_hi > v_lo else 0.5
        return u

    def from_uniform(self, u, hyper):
        f_min, a_f, w_min, a_w, u_lo, u_hi, v_lo, v_hi = hyper
        x = np.empty_like(u)
        x[:, 0] = self.x0 + self.x_span * u[:, 0]
        x[:, 1] = self.y0 + self.y_span * u[:, 1]
        x[:, 2] = f_min * np.exp(-np.log1p(-u[:, 2]) / a_f)
        x[:, 3] = Q_MIN + (1.0 - Q_MIN) * u[:, 3]
        x[:, 4] = math.pi * u[:, 4]
        x[:, 5] = w_min * np.exp(-np.log1p(-u[:, 5]) / a_w)
        x[:, 6] = u_lo + (u_hi - u_lo) * u[:, 6]
        x[:, 7] = v_lo + (v_hi - v_lo) * u[:, 7]
        return x

    def log_density(self, x, hyper):
        f_min, a_f, w_min, a_w, u_lo, u_hi, v_lo, v_hi = hyper
        f, w, u, v = x[:, 2], x[:, 5], x[:, 6], x[:, 7]
        with np.errstate(divide="ignore"):
            out = (
                math.log(a_f) + a_f * math.log(f_min) - (a_f + 1.0) * np.log(f)
                + math.log(a_w) + a_w * math.log(w_min) - (a_w + 1.0) * np.log(w)
                - math.log(max(u_hi - u_lo, 1e-300)) - math.log(max(v_hi - v_lo, 1e-300))
                - math.log(self.x_span * self.y_span * (1.0 - Q_MIN) * math.pi)
            )
        bad = (f < f_min) | (w < w_min) | (u < u_lo) | (u > u_hi) | (v < v_lo) | (v > v_hi)
        return np.where(bad, -np.inf, out)


class ImageGrid:
    """Pixel-centre coordinates of a ``height x width`` image."""

    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.xc = np.arange(width) + 0.5
        self.yc = np.arange(height) + 0.5


def galaxy_patch(component, grid: ImageGrid):
    """Surface brightness of one galaxy over its truncation box.

    Pixels farther than ``5 w / sqrt(q)`` from the centre along either axis
    are skipped; the neglected light is below ``exp(-12.5)`` of the peak.
    Returns ``((rows, cols), patch)``, or None if the box misses the image.
    """
    xc, yc, f, q, theta, w, u, v = component
    r_max = TRUNCATION * w / math.sqrt(q)
    i0 = max(int(math.floor(yc - r_max)), 0)
    i1 = min(int(math.ceil(yc + r_max)), grid.height)
    j0 = max(int(math.floor(xc - r_max)), 0)
    j1 = min(int(math.ceil(xc + r_max)), grid.width)
    if i0 >= i1 or j0 >= j1:
        return None
    dx = grid.xc[j0:j1] - xc
    dy = grid.yc[i0:i1, None] - yc
    c, s = math.cos(theta), math.sin(theta)
    xr = dx * c + dy * s
    yr = dy * c - dx * s
    rsq = q * xr * xr + yr * yr / q
    patch = (f * (1.0 - v) / (2.0 * math.pi * w * w)) * np.exp(rsq * (-0.5 / (w * w)))
    if v > 0.0:
        w_in = u * w
        patch += (f * v / (2.0 * math.pi * w_in * w_in)) * np.exp(rsq * (-0.5 / (w_in * w_in)))
    return (slice(i0, i1), slice(j0, j1)), patch


def render_galaxy(component, grid: ImageGrid, image: np.ndarray) -> None:
    """Add one galaxy's surface brightness to ``image`` in place."""
    out = galaxy_patch(component, grid)
    if out is not None:
        box, patch = out
        image[box] += patch


def render_field(components, grid: ImageGrid) -> np.ndarray:
    image = np.zeros((grid.height, grid.width))
    for comp in components:
        render_galaxy(comp, grid, image)
    return image


class GalaxyState:
    __slots__ = ("comps", "sigma", "image", "ssr")

    def __init__(self, comps: ComponentSet, sigma: float, image=None, ssr=None):
        self.comps = comps
        self.sigma = sigma
        self.image = image
        self.ssr = ssr


class GalaxyModel(Model):
    """Galaxy field with per-pixel Gaussian noise of unknown size.

    The cached mock image is patched only where the changed galaxies
    contribute, and the residual sum of squares is updated over the same
    pixels.
    """

    name = "galaxyfield"

    def __init__(self, data, n_max: int = 100, incremental: bool = True):
        self.data = np.asarray(data, dtype=float)
        height, width = self.data.shape
        self.grid = ImageGrid(width, height)
        self.n_max = n_max
        self.prior = GalaxyPrior(width, height)
        self.incremental = incremental

    def describe(self):
        return {
            "model": self.name, "n_max": self.n_max, "width": self.grid.width,
            "height": self.grid.height, "incremental": self.incremental,
        }

    def render(self, components) -> np.ndarray:
        return render_field(components, self.grid)

    def _set_image(self, state, image):
        r = self.data - image
        state.image = image
        state.ssr = float(np.vdot(r, r))

    def from_prior(self, rng: Rng) -> GalaxyState:
        comps = ComponentSet.from_prior(self.prior, self.n_max, rng)
        comps.consume_diff()
        state = GalaxyState(comps, SIGMA_PRIOR.draw(rng))
        self._set_image(state, self.render(comps.components))
        return state

    def update_cache(self, state: GalaxyState, diff) -> None:
        comps = state.comps
        if not self.incremental:
            self._set_image(state, self.render(comps.components))
            return
        if diff.is_empty():
            return
        if diff.all_changed or len(diff) >= comps.n:
            self._set_image(state, self.render(comps.components))
            return
        image = state.image.copy()
        ssr = state.ssr
        data = self.data
        for sign, group in ((-1.0, diff.removed), (1.0, diff.added)):
            for comp in group:
                out = galaxy_patch(comp, self.grid)
                if out is None:
                    continue
                box, patch = out
                r_old = data[box] - image[box]
                if sign > 0:
                    image[box] += patch
                else:
                    image[box] -= patch
                r_new = data[box] - image[box]
                ssr += float(np.vdot(r_new, r_new) - np.vdot(r_old, r_old))
        state.image = image
        state.ssr = ssr

    def propose(self, state: GalaxyState, rng: Rng):
        """Parameter move only; returns ``(new_state, log_factor, diff)``.

        The new state shares the old cache, which ``update_cache`` then
        brings up to date from ``diff``.
        """
        new = GalaxyState(state.comps, state.sigma, state.image, state.ssr)
        if rng.rand() < SIGMA_MOVE_PROB:
            new.sigma = SIGMA_PRIOR.perturb(state.sigma, rng)
            return new, 0.0, DiffRecord()
        new.comps = state.comps.copy()
        logh = new.comps.perturb(rng)
        return new, logh, new.comps.consume_diff()

    def perturb(self, state: GalaxyState, rng: Rng):
        new, logh, diff = self.propose(state, rng)
        self.update_cache(new, diff)
        return new, logh

    def log_likelihood(self, state: GalaxyState) -> float:
        return gaussian_log_likelihood(state.ssr, self.data.size, state.sigma)

    def log_likelihood_from_scratch(self, state: GalaxyState) -> float:
        r = self.data - self.render(state.comps.components)
        return gaussian_log_likelihood(float(np.vdot(r, r)), self.data.size, state.sigma)

    def serialize(self, state: GalaxyState) -> np.ndarray:
        return np.append(state.comps.to_flat(), state.sigma)

    def deserialize(self, flat) -> GalaxyState:
        flat = np.asarray(flat, dtype=float)
        comps = ComponentSet.from_flat(self.prior, self.n_max, flat[:-1])
        state = GalaxyState(comps, float(flat[-1]))
        self._set_image(state, self.render(comps.components))
        return state

    def column_names(self) -> list[str]:
        cols = ["n"]
        for i in range(self.n_max):
            cols += [f"{name}[{i}]" for name in COMPONENT_NAMES]
        return cols + list(HYPER_NAMES) + ["sigma"]


def draw_galaxies(rng: np.random.Generator, count: int, width: int, height: int,
                  truth: dict = TRUTH) -> np.ndarray:
    """Catalog of ``count`` galaxies placed inside the image."""
    p = rng.random((count, 8))
    cat = np.empty((count, 8))
    cat[:, 0] = width * p[:, 0]
    cat[:, 1] = height * p[:, 1]
    cat[:, 2] = truth["f_min"] * (1.0 - p[:, 2]) ** (-1.0 / truth["a_f"])
    cat[:, 3] = Q_MIN + (1.0 - Q_MIN) * p[:, 3]
    cat[:, 4] = math.pi * p[:, 4]
    cat[:, 5] = truth["w_min"] * (1.0 - p[:, 5]) ** (-1.0 / truth["a_w"])
    cat[:, 6] = truth["u_lo"] + (truth["u_hi"] - truth["u_lo"]) * p[:, 6]
    cat[:, 7] = truth["v_lo"] + (truth["v_hi"] - truth["v_lo"]) * p[:, 7]
    return cat


def generate_galaxy_data(seed: int, size: int = 200, count: int = 47,
                         truth: dict = TRUTH) -> tuple[np.ndarray, np.ndarray]:
    """Noisy ``size x size`` image of ``count`` galaxies and its catalog."""
    rng = np.random.Generator(np.random.PCG64(seed))
    catalog = draw_galaxies(rng, count, size, size, truth)
    clean = render_field(catalog, ImageGrid(size, size))
    image = clean + truth["sigma"] * rng.standard_normal(clean.shape)
    return image, catalog


def write_galaxy_data(directory, image, catalog, seed: int | None = None,
                      truth: dict = TRUTH) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    header = [f"{k} = {v!r}" for k, v in truth.items()]
    if seed is not None:
        header.insert(0, f"seed = {seed}")
    image_path = directory / "galaxyfield_image.txt"
    catalog_path = directory / "galaxyfield_catalog.csv"
    np.savetxt(image_path, image, fmt="%.17g", header="\n".join(header))
    np.savetxt(catalog_path, catalog, fmt="%.17g", delimiter=",",
               header="\n".join(header + [",".join(COMPONENT_NAMES)]))
    return image_path, catalog_path


def load_galaxy_image(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", ndmin=2)


def load_galaxy_catalog(path) -> np.ndarray:
    return np.loadtxt(path, comments="#", delimiter=",", ndmin=2)
