"""Synthetic DIA-set generator.

Each set is built forward: a low-noise template scene (sky + background
sources), a search image made by PSF-degrading the template and adding
noise, and the difference image srch - degraded(tmpl). "Real" sets get a
point-source transient at the stamp center of the search image. Bogus
sets carry one of four artifact morphologies: dipole (misregistered
counterpart in the template), bad pixel column, pure noise detection, or
a ghost (template-only source leaving a negative subtraction residual).

Reproducibility: every set derives its own PCG64 stream from
(seed, index), so generation order and parallel generation agree.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from realbogus.errors import ConfigurationError
from realbogus.stamps import (
    DiaSet,
    LABEL_BOGUS,
    LABEL_REAL,
    PostageStamp,
    STAMP_SIZE,
)

ARTIFACT_KINDS = ("dipole", "bad_column", "noise_spike", "ghost_subtraction")

CENTER = (STAMP_SIZE - 1) / 2.0  # 25.0


@dataclass
class SceneConfig:
    sky_level: float = 100.0
    read_noise_sigma: float = 5.0
    tmpl_noise_sigma: float = 1.5          # coadd-like residual noise
    psf_sigma_tmpl: float = 1.2
    psf_sigma_srch: float = 1.8
    n_background_sources: int = 3
    background_flux_range: tuple = (500.0, 8000.0)
    transient_flux_range: tuple = (1500.0, 8000.0)
    seed: int = 0

    def __post_init__(self):
        if not self.psf_sigma_srch >= self.psf_sigma_tmpl > 0:
            raise ConfigurationError(
                "need psf_sigma_srch >= psf_sigma_tmpl > 0, got "
                f"{self.psf_sigma_srch} / {self.psf_sigma_tmpl}")
        if self.sky_level < 0:
            raise ConfigurationError(f"sky_level must be >= 0, got {self.sky_level}")


def render_gaussian_source(canvas, center, flux, sigma):
    """Add a circular Gaussian of total counts `flux`, midpoint-integrated."""
    if sigma <= 0:
        raise ConfigurationError(f"source sigma must be > 0, got {sigma}")
    if flux == 0:
        return canvas
    cy, cx = center
    y, x = np.mgrid[0:canvas.shape[0], 0:canvas.shape[1]]
    r2 = (y - cy) ** 2 + (x - cx) ** 2
    canvas += flux * np.exp(-0.5 * r2 / sigma ** 2) / (2.0 * np.pi * sigma ** 2)
    return canvas


def matching_kernel_sigma(config):
    s2 = config.psf_sigma_srch ** 2 - config.psf_sigma_tmpl ** 2
    if s2 < 0:
        raise ConfigurationError("negative matching-kernel variance")
    return np.sqrt(s2)


def gaussian_kernel(sigma):
    """Discrete 2D Gaussian normalized to sum 1; a delta for sigma == 0."""
    if sigma == 0:
        return np.ones((1, 1))
    half = max(1, int(np.ceil(4 * sigma)))
    y, x = np.mgrid[-half:half + 1, -half:half + 1]
    k = np.exp(-0.5 * (y ** 2 + x ** 2) / sigma ** 2)
    return k / k.sum()


def degrade_template(tmpl_pixels, sigma_match):
    """Convolve the template with the PSF-matching kernel (reflective border)."""
    kernel = gaussian_kernel(sigma_match)
    if kernel.shape == (1, 1):
        return tmpl_pixels.copy()
    return ndimage.convolve(tmpl_pixels, kernel, mode="reflect")


def _template_scene(config, rng):
    """Sky + background sources + low coadd noise, at template PSF."""
    canvas = np.full((STAMP_SIZE, STAMP_SIZE), config.sky_level)
    lo, hi = config.background_flux_range
    for _ in range(config.n_background_sources):
        # keep background sources away from the central detection region
        while True:
            pos = rng.uniform(3, STAMP_SIZE - 4, size=2)
            if np.hypot(pos[0] - CENTER, pos[1] - CENTER) > 8:
                break
        render_gaussian_source(canvas, pos, rng.uniform(lo, hi),
                               config.psf_sigma_tmpl)
    canvas += rng.normal(0.0, config.tmpl_noise_sigma, canvas.shape)
    return canvas


def _search_noise(config, rng, shape):
    sigma = np.sqrt(config.read_noise_sigma ** 2 + config.sky_level)
    return rng.normal(0.0, sigma, shape)


def make_dia_set(config, kind, rng, id=""):
    """Generate one DIA-set. kind is 'real' or one of ARTIFACT_KINDS.

    The search image derives from the true sky at search time; the
    template may contain extra content (misregistered counterparts,
    faded sources) that the subtraction then fails to cancel.
    """
    if kind != "real" and kind not in ARTIFACT_KINDS:
        raise ConfigurationError(f"unknown set kind {kind!r}")
    scene = _template_scene(config, rng)
    sigma_match = matching_kernel_sigma(config)
    flux = rng.uniform(*config.transient_flux_range)

    tmpl = scene.copy()
    if kind == "dipole":
        # misregistered counterpart: the source sits 1-2 px off in the
        # template relative to its search-image position at the center
        offset = rng.uniform(1.0, 2.0)
        angle = rng.uniform(0, 2 * np.pi)
        ghost_pos = (CENTER + offset * np.sin(angle), CENTER + offset * np.cos(angle))
        render_gaussian_source(tmpl, ghost_pos, flux * rng.uniform(1.0, 1.5),
                               config.psf_sigma_tmpl)
    elif kind == "ghost_subtraction":
        # template-only source (faded away by search time): the
        # subtraction leaves a negative residual
        render_gaussian_source(tmpl, (CENTER, CENTER), flux, config.psf_sigma_tmpl)

    srch = degrade_template(scene, sigma_match) + _search_noise(config, rng, scene.shape)
    if kind in ("real", "dipole"):
        render_gaussian_source(srch, (CENTER, CENTER), flux, config.psf_sigma_srch)
    elif kind == "bad_column":
        col = rng.integers(5, STAMP_SIZE - 5)
        srch[:, col] = 0.0 if rng.random() < 0.5 else 65535.0

    diff = srch - degrade_template(tmpl, sigma_match)
    label = LABEL_REAL if kind == "real" else LABEL_BOGUS
    return DiaSet(
        id=id or kind,
        tmpl=PostageStamp(tmpl, "tmpl", id),
        srch=PostageStamp(srch, "srch", id),
        diff=PostageStamp(diff, "diff", id),
        label=label,
        provenance="synthetic",
    )


def generate_dataset(n, real_fraction, config, seed):
    """Deterministic labeled dataset; bogus artifact kinds drawn uniformly."""
    if n <= 0:
        raise ConfigurationError(f"n must be > 0, got {n}")
    if not 0.0 < real_fraction < 1.0:
        raise ConfigurationError(f"real_fraction must be in (0, 1), got {real_fraction}")
    n_real = round(n * real_fraction)
    kinds = ["real"] * n_real + ["bogus"] * (n - n_real)
    order_rng = np.random.default_rng([seed, 0xB0605])
    order_rng.shuffle(kinds)
    sets = []
    for i, kind in enumerate(kinds):
        rng = np.random.default_rng([seed, i])
        if kind == "bogus":
            kind = ARTIFACT_KINDS[rng.integers(len(ARTIFACT_KINDS))]
        sets.append(make_dia_set(config, kind, rng, id=f"syn-{seed}-{i:06d}"))
    return sets


def detection_significance(diff_pixels):
    """Center 3x3 sum over the per-pixel robust sigma of the 9-pixel sum."""
    c = int(CENTER)
    center_sum = diff_pixels[c - 1:c + 2, c - 1:c + 2].sum()
    mad = np.median(np.abs(diff_pixels - np.median(diff_pixels)))
    robust_sigma = 1.4826 * mad
    if robust_sigma == 0:
        return np.inf if center_sum > 0 else 0.0
    return center_sum / (3.0 * robust_sigma)
