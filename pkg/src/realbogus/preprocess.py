"""Per-stamp scaling and composite assembly.

The difference image is standardized to mean 0, std 1. Search and
template are linearly mapped so the mu +/- 3 sigma interval lands on
[0, 1]; values outside the interval are kept (no clipping), so the
output can go negative or above 1. Statistics use the population
standard deviation over all 2601 pixels of the raw stamp.
"""

from dataclasses import dataclass

import numpy as np

from realbogus.errors import DataError, DegenerateImageError
from realbogus.stamps import (
    PAIR_LAYOUT,
    TRIPLET_LAYOUT,
    CompositeImage,
    PostageStamp,
    STAMP_SIZE,
)


@dataclass
class ScalingParams:
    mu: float
    sigma: float


def scaling_params(pixels):
    pixels = np.asarray(pixels, dtype=np.float64)
    return ScalingParams(mu=float(pixels.mean()), sigma=float(pixels.std()))


def standardize_diff(stamp):
    """(x - mu) / sigma for a difference stamp."""
    if stamp.role != "diff":
        raise DataError(f"standardize_diff expects a diff stamp, got {stamp.role!r}")
    p = scaling_params(stamp.pixels)
    if p.sigma == 0.0:
        raise DegenerateImageError(f"constant diff stamp {stamp.id!r}")
    return (stamp.pixels - p.mu) / p.sigma


def scale_3sigma(stamp):
    """Map mu - 3 sigma -> 0 and mu + 3 sigma -> 1, linearly, without clipping."""
    if stamp.role not in ("srch", "tmpl"):
        raise DataError(f"scale_3sigma expects srch or tmpl, got {stamp.role!r}")
    p = scaling_params(stamp.pixels)
    if p.sigma == 0.0:
        raise DegenerateImageError(f"constant {stamp.role} stamp {stamp.id!r}")
    return (stamp.pixels - (p.mu - 3.0 * p.sigma)) / (6.0 * p.sigma)


def compose_triplet(diff_s, srch_s, tmpl_s, id="", label=None):
    """Stack preprocessed grids left to right: diff | srch | tmpl (51x153)."""
    return CompositeImage(np.hstack([diff_s, srch_s, tmpl_s]),
                          layout=TRIPLET_LAYOUT, id=id, label=label)


def compose_pair(srch_s, tmpl_s, id="", label=None):
    """Stack preprocessed grids left to right: srch | tmpl (51x102)."""
    return CompositeImage(np.hstack([srch_s, tmpl_s]),
                          layout=PAIR_LAYOUT, id=id, label=label)


def decompose(composite):
    """Split a composite back into its per-role 51x51 grids, in layout order."""
    return tuple(composite.slab(role) for role in composite.layout)


def preprocess_dia_set(dia_set, variant):
    """Full preprocessing of one DiaSet into the composite for a model variant."""
    srch_s = scale_3sigma(dia_set.srch)
    tmpl_s = scale_3sigma(dia_set.tmpl)
    if variant == "dia":
        if dia_set.diff is None:
            raise DataError(f"DIA-set {dia_set.id!r} has no diff stamp")
        diff_s = standardize_diff(dia_set.diff)
        return compose_triplet(diff_s, srch_s, tmpl_s,
                               id=dia_set.id, label=dia_set.label)
    if variant == "nodia":
        return compose_pair(srch_s, tmpl_s, id=dia_set.id, label=dia_set.label)
    raise DataError(f"unknown variant {variant!r}")
