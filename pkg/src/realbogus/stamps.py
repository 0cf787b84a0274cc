"""Core data carriers: postage stamps, DIA-sets, and composite images."""

from dataclasses import dataclass, field

import numpy as np

from realbogus.errors import DataError, DimensionError

STAMP_SIZE = 51

ROLES = ("diff", "srch", "tmpl")

# real/bogus label convention inherited from the source survey data
LABEL_REAL = 0
LABEL_BOGUS = 1


@dataclass
class PostageStamp:
    """A 51x51 cutout centered on a candidate detection."""

    pixels: np.ndarray
    role: str
    id: str = ""

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        if self.pixels.shape != (STAMP_SIZE, STAMP_SIZE):
            raise DimensionError(
                f"stamp must be {STAMP_SIZE}x{STAMP_SIZE}, got {self.pixels.shape}")
        if self.role not in ROLES:
            raise DataError(f"unknown stamp role {self.role!r}")
        if not np.isfinite(self.pixels).all():
            raise DataError(f"stamp {self.id!r} contains non-finite pixels")


@dataclass
class DiaSet:
    """One labeled example: template, search, optional difference image."""

    id: str
    tmpl: PostageStamp
    srch: PostageStamp
    diff: PostageStamp = None
    label: int = LABEL_BOGUS
    provenance: str = "synthetic"

    def __post_init__(self):
        if self.label not in (LABEL_REAL, LABEL_BOGUS):
            raise DataError(f"label must be 0 (real) or 1 (bogus), got {self.label}")


TRIPLET_LAYOUT = ("diff", "srch", "tmpl")
PAIR_LAYOUT = ("srch", "tmpl")

TRIPLET_WIDTH = 3 * STAMP_SIZE   # 153
PAIR_WIDTH = 2 * STAMP_SIZE      # 102


@dataclass
class CompositeImage:
    """Horizontally stacked, preprocessed stamps: the network input."""

    pixels: np.ndarray
    layout: tuple
    id: str = ""
    label: int = None

    def __post_init__(self):
        self.pixels = np.asarray(self.pixels, dtype=np.float64)
        expected = (STAMP_SIZE, STAMP_SIZE * len(self.layout))
        if tuple(self.layout) not in (TRIPLET_LAYOUT, PAIR_LAYOUT):
            raise DataError(f"unsupported composite layout {self.layout}")
        if self.pixels.shape != expected:
            raise DimensionError(
                f"composite shape {self.pixels.shape} != {expected} for {self.layout}")

    @property
    def width(self):
        return self.pixels.shape[1]

    def slab(self, role):
        """Columns of the composite belonging to one role."""
        i = self.layout.index(role)
        return self.pixels[:, i * STAMP_SIZE:(i + 1) * STAMP_SIZE]

    def as_input(self):
        """The (51, W, 1) float64 tensor fed to the network."""
        return self.pixels[:, :, np.newaxis]
