"""Support descriptors: which dominating measure the densities live on."""

from dataclasses import dataclass
from enum import Enum


class SupportKind(str, Enum):
    REAL_LINE = "continuous-real-line"
    POSITIVE_HALF_LINE = "continuous-positive-half-line"
    NONNEGATIVE_INTEGERS = "discrete-nonnegative-integers"


@dataclass(frozen=True)
class SupportDescriptor:
    """Observation space of a model family.

    Parameters
    ----------
    kind : SupportKind
        Lebesgue measure on the real line or the positive half line, or
        counting measure on {0, 1, 2, ...}.
    dim : int
        Dimension of one observation. Discrete supports are one dimensional.
    """

    kind: SupportKind
    dim: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", SupportKind(self.kind))
        if self.dim < 1:
            raise ValueError("observation dimension must be >= 1")
        if self.is_discrete and self.dim != 1:
            raise ValueError("discrete supports must be one dimensional")

    @property
    def is_discrete(self):
        return self.kind is SupportKind.NONNEGATIVE_INTEGERS

    def contains(self, x):
        """Elementwise membership test for an array of observations."""
        import numpy as np

        x = np.asarray(x, dtype=float)
        if self.dim > 1:
            return np.all(np.isfinite(x), axis=-1)
        if self.kind is SupportKind.REAL_LINE:
            return np.isfinite(x)
        if self.kind is SupportKind.POSITIVE_HALF_LINE:
            return np.isfinite(x) & (x >= 0)
        return np.isfinite(x) & (x >= 0) & (x == np.round(x))


REAL_LINE = SupportDescriptor(SupportKind.REAL_LINE)
POSITIVE_HALF_LINE = SupportDescriptor(SupportKind.POSITIVE_HALF_LINE)
NONNEGATIVE_INTEGERS = SupportDescriptor(SupportKind.NONNEGATIVE_INTEGERS)
