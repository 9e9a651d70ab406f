"""Geodesics, Jacobi fields and cut loci of confocal-type integrable
metrics on the n-sphere (ellipsoids with distinct axes as the flagship
case)."""

from .model import (
    AxisSpectrum,
    BandPoint,
    GeneratorFunction,
    Manifold,
    PeriodTable,
    SubmanifoldTag,
    classify_point,
    compute_periods,
    elliptic_coords,
    first_integrals,
    metric_at,
)

__version__ = "0.1.0"
