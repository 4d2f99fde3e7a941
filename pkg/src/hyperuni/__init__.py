"""Hyperuniformity diagnostics for finite point sets on the d-sphere.

The package measures how strongly a point configuration suppresses
cap-count fluctuations relative to i.i.d. points: number variance by exact
spectral expansion and by Monte Carlo, worst-case integration error in
Sobolev spaces, the distance-sum/discrepancy invariance identities, and
sequence-level classification of the three cap regimes (large, small,
threshold).
"""

from .pointset import (
    OptimizerOptions,
    PointSet,
    PointSetFormatError,
    fibonacci_sphere,
    load_pointset,
    maximize_distance_sum,
    pairwise_distance_sum,
    random_uniform,
    save_pointset,
)
from .specfun import (
    SeriesTruncation,
    TruncationError,
    cap_measure,
    gamma_d,
    gegenbauer_bound_constant,
    laplace_coeff,
    legendre_p,
    truncation_for_tolerance,
    zdim,
)
from .variance import (
    DirectVariance,
    SpectralVariance,
    VarianceProfile,
    WeylSum,
    iid_variance,
    number_variance_direct,
    number_variance_spectral,
    variance_profile,
    weyl_sum,
)

__version__ = "0.1.0"
