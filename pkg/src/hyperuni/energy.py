"""Worst-case integration error, distance sums, and L2 discrepancy.

The worst-case error of the equal-weight rule over the unit ball of a
Sobolev space on S^d is a kernel double sum over the point set.  For the
space with smoothness (d+1)/2 and the distance kernel
``1 - (gamma_d/d) |x - y|`` the squared error has an exact closed form in
the sum of mutual distances, which yields the invariance identity relating
distance sums, worst-case error, and the mean distance; the sin-weighted
integral of the number variance (squared L2 discrepancy) obeys the same
identity.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate

from . import specfun, variance
from .pointset import PointSet, fibonacci_sphere, random_uniform

__all__ = [
    "SobolevSpec",
    "EnergyReport",
    "QuadratureError",
    "sobolev_spec",
    "distance_kernel_spec",
    "distance_kernel_coefficients",
    "wce_squared",
    "mean_distance",
    "wce_distance_kernel",
    "stolarsky_residual",
    "l2_discrepancy",
    "variance_bound_constant",
]


class QuadratureError(RuntimeError):
    """Raised when two independent quadrature routes fail to agree."""


@dataclass(frozen=True)
class SobolevSpec:
    """Smoothness index s and the coefficient sequence b_n(s) of the kernel.

    ``b_of_n`` maps an integer array of degrees (n >= 1) to positive weights
    with ``b_n = Theta((1+n)^(-2s))``.  ``series_tail`` optionally returns a
    certified upper bound on ``sum_{n > M} b_n Z(d, n)`` for the given d;
    without it, fixed-degree evaluations report an infinite tail bound.
    """

    d: int
    s: float
    b_of_n: Callable[[np.ndarray], np.ndarray]
    label: str = "(1+n)^(-2s)"
    series_tail: Callable[[int], float] | None = None

    def __post_init__(self):
        if self.s <= self.d / 2.0:
            raise ValueError(f"need s > d/2 = {self.d / 2}, got s={self.s}")

    def b_values(self, max_degree: int) -> np.ndarray:
        vals = np.asarray(self.b_of_n(np.arange(1, max_degree + 1)), dtype=float)
        if np.any(vals <= 0.0):
            raise ValueError("b_n must be positive for all n >= 1")
        return vals


def sobolev_spec(d: int, s: float) -> SobolevSpec:
    """Default Sobolev specification with ``b_n = (1 + n)^(-2s)``."""

    def b_of_n(n: np.ndarray) -> np.ndarray:
        return (1.0 + n) ** (-2.0 * s)

    def series_tail(max_degree: int) -> float:
        return _default_rule_tail(d, s, max_degree)

    return SobolevSpec(d=d, s=s, b_of_n=b_of_n, series_tail=series_tail)


_zk_cache: dict[int, float] = {}


def _zdim_plus_one_constant(d: int) -> float:
    """Certified ``K`` with ``Z(d, n) <= K (1 + n)^(d-1)`` for all n >= 1."""
    if d not in _zk_cache:
        ns = np.arange(1, 4097)
        zs = specfun.zdim_table(d, 4096)[1:]
        _zk_cache[d] = float(np.max(zs / (1.0 + ns) ** (d - 1))) * 1.05
    return _zk_cache[d]


def _default_rule_tail(d: int, s: float, max_degree: int) -> float:
    """Upper bound on ``sum_{n > M} (1+n)^(-2s) Z(d, n)`` (integral test)."""
    k = _zdim_plus_one_constant(d)
    expo = 2.0 * s - d
    return k * (1.0 + max_degree) ** (-expo) / expo


@dataclass
class EnergyReport:
    """Squared worst-case error plus the provenance of its evaluation."""

    wce_squared: float
    method: str  # "kernel-series" or "distance-closed-form"
    s: float
    b_rule: str
    max_degree: int | None = None
    tail_bound: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def wce(self) -> float:
        return math.sqrt(max(0.0, self.wce_squared))

    def to_dict(self) -> dict:
        return {
            "wce_squared": self.wce_squared,
            "method": self.method,
            "s": self.s,
            "b_rule": self.b_rule,
            "max_degree": self.max_degree,
            "tail_bound": self.tail_bound,
        }


def wce_squared(
    X: PointSet,
    spec: SobolevSpec,
    tol: float | None = None,
    max_degree: int | None = None,
    hard_cap: int = 2_000_000,
) -> EnergyReport:
    """Squared worst-case error ``(1/N^2) sum_n b_n Z(d, n) W_n(X)``.

    With ``tol`` the truncation degree is chosen so the certified tail bound
    (which uses ``W_n <= N^2``) is below tol; with ``max_degree`` a fixed
    partial sum is evaluated and the honest tail bound for it is reported.
    """
    if X.d != spec.d:
        raise ValueError(f"point set lives on S^{X.d} but spec is for S^{spec.d}")
    d = X.d
    if max_degree is None:
        if tol is None:
            raise ValueError("pass either tol or max_degree")
        if spec.series_tail is None:
            raise ValueError("spec has no certified tail rule; pass max_degree")
        m = 16
        while spec.series_tail(m) > tol:
            m *= 2
            if m > hard_cap:
                raise specfun.TruncationError(
                    f"series degree for tol={tol:g} exceeds hard cap {hard_cap}"
                )
        # binary refine to the smallest admissible degree
        lo, hi = m // 2, m
        while lo + 1 < hi:
            mid = (lo + hi) // 2
            if spec.series_tail(mid) <= tol:
                hi = mid
            else:
                lo = mid
        m = hi
    else:
        m = int(max_degree)
        if m < 1:
            raise ValueError("max_degree must be >= 1")
    tail = spec.series_tail(m) if spec.series_tail is not None else math.inf

    weyl = variance.weyl_sum_table(X, m)
    coeff = spec.b_values(m) * specfun.zdim_table(d, m)[1:]
    value = math.fsum((coeff * weyl).tolist()) / float(X.n) ** 2
    return EnergyReport(
        wce_squared=value,
        method="kernel-series",
        s=spec.s,
        b_rule=spec.label,
        max_degree=m,
        tail_bound=float(tail),
        meta={"n": X.n, "d": d},
    )


# ---------------------------------------------------------------------------
# Distance kernel: closed form, exact Laplace coefficients, Stolarsky identity.

_mean_distance_cache: dict[int, float] = {}
_dist_coeff_cache: dict[int, np.ndarray] = {}
_dist_coeff_lock = threading.Lock()


def mean_distance(d: int) -> float:
    """Average Euclidean distance of two independent uniform points on S^d."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if d not in _mean_distance_cache:
        val, _ = integrate.quad(
            lambda t: 2.0 * math.sin(t / 2.0) * math.sin(t) ** (d - 1),
            0.0,
            math.pi,
            epsabs=1e-14,
            epsrel=1e-13,
        )
        _mean_distance_cache[d] = specfun.gamma_d(d) * val
    return _mean_distance_cache[d]


def wce_distance_kernel(X: PointSet) -> EnergyReport:
    """Exact squared worst-case error for the distance kernel
    ``1 - (gamma_d/d) |x - y|`` (smoothness (d+1)/2): no truncation.
    """
    d = X.d
    dist_sum = _plain_distance_sum(X)
    value = specfun.gamma_d(d) / d * (mean_distance(d) - dist_sum / float(X.n) ** 2)
    return EnergyReport(
        wce_squared=value,
        method="distance-closed-form",
        s=(d + 1) / 2.0,
        b_rule="distance-kernel",
        max_degree=None,
        tail_bound=0.0,
        meta={"n": X.n, "d": d},
    )


def _plain_distance_sum(X: PointSet) -> float:
    pts = X.points
    gram = np.clip(pts @ pts.T, -1.0, 1.0)
    sq = np.maximum(0.0, 2.0 - 2.0 * gram)
    np.fill_diagonal(sq, 0.0)
    return float(np.sum(np.sqrt(sq)))


def distance_kernel_coefficients(d: int, max_degree: int) -> np.ndarray:
    """Laplace coefficients b_n (n = 1..max_degree) of ``1 - (gamma_d/d)|x-y|``.

    Obtained by Gauss-Legendre projection of ``2 sin(theta/2)`` onto the
    ``P_n^(d)`` family; all are positive.  Cached per dimension.
    """
    with _dist_coeff_lock:
        cached = _dist_coeff_cache.get(d)
        if cached is not None and len(cached) >= max_degree:
            return cached[:max_degree]
        coeffs = _project_distance_kernel(d, max_degree)
        _dist_coeff_cache[d] = coeffs
        return coeffs


def _project_distance_kernel(d: int, max_degree: int) -> np.ndarray:
    nodes = 4 * max_degree + 64
    x, w = np.polynomial.legendre.leggauss(nodes)
    theta = (x + 1.0) * (math.pi / 2.0)
    w = w * (math.pi / 2.0)
    weight = 2.0 * np.sin(theta / 2.0) * np.sin(theta) ** (d - 1) * w
    table = specfun.legendre_p_table(d, max_degree, np.cos(theta))
    proj = table[1:] @ weight  # f_hat(n) = gamma_d * integral, n = 1..max_degree
    return -(specfun.gamma_d(d) ** 2 / d) * proj


def distance_kernel_spec(d: int, cache_degrees: int = 4096) -> SobolevSpec:
    """Sobolev spec whose b_n are the exact distance-kernel coefficients.

    The certified series tail uses the exact total
    ``sum_{n>=1} b_n Z(d, n) = (gamma_d/d) * mean_distance(d)``.
    """
    total = specfun.gamma_d(d) / d * mean_distance(d)
    cushion = 64.0 * np.finfo(float).eps * total

    def b_of_n(n: np.ndarray) -> np.ndarray:
        m = int(np.max(n))
        return distance_kernel_coefficients(d, m)[np.asarray(n) - 1]

    def series_tail(max_degree: int) -> float:
        coeffs = distance_kernel_coefficients(d, max_degree)
        zs = specfun.zdim_table(d, max_degree)[1:]
        partial = math.fsum((coeffs * zs).tolist())
        return max(total - partial, 0.0) + cushion

    return SobolevSpec(
        d=d,
        s=(d + 1) / 2.0,
        b_of_n=b_of_n,
        label="distance-kernel",
        series_tail=series_tail,
    )


class StolarskyResidual(NamedTuple):
    residual: float
    tail_bound: float


def stolarsky_residual(
    X: PointSet,
    tol: float = 1e-8,
    route: str = "series",
    max_degree: int | None = None,
) -> StolarskyResidual:
    """Residual of the invariance identity
    ``(1/N^2) sum |x_i - x_j| + (d/gamma_d) wce^2 - mean_distance``.

    With ``route="closed-form"`` the identity is algebraic and the residual
    is zero to roundoff; with ``route="series"`` the worst-case error is
    recomputed independently from the exact distance-kernel Laplace
    coefficients, so ``|residual| <= tol + tail_bound`` checks the whole
    spectral pipeline.
    """
    d = X.d
    dist_term = _plain_distance_sum(X) / float(X.n) ** 2
    if route == "closed-form":
        rep = wce_distance_kernel(X)
    elif route == "series":
        spec = distance_kernel_spec(d)
        if max_degree is None:
            max_degree = max(256, 4 * int(math.isqrt(X.n)) + 64)
        rep = wce_squared(X, spec, max_degree=max_degree)
    else:
        raise ValueError(f"unknown route {route!r}")
    residual = dist_term + d / specfun.gamma_d(d) * rep.wce_squared - mean_distance(d)
    return StolarskyResidual(
        residual=float(residual),
        tail_bound=d / specfun.gamma_d(d) * rep.tail_bound,
    )


# ---------------------------------------------------------------------------
# L2 cap discrepancy.


def l2_discrepancy(
    X: PointSet,
    quad_points: int | None = None,
    tol: float = 1e-8,
    max_degree: int | None = None,
) -> float:
    """Square root of the sin-weighted integral of the number variance.

    Two routes are evaluated: Gauss-Legendre quadrature in the cap angle of
    the truncated spectral variance, and the degreewise route that integrates
    each ``a_n(phi)^2`` first.  They must agree within ``tol`` (raises
    :class:`QuadratureError` otherwise); the degreewise value is returned.
    """
    d, n_pts = X.d, X.n
    if max_degree is None:
        max_degree = max(64, 6 * int(math.isqrt(n_pts)) + 16)
    if quad_points is None:
        quad_points = max(8, max_degree + d + 8)
    if quad_points < 8:
        raise ValueError("quad_points must be >= 8")

    weyl = variance.weyl_sum_table(X, max_degree)

    # Route A: quadrature of V_M over cap angles.  In u = cos(phi) the
    # integrand is a polynomial of degree <= 2 max_degree + 2d - 2, so
    # Gauss-Legendre with quad_points >= max_degree + d nodes is exact.
    u, w = np.polynomial.legendre.leggauss(quad_points)
    phis = np.arccos(u)
    a_table = specfun.laplace_coeff_table(d, max_degree, phis)  # (M, nodes)
    zs = specfun.zdim_table(d, max_degree)[1:]
    v_nodes = (a_table * a_table * zs[:, None] * weyl[:, None]).sum(axis=0)
    route_a = float(np.dot(v_nodes, w))

    # Route B: integrate each degree first (4 * max_degree nodes).
    an_int = _squared_coeff_integrals(d, max_degree)
    route_b = math.fsum((an_int * zs * weyl).tolist())

    if not math.isclose(route_a, route_b, rel_tol=0.0, abs_tol=tol * max(1.0, abs(route_b))):
        raise QuadratureError(
            f"angle-quadrature and degreewise discrepancy routes disagree: "
            f"{route_a!r} vs {route_b!r}"
        )
    return math.sqrt(max(0.0, route_b))


_an_int_cache: dict[int, np.ndarray] = {}


def _squared_coeff_integrals(d: int, max_degree: int) -> np.ndarray:
    """``int_0^pi a_n(phi)^2 sin(phi) dphi`` for n = 1..max_degree (cached).

    Computed in u = cos(phi), where each integrand is an exact polynomial.
    """
    cached = _an_int_cache.get(d)
    if cached is not None and len(cached) >= max_degree:
        return cached[:max_degree]
    nodes = 4 * max_degree + 32
    u, w = np.polynomial.legendre.leggauss(nodes)
    a_table = specfun.laplace_coeff_table(d, max_degree, np.arccos(u))
    vals = (a_table * a_table) @ w
    _an_int_cache[d] = vals
    return vals


# ---------------------------------------------------------------------------
# Calibrated constant for the variance <= wce bound.

_lemma_cache: dict[int, float] = {}

#: Angles and families used to calibrate the constant, fixed once.
_LEMMA_ANGLES = np.linspace(0.15, 1.5, 8)


def variance_bound_constant(d: int, recalibrate: bool = False) -> float:
    """Single constant C with ``V(X, phi) <= C sin(phi)^(d-1) N^2 wce^2``
    (worst-case error at smoothness (d+1)/2, distance kernel) across the
    calibration family; fixed per dimension after first call.

    Calibrated as 1.15 times the maximum observed ratio over seeded random
    sets, Fibonacci lattices (d=2) and small distance maximisers.
    """
    if not recalibrate and d in _lemma_cache:
        return _lemma_cache[d]
    family = [random_uniform(d, n, seed) for n in (16, 64, 192) for seed in (0, 1, 2)]
    if d == 2:
        family += [fibonacci_sphere(n) for n in (128, 512)]
    ratio_max = 0.0
    for X in family:
        ratio_max = max(ratio_max, _lemma_ratio_max(X))
    value = 1.15 * ratio_max
    _lemma_cache[d] = value
    return value


def _lemma_ratio_max(X: PointSet, num_centers: int = 40_000, seed: int = 99) -> float:
    """max over the fixed angle grid of V / (sin^(d-1)(phi) N^2 wce^2)."""
    d = X.d
    wce2 = wce_distance_kernel(X).wce_squared
    denom = float(X.n) ** 2 * max(wce2, 1e-300)
    vals, ses = variance._direct_batch(X, _LEMMA_ANGLES, num_centers, seed)
    ratios = (vals + 3.0 * ses) / (np.sin(_LEMMA_ANGLES) ** (d - 1) * denom)
    return float(np.max(ratios))
