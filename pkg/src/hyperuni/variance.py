"""Number variance of point sets in spherical caps.

Two independent evaluators are provided: the exact spectral expansion
``V(X, phi) = sum_n a_n(phi)^2 Z(d, n) W_n(X)`` over the Weyl sums
``W_n(X) = sum_{ij} P_n^(d)(<x_i, x_j>)``, truncated with a certified tail
bound, and a seeded Monte Carlo estimator of the defining integral over cap
centers.  The i.i.d. closed form ``N sigma (1 - sigma)`` is the comparison
baseline throughout.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import specfun
from .pointset import PointSet

__all__ = [
    "WeylSum",
    "SpectralVariance",
    "DirectVariance",
    "VarianceProfile",
    "weyl_sum",
    "weyl_sum_table",
    "number_variance_spectral",
    "number_variance_direct",
    "iid_variance",
    "variance_profile",
    "cap_kernel",
]


class WeylSum(NamedTuple):
    n: int
    value: float
    num_points: int


class SpectralVariance(NamedTuple):
    value: float
    tail_bound: float


class DirectVariance(NamedTuple):
    estimate: float
    standard_error: float


def thread_count() -> int:
    """Parallelism cap from the HYPERUNI_THREADS environment variable."""
    raw = os.environ.get("HYPERUNI_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Weyl sums.


def weyl_sum_table(X: PointSet, max_degree: int) -> np.ndarray:
    """Weyl sums ``W_n(X)`` for n = 1..max_degree (cached on the point set).

    Ordered pairs including the diagonal; accumulation runs over fixed
    row-major chunks so results do not depend on the thread count.
    """
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    cached = getattr(X, "_weyl_table", None)
    if cached is not None and len(cached) >= max_degree:
        return cached[:max_degree]
    grow = max(max_degree, int(1.3 * len(cached)) if cached is not None else 0, 16)
    table = _compute_weyl_table(X.points, X.d, grow)
    object.__setattr__(X, "_weyl_table", table)
    return table[:max_degree]


def _compute_weyl_table(pts: np.ndarray, d: int, max_degree: int) -> np.ndarray:
    n_pts = pts.shape[0]
    chunk = max(1, min(n_pts, 2_000_000 // n_pts))
    starts = list(range(0, n_pts, chunk))

    def work(i0: int) -> np.ndarray:
        block = pts[i0 : i0 + chunk]
        g = np.clip(block @ pts.T, -1.0, 1.0)
        out = np.empty(max_degree)
        p_prev = np.ones_like(g)
        p_cur = g
        out[0] = g.sum()
        for k in range(1, max_degree):
            p_next = ((2 * k + d - 1) * g * p_cur - k * p_prev) / (k + d - 1)
            p_prev, p_cur = p_cur, p_next
            out[k] = p_cur.sum()
        return out

    workers = thread_count()
    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(work, starts))
    else:
        partials = [work(i0) for i0 in starts]
    table = np.zeros(max_degree)
    for part in partials:  # fixed chunk order: deterministic reduction
        table += part
    return table


def weyl_sum(X: PointSet, n: int) -> WeylSum:
    """``sum_{i,j} P_n^(d)(<x_i, x_j>)`` including the diagonal (each term 1)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    table = weyl_sum_table(X, n)
    return WeylSum(n=n, value=float(table[n - 1]), num_points=X.n)


# ---------------------------------------------------------------------------
# Number variance.


def iid_variance(d: int, N: int, phi: float) -> float:
    """Expected number variance of N i.i.d. uniform points: N sigma (1 - sigma)."""
    if N < 1:
        raise ValueError("N must be >= 1")
    sigma = specfun.cap_measure(d, phi)
    return N * sigma * (1.0 - sigma)


def default_spectral_tol(d: int, N: int, phi: float) -> float:
    """Default per-angle tolerance: 1e-8 relative to max(1, iid variance)."""
    return 1e-8 * max(1.0, iid_variance(d, N, phi))


def number_variance_spectral(
    X: PointSet,
    phi: float,
    tol: float | None = None,
    max_degree: int | None = None,
    hard_cap: int = specfun.DEFAULT_DEGREE_CAP,
) -> SpectralVariance:
    """Number variance by the truncated spectral expansion.

    With ``tol`` given (or defaulted), the truncation degree is chosen so the
    certified tail bound is below ``tol``; this can be infeasible for large N
    because the worst-case bound uses ``W_n <= N^2`` (a
    :class:`~hyperuni.specfun.TruncationError` is raised beyond ``hard_cap``).
    Passing ``max_degree`` instead evaluates a fixed-degree partial sum and
    reports the honest worst-case tail bound for it.
    """
    d, n_pts = X.d, X.n
    phi = float(phi)
    if max_degree is None:
        if tol is None:
            tol = default_spectral_tol(d, n_pts, phi)
        trunc = specfun.truncation_for_tolerance(d, phi, n_pts, tol, hard_cap=hard_cap)
    else:
        trunc = _fixed_degree_truncation(d, phi, n_pts, max_degree)
    m = trunc.max_degree
    terms = specfun.cap_series_terms(d, phi, m)
    weyl = weyl_sum_table(X, m)
    value = _compensated_dot(terms, weyl[:m])
    return SpectralVariance(value=value, tail_bound=trunc.tail_bound)


def _fixed_degree_truncation(d: int, phi: float, n_pts: int, max_degree: int):
    if max_degree < 1:
        raise ValueError("max_degree must be >= 1")
    if phi <= 0.0 or phi >= math.pi:
        return specfun.SeriesTruncation(max_degree, 0.0)
    sigma = specfun.cap_measure(d, phi)
    total = sigma * (1.0 - sigma)
    cushion = 64.0 * np.finfo(float).eps * max(1.0, total)
    series = specfun._cap_series(d, phi, max_degree)
    tail = max(total - float(series.cumsum[max_degree - 1]), 0.0) + cushion
    tail = min(tail, specfun._envelope_tail(d, phi, max_degree))
    return specfun.SeriesTruncation(max_degree, tail * float(n_pts) ** 2)


def _compensated_dot(a: np.ndarray, b: np.ndarray) -> float:
    prod = a * b
    if len(prod) <= 200_000:
        return math.fsum(prod.tolist())
    return float(np.add.reduce(prod))


def number_variance_direct(
    X: PointSet,
    phi: float,
    num_centers: int,
    seed: int,
) -> DirectVariance:
    """Monte Carlo number variance: seeded uniform cap centers, strict test
    ``<x, x_i> > cos(phi)`` for membership; returns (estimate, standard error).
    """
    est, se = _direct_batch(X, np.array([float(phi)]), num_centers, seed)
    return DirectVariance(estimate=float(est[0]), standard_error=float(se[0]))


def _direct_batch(X: PointSet, angles: np.ndarray, num_centers: int, seed: int):
    if num_centers < 2:
        raise ValueError("num_centers must be >= 2")
    d, pts = X.d, X.points
    n_pts = pts.shape[0]
    thresholds = np.cos(angles)
    order = np.argsort(thresholds, kind="stable")
    thr_sorted = thresholds[order]
    n_thr = len(thr_sorted)
    expected = n_pts * specfun.cap_measure(d, angles)

    rng = np.random.default_rng(seed)
    sum_y = np.zeros(n_thr)
    sum_y2 = np.zeros(n_thr)
    chunk = max(1, min(num_centers, 4_000_000 // max(1, n_pts)))
    drawn = 0
    while drawn < num_centers:
        c = min(chunk, num_centers - drawn)
        centers = rng.standard_normal((c, d + 1))
        centers /= np.linalg.norm(centers, axis=1, keepdims=True)
        dots = centers @ pts.T
        # bucket each dot against the sorted thresholds: idx = #thresholds < dot
        idx = np.searchsorted(thr_sorted, dots.ravel(), side="left")
        rows = np.repeat(np.arange(c), n_pts)
        hist = np.bincount(rows * (n_thr + 1) + idx, minlength=c * (n_thr + 1))
        hist = hist.reshape(c, n_thr + 1)
        suffix = np.cumsum(hist[:, ::-1], axis=1)[:, ::-1]
        counts = suffix[:, 1:]  # counts[c, j] = #dots > thr_sorted[j]
        dev = counts - expected[order][None, :]
        y = dev * dev
        sum_y += y.sum(axis=0)
        sum_y2 += (y * y).sum(axis=0)
        drawn += c

    mean = sum_y / num_centers
    var_y = np.maximum(0.0, (sum_y2 - num_centers * mean * mean) / (num_centers - 1))
    se = np.sqrt(var_y / num_centers)
    est_out = np.empty(n_thr)
    se_out = np.empty(n_thr)
    est_out[order] = mean
    se_out[order] = se
    return est_out, se_out


# ---------------------------------------------------------------------------
# Profiles.


@dataclass
class VarianceProfile:
    """Number variance sampled over a grid of cap angles.

    ``errors`` holds the certified spectral tail bound or the Monte Carlo
    standard error per angle, depending on ``method``.
    """

    angles: np.ndarray
    values: np.ndarray
    errors: np.ndarray
    method: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if not (len(self.angles) == len(self.values) == len(self.errors)):
            raise ValueError("angles, values and errors must have equal length")
        if np.any(np.diff(self.angles) <= 0):
            raise ValueError("angles must be strictly increasing")
        if np.any((self.angles <= 0) | (self.angles >= math.pi)):
            raise ValueError("angles must lie in (0, pi)")
        if self.method not in ("spectral", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["phi", "value", "error", "method"])
            for phi, val, err in zip(self.angles, self.values, self.errors):
                writer.writerow([f"{phi:.17g}", f"{val:.17g}", f"{err:.17g}", self.method])

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "angles": [float(v) for v in self.angles],
            "values": [float(v) for v in self.values],
            "errors": [float(v) for v in self.errors],
            "meta": self.meta,
        }


def variance_profile(
    X: PointSet,
    angles,
    method: str = "spectral",
    tol: float | None = None,
    max_degree: int | None = None,
    num_centers: int = 20_000,
    seed: int = 0,
) -> VarianceProfile:
    """Evaluate the number variance on a grid of angles with one method.

    Spectral profiles share a single Weyl-sum table across the grid; Monte
    Carlo profiles share one stream of cap centers (deterministic for a fixed
    seed).
    """
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 1 or len(angles) == 0:
        raise ValueError("angles must be a nonempty 1-d grid")
    if np.any((angles <= 0) | (angles >= math.pi)) or np.any(np.diff(angles) <= 0):
        raise ValueError("angles must be strictly increasing inside (0, pi)")

    meta = {
        "n": X.n,
        "d": X.d,
        "provenance": X.provenance,
    }
    if method == "spectral":
        values = np.empty(len(angles))
        errors = np.empty(len(angles))
        truncs = []
        for phi in angles:
            if max_degree is None:
                t = tol if tol is not None else default_spectral_tol(X.d, X.n, float(phi))
                truncs.append(specfun.truncation_for_tolerance(X.d, float(phi), X.n, t))
            else:
                truncs.append(_fixed_degree_truncation(X.d, float(phi), X.n, max_degree))
        m_max = max(t.max_degree for t in truncs)
        weyl = weyl_sum_table(X, m_max)
        for i, (phi, trunc) in enumerate(zip(angles, truncs)):
            terms = specfun.cap_series_terms(X.d, float(phi), trunc.max_degree)
            values[i] = _compensated_dot(terms, weyl[: trunc.max_degree])
            errors[i] = trunc.tail_bound
        meta.update({"tol": tol, "max_degree": max_degree})
    elif method == "monte-carlo":
        values, errors = _direct_batch(X, angles, num_centers, seed)
        meta.update({"num_centers": num_centers, "seed": seed})
    else:
        raise ValueError(f"unknown method {method!r}")
    return VarianceProfile(angles=angles, values=values, errors=errors, method=method, meta=meta)


def cap_kernel(d: int, phi: float, t, max_degree: int):
    """Truncated cap autocovariance kernel ``sum_n a_n^2 Z(d, n) P_n^(d)(t)``.

    Positive definite in the Schoenberg sense for every truncation degree
    because all series coefficients are nonnegative.
    """
    terms = specfun.cap_series_terms(d, phi, max_degree)
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    t_arr = np.clip(t_arr, -1.0, 1.0)
    acc = np.zeros_like(t_arr)
    p_prev = np.ones_like(t_arr)
    p_cur = t_arr.copy()
    acc += terms[0] * p_cur
    for k in range(1, max_degree):
        p_next = ((2 * k + d - 1) * t_arr * p_cur - k * p_prev) / (k + d - 1)
        p_prev, p_cur = p_cur, p_next
        acc += terms[k] * p_cur
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(acc[0])
    return acc
