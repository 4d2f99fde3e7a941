"""Finite point sets on the d-sphere.

Generators (seeded uniform, spherical Fibonacci lattice), text-file I/O in
the whitespace-separated format used by published design tables, and a
projected-gradient ascent for configurations maximising generalised
distance sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "PointSet",
    "PointSetFormatError",
    "OptimizerOptions",
    "random_uniform",
    "fibonacci_sphere",
    "load_pointset",
    "save_pointset",
    "pairwise_distance_sum",
    "maximize_distance_sum",
]

NORM_ATOL = 1e-12
LOAD_NORM_TOL = 1e-6

_GOLDEN_CONJ = (math.sqrt(5.0) - 1.0) / 2.0


class PointSetFormatError(ValueError):
    """Malformed point-set file; carries the offending path and line number."""

    def __init__(self, message: str, path=None, line: int | None = None):
        loc = ""
        if path is not None:
            loc = f"{path}"
            if line is not None:
                loc += f":{line}"
            loc = f" ({loc})"
        super().__init__(message + loc)
        self.path = path
        self.line = line


@dataclass(frozen=True, eq=False)
class PointSet:
    """N unit vectors in R^(d+1) plus a provenance record.

    Immutable: the coordinate array is made read-only on construction, so
    instances are safe to share across threads.
    """

    points: np.ndarray
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1 or pts.shape[1] < 2:
            raise ValueError("points must be a nonempty (N, d+1) array with d >= 1")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(np.abs(norms - 1.0) > NORM_ATOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise ValueError(f"points must be unit vectors (worst deviation {worst:.3e})")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1] - 1

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        gen = self.provenance.get("generator", "?")
        return f"PointSet(n={self.n}, d={self.d}, generator={gen!r})"


def _normalized(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def random_uniform(d: int, N: int, seed: int) -> PointSet:
    """N points i.i.d. uniform on S^d (normalised Gaussians), fixed by seed."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    rng = np.random.default_rng(seed)
    pts = rng.standard_normal((N, d + 1))
    norms = np.linalg.norm(pts, axis=1)
    while np.any(norms < 1e-12):  # essentially never
        bad = norms < 1e-12
        pts[bad] = rng.standard_normal((int(bad.sum()), d + 1))
        norms = np.linalg.norm(pts, axis=1)
    return PointSet(
        pts / norms[:, None],
        provenance={"generator": "random", "seed": int(seed), "d": int(d), "n": int(N)},
    )


def fibonacci_sphere(N: int) -> PointSet:
    """Spherical Fibonacci lattice on S^2 (offset variant, pole-free).

    Point k has height ``z_k = 1 - (2k+1)/N`` and longitude
    ``2 pi k g`` with g the golden ratio conjugate.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    k = np.arange(N)
    z = 1.0 - (2.0 * k + 1.0) / N
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    theta = 2.0 * math.pi * _GOLDEN_CONJ * k
    pts = np.column_stack([r * np.cos(theta), r * np.sin(theta), z])
    return PointSet(
        _normalized(pts),
        provenance={"generator": "fibonacci", "d": 2, "n": int(N)},
    )


def load_pointset(path, expected_dim: int | None = None) -> PointSet:
    """Read a point set from a text file (one point per line, `#` comments).

    Points must be within 1e-6 of unit norm and are renormalised exactly.
    Raises :class:`PointSetFormatError` with the offending line number on
    parse failures, column-count mismatches, or non-unit rows.
    """
    path = Path(path)
    rows = []
    ncols = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split()
            try:
                vals = [float(v) for v in fields]
            except ValueError:
                raise PointSetFormatError(
                    f"cannot parse coordinates {text!r}", path, lineno
                ) from None
            if ncols is None:
                ncols = len(vals)
                if ncols < 2:
                    raise PointSetFormatError(
                        f"need at least 2 coordinates per point, got {ncols}", path, lineno
                    )
            elif len(vals) != ncols:
                raise PointSetFormatError(
                    f"expected {ncols} columns, got {len(vals)}", path, lineno
                )
            norm = math.hypot(*vals)
            if abs(norm - 1.0) > LOAD_NORM_TOL:
                raise PointSetFormatError(
                    f"point has norm {norm:.8g}, more than {LOAD_NORM_TOL:g} from 1",
                    path,
                    lineno,
                )
            rows.append([v / norm for v in vals])
    if not rows:
        raise PointSetFormatError("no points found", path)
    if expected_dim is not None and ncols != expected_dim + 1:
        raise PointSetFormatError(
            f"dimension mismatch: file has d={ncols - 1}, expected d={expected_dim}", path
        )
    return PointSet(
        np.asarray(rows, dtype=float),
        provenance={"generator": "file", "path": str(path)},
    )


def save_pointset(X: PointSet, path) -> None:
    """Write a point set in the text format read by :func:`load_pointset`.

    Coordinates are emitted with 17 significant digits, which round-trips
    IEEE doubles exactly.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(f"# point set on S^{X.d}, n={X.n}\n")
        for row in X.points:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
    tmp.replace(path)


# ---------------------------------------------------------------------------
# Generalised distance-sum ascent.


@dataclass
class OptimizerOptions:
    max_iterations: int = 2000
    step_size: float = 0.5
    gradient_tolerance: float = 1e-10
    restarts: int = 1
    seed: int = 0
    record_trace: bool = False

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.gradient_tolerance <= 0:
            raise ValueError("gradient_tolerance must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")


def pairwise_distance_sum(X: PointSet, exponent: float) -> float:
    """``sum_{j,k} |x_j - x_k|^exponent`` over all ordered pairs (diagonal 0)."""
    if not 0.0 < exponent < 2.0:
        raise ValueError("exponent must lie in (0, 2)")
    pts = X.points
    gram = np.clip(pts @ pts.T, -1.0, 1.0)
    sq = np.maximum(0.0, 2.0 - 2.0 * gram)
    np.fill_diagonal(sq, 0.0)
    return float(np.sum(sq ** (exponent / 2.0)))


def _distance_objective_grad(pts: np.ndarray, p: float, rng) -> tuple[float, np.ndarray]:
    n = pts.shape[0]
    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    if n > 1:
        off = ~np.eye(n, dtype=bool)
        colliding = (dist < 1e-12) & off
        if np.any(colliding):
            # measure-zero event: nudge coincident points along the tangent
            idx = np.unique(np.nonzero(colliding)[0])
            noise = 1e-9 * rng.standard_normal((len(idx), pts.shape[1]))
            pts = pts.copy()
            pts[idx] += noise - (np.sum(noise * pts[idx], axis=1, keepdims=True)) * pts[idx]
            pts[idx] /= np.linalg.norm(pts[idx], axis=1, keepdims=True)
            diff = pts[:, None, :] - pts[None, :, :]
            dist = np.linalg.norm(diff, axis=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = dist ** (p - 2.0)
    np.fill_diagonal(w, 0.0)
    obj = float(np.sum(w * dist * dist))
    grad = 2.0 * p * np.einsum("jk,jkc->jc", w, diff)
    return obj, grad


def _ascend(pts: np.ndarray, p: float, opts: OptimizerOptions, rng) -> dict:
    step = opts.step_size
    obj, grad = _distance_objective_grad(pts, p, rng)
    trace = [obj] if opts.record_trace else None
    iterations = 0
    converged = False
    for iterations in range(1, opts.max_iterations + 1):
        tangent = grad - np.sum(grad * pts, axis=1, keepdims=True) * pts
        gnorm = float(np.max(np.abs(tangent))) if pts.shape[0] > 1 else 0.0
        if gnorm <= opts.gradient_tolerance:
            converged = True
            break
        improved = False
        for _ in range(60):
            cand = _normalized(pts + step * tangent)
            cand_obj, cand_grad = _distance_objective_grad(cand, p, rng)
            if cand_obj > obj:
                pts, obj, grad = cand, cand_obj, cand_grad
                step *= 1.25
                improved = True
                break
            step *= 0.5
        if not improved:
            # step underflow: gradient direction no longer improves the
            # objective at representable step sizes
            converged = gnorm <= max(opts.gradient_tolerance, 1e-8 * (1.0 + abs(obj)))
            break
        if trace is not None:
            trace.append(obj)
    return {
        "points": pts,
        "objective": obj,
        "iterations": iterations,
        "converged": converged,
        "trace": trace,
    }


def maximize_distance_sum(
    d: int,
    N: int,
    tau: float,
    opts: OptimizerOptions | None = None,
    initial: PointSet | None = None,
) -> PointSet:
    """Locally maximise ``sum_{j,k} |x_j - x_k|^(2 tau - d)`` on S^d.

    Riemannian projected-gradient ascent with backtracking line search and
    best-of-``opts.restarts`` restarts.  ``tau`` must lie strictly inside
    (d/2, d/2 + 1) so the distance exponent is in (0, 2).  Non-convergence is
    reported in the provenance record, never silently.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if N < 1:
        raise ValueError("N must be >= 1")
    if not d / 2.0 < tau < d / 2.0 + 1.0:
        raise ValueError(f"tau must lie in (d/2, d/2 + 1) = ({d / 2}, {d / 2 + 1})")
    opts = opts or OptimizerOptions()
    p = 2.0 * tau - d

    results = []
    for r in range(opts.restarts):
        rng = np.random.default_rng((opts.seed, r))
        if initial is not None and r == 0:
            if initial.d != d or initial.n != N:
                raise ValueError("initial point set has wrong shape")
            start = np.array(initial.points, dtype=float)
        else:
            start = _normalized(np.random.default_rng((opts.seed, r, 1)).standard_normal((N, d + 1)))
        results.append(_ascend(start, p, opts, rng))

    best_idx = max(range(len(results)), key=lambda i: (results[i]["objective"], -i))
    best = results[best_idx]
    provenance = {
        "generator": "maxdist",
        "d": int(d),
        "n": int(N),
        "tau": float(tau),
        "seed": int(opts.seed),
        "restarts": [
            {
                "objective": res["objective"],
                "iterations": res["iterations"],
                "converged": res["converged"],
                **({"trace": res["trace"]} if res["trace"] is not None else {}),
            }
            for res in results
        ],
        "best_restart": best_idx,
        "objective": best["objective"],
        "converged": best["converged"],
    }
    return PointSet(best["points"], provenance=provenance)
