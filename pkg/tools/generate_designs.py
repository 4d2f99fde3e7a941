#!/usr/bin/env python3
"""Generate the bundled spherical t-design tables (d = 2).

Antipodally symmetric configurations X = {+y_k, -y_k} kill all odd-degree
Weyl sums exactly, so a t-design only needs the even degrees 2..t zeroed.
We minimise the design potential

    F(Y) = (1/N^2) sum_{even n <= t} Z(2, n) W_n(X)
         = (4/N^2) sum_{k,l} K(<y_k, y_l>),   K(u) = sum_{even n <= t} Z(2,n) P_n(u)

over the free hemisphere points with L-BFGS (unconstrained parametrisation,
normalising inside the objective).  F is nonnegative and vanishes exactly at
t-designs; we accept a configuration once every W_n / N^2 for n <= t is below
1e-10, two orders stricter than the 1e-8 N^2 acceptance threshold.

Run from the repository root:

    python3 tools/generate_designs.py [--max-t 22] [--out src/hyperuni/data/designs]
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from hyperuni.pointset import PointSet, fibonacci_sphere, save_pointset  # noqa: E402
from hyperuni.variance import weyl_sum_table  # noqa: E402

TARGET = 1e-10  # max W_n / N^2 accepted for shipping


def legendre_table(t: int, u: np.ndarray) -> np.ndarray:
    """Classical Legendre P_0..P_t on u, stacked along axis 0."""
    out = np.empty((t + 1,) + u.shape)
    out[0] = 1.0
    if t >= 1:
        out[1] = u
    for k in range(1, t):
        out[k + 1] = ((2 * k + 1) * u * out[k] - k * out[k - 1]) / (k + 1)
    return out


def kernel_and_derivative(t: int, u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """K(u) = sum_{even n<=t} (2n+1) P_n(u) and K'(u)."""
    table = legendre_table(t, u)
    kv = np.zeros_like(u)
    kd = np.zeros_like(u)
    one_minus = np.maximum(1e-14, 1.0 - u * u)
    for n in range(2, t + 1, 2):
        kv += (2 * n + 1) * table[n]
        # (1 - u^2) P_n'(u) = n (P_{n-1}(u) - u P_n(u))
        kd += (2 * n + 1) * n * (table[n - 1] - u * table[n]) / one_minus
    return kv, kd


def design_potential(v: np.ndarray, t: int, h: int) -> tuple[float, np.ndarray]:
    """F(Y) over the off-diagonal pairs plus the constant diagonal part."""
    y = v.reshape(h, 3)
    norms = np.linalg.norm(y, axis=1, keepdims=True)
    yn = y / norms
    g = np.clip(yn @ yn.T, -1.0, 1.0)
    kv, kd = kernel_and_derivative(t, g)
    np.fill_diagonal(kd, 0.0)
    k1 = kv[0, 0]  # K(1), diagonal value
    off = kv.copy()
    np.fill_diagonal(off, 0.0)
    n2 = float(2 * h) ** 2
    f = (4.0 / n2) * (off.sum() + h * k1)
    grad_y = (8.0 / n2) * (kd @ yn)
    # chain rule through the normalisation
    grad_v = (grad_y - np.sum(grad_y * yn, axis=1, keepdims=True) * yn) / norms
    return f, grad_v.ravel()


def worst_weyl(points: np.ndarray, t: int) -> float:
    X = PointSet(points)
    table = weyl_sum_table(X, t)
    return float(np.max(table[:t]) / X.n**2)


def half_count(t: int) -> int:
    # Symmetric (antipodal) t-designs are known at N ~ (t+2)^2 / 2; a couple
    # of extra point pairs give the optimiser slack.
    return int(math.ceil((t + 2) ** 2 / 4.0)) + 2


def initial_halfset(h: int, attempt: int) -> np.ndarray:
    if attempt == 0:
        base = fibonacci_sphere(2 * h).points[:h]
        return base
    rng = np.random.default_rng((1234, h, attempt))
    y = rng.standard_normal((h, 3))
    return y / np.linalg.norm(y, axis=1, keepdims=True)


def generate_design(t: int, max_attempts: int = 8) -> np.ndarray | None:
    h = half_count(t)
    for attempt in range(max_attempts):
        y0 = initial_halfset(h, attempt)
        res = minimize(
            design_potential,
            y0.ravel(),
            args=(t, h),
            jac=True,
            method="L-BFGS-B",
            options={"maxiter": 60000, "ftol": 1e-18, "gtol": 1e-14, "maxcor": 30},
        )
        y = res.x.reshape(h, 3)
        y /= np.linalg.norm(y, axis=1, keepdims=True)
        pts = np.vstack([y, -y])
        worst = worst_weyl(pts, t)
        print(f"  t={t:2d} h={h:3d} attempt={attempt} F={res.fun:.3e} "
              f"worst W_n/N^2 = {worst:.3e}")
        if worst <= TARGET:
            return pts
    return None


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-t", type=int, default=22)
    ap.add_argument("--out", type=Path,
                    default=Path(__file__).resolve().parent.parent / "src/hyperuni/data/designs")
    args = ap.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    index = []
    for t in range(2, args.max_t + 1, 2):
        t0 = time.time()
        pts = generate_design(t)
        if pts is None:
            print(f"FAILED to reach target for t={t}")
            return 1
        n = pts.shape[0]
        name = f"design_t{t:02d}_n{n:04d}.txt"
        X = PointSet(pts, provenance={"generator": "design", "t": t, "n": n})
        save_pointset(X, args.out / name)
        index.append({"t": t, "n": n, "file": name})
        print(f"  wrote {name}  ({time.time() - t0:.1f}s)")
    with open(args.out / "index.json", "w", encoding="utf-8") as fh:
        json.dump({"d": 2, "designs": index}, fh, indent=1)
    print(f"wrote index with {len(index)} designs")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
