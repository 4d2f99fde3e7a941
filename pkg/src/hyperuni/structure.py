"""Sequence-level diagnostics: structure factor, regime classification,
Weyl-sum decay and empirical strength.

The three hyperuniformity regimes are defined by limits; for finite
sequences these classifiers fit log-log scaling exponents and issue
``consistent`` / ``inconsistent`` / ``inconclusive`` verdicts with
documented, configurable thresholds.  The i.i.d. baseline
``V = N sigma (1 - sigma)`` must always come out ``inconsistent``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import energy, specfun, variance
from .pointset import PointSet, random_uniform

__all__ = [
    "PointSetSequence",
    "RegimeReport",
    "StructureFactor",
    "WeylDecay",
    "LogLogFit",
    "fit_loglog",
    "mc_variance_evaluator",
    "spectral_variance_evaluator",
    "iid_closed_form_evaluator",
    "seed_averaged_iid_evaluator",
    "structure_factor",
    "classify_large_caps",
    "classify_small_caps",
    "classify_threshold",
    "weyl_decay_exponent",
    "estimate_strength",
    "weyl_sweep",
]

#: Strict-inequality slack so exact baselines (slope exactly at a threshold)
#: are never classified consistent through roundoff.
VERDICT_EPS = 1e-6

#: Relative clamp floor applied before logarithms.
CLAMP_REL = 1e-12

#: Absolute slack when comparing fitted worst-case-error slopes with the
#: QMC-design rate -s/d: finite sequences carry a small systematic truncation
#: bias that regression standard errors do not see.
STRENGTH_SLACK = 0.05


@dataclass(frozen=True)
class PointSetSequence:
    """Ordered point sets with strictly increasing N on a common sphere."""

    members: tuple[PointSet, ...]
    label: str = ""

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise ValueError("sequence must be nonempty")
        d = members[0].d
        sizes = [m.n for m in members]
        if any(m.d != d for m in members):
            raise ValueError("all members must share the same sphere dimension")
        if any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise ValueError("member sizes must be strictly increasing")
        object.__setattr__(self, "members", members)

    @property
    def d(self) -> int:
        return self.members[0].d

    @property
    def sizes(self) -> list[int]:
        return [m.n for m in self.members]

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)


class LogLogFit(NamedTuple):
    slope: float
    stderr: float
    intercept: float


def fit_loglog(x, y) -> LogLogFit:
    """Least-squares slope of log y against log x with its standard error."""
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    if len(lx) < 2:
        return LogLogFit(math.nan, math.inf, math.nan)
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    if len(lx) == 2:
        return LogLogFit(slope, math.inf, intercept)
    resid = ly - a @ coef
    dof = len(lx) - 2
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if sxx > 0 else math.inf
    return LogLogFit(slope, stderr, intercept)


# ---------------------------------------------------------------------------
# Variance evaluators: (member, angles) -> (values, errors).

VarianceEvaluator = Callable[[PointSet, np.ndarray], tuple[np.ndarray, np.ndarray]]


def mc_variance_evaluator(num_centers: int = 40_000, base_seed: int = 2024) -> VarianceEvaluator:
    """Monte Carlo evaluator; the center stream is seeded per member size,
    so results are deterministic for a fixed base seed."""

    def evaluate(member: PointSet, angles: np.ndarray):
        return variance._direct_batch(member, angles, num_centers, (base_seed, member.n))

    return evaluate


def spectral_variance_evaluator(
    degree_scale: float = 6.0,
    min_degree: int = 64,
    max_degree_cap: int = 3000,
) -> VarianceEvaluator:
    """Fixed-degree spectral evaluator with M ~ degree_scale * N^(1/d)
    (values carry a consistent truncation bias; errors are certified tails)."""

    def evaluate(member: PointSet, angles: np.ndarray):
        m = int(min(max_degree_cap, max(min_degree, degree_scale * member.n ** (1.0 / member.d))))
        prof = variance.variance_profile(member, angles, method="spectral", max_degree=m)
        return prof.values, prof.errors

    return evaluate


def iid_closed_form_evaluator() -> VarianceEvaluator:
    """Exact i.i.d. expectation ``N sigma (1 - sigma)`` (baseline oracle)."""

    def evaluate(member: PointSet, angles: np.ndarray):
        vals = np.array([variance.iid_variance(member.d, member.n, float(p)) for p in angles])
        return vals, np.zeros_like(vals)

    return evaluate


def seed_averaged_iid_evaluator(
    num_seeds: int = 100,
    num_centers: int = 4000,
    base_seed: int = 7,
) -> VarianceEvaluator:
    """Measured i.i.d. baseline: V averaged over ``num_seeds`` fresh uniform
    sets of the member's size (the member's own points are ignored)."""

    if num_seeds < 2:
        raise ValueError("num_seeds must be >= 2")

    def evaluate(member: PointSet, angles: np.ndarray):
        d, n = member.d, member.n
        acc = np.zeros((num_seeds, len(angles)))
        for k in range(num_seeds):
            xk = random_uniform(d, n, seed=np.random.default_rng((base_seed, n, k)).integers(2**62))
            vals, _ = variance._direct_batch(xk, angles, num_centers, (base_seed, n, k, 1))
            acc[k] = vals
        mean = acc.mean(axis=0)
        se = acc.std(axis=0, ddof=1) / math.sqrt(num_seeds)
        return mean, se

    return evaluate


def _default_evaluator() -> VarianceEvaluator:
    return mc_variance_evaluator()


# ---------------------------------------------------------------------------
# Structure factor.


@dataclass
class StructureFactor:
    """Per-size values of ``(1/N) W_n`` with a crude limit extrapolation."""

    n: int
    sizes: list[int]
    values: list[float]
    limit_estimate: float
    limit_stderr: float
    trend_slope: float
    inconclusive: bool

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "sizes": self.sizes,
            "values": self.values,
            "limit_estimate": self.limit_estimate,
            "limit_stderr": self.limit_stderr,
            "trend_slope": self.trend_slope,
            "inconclusive": self.inconclusive,
        }


def structure_factor(seq: PointSetSequence, n: int) -> StructureFactor:
    """Spherical structure factor diagnostic for harmonic degree n.

    The limit estimate is the mean over the last third of the sequence; the
    trend slope (values against log N) flags whether that mean has settled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    sizes = seq.sizes
    values = [variance.weyl_sum(m, n).value / m.n for m in seq]
    k = max(1, len(values) - max(1, math.ceil(len(values) / 3)))
    tail = values[k:] if len(values) > 1 else values
    limit = float(np.mean(tail))
    stderr = float(np.std(tail, ddof=1) / math.sqrt(len(tail))) if len(tail) > 1 else math.inf
    if len(values) >= 3:
        lx = np.log(sizes)
        slope = float(np.polyfit(lx, values, 1)[0])
    else:
        slope = math.nan
    return StructureFactor(
        n=n,
        sizes=sizes,
        values=[float(v) for v in values],
        limit_estimate=limit,
        limit_stderr=stderr,
        trend_slope=slope,
        inconclusive=len(values) < 4,
    )


# ---------------------------------------------------------------------------
# Regime classification.


@dataclass
class RegimeReport:
    regime: str  # "large" | "small" | "threshold"
    verdict: str  # "consistent" | "inconsistent" | "inconclusive"
    exponents: list[dict] = field(default_factory=list)
    table: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "verdict": self.verdict,
            "exponents": self.exponents,
            "table": self.table,
            "config": self.config,
        }


def _clamped_log_values(raw: np.ndarray, floor: np.ndarray) -> tuple[np.ndarray, int]:
    floor = np.maximum(floor, 1e-300)
    clamped = int(np.sum(raw < floor))
    return np.maximum(raw, floor), clamped


def classify_large_caps(
    seq: PointSetSequence,
    phi_grid,
    evaluator: VarianceEvaluator | None = None,
) -> RegimeReport:
    """Fit ``log V(X_N, phi) ~ alpha log N`` per fixed angle.

    Consistent with large-cap hyperuniformity iff the largest
    ``alpha + 2 SE`` over the grid stays below 1.
    """
    phi_grid = np.asarray(phi_grid, dtype=float)
    if np.any((phi_grid <= 0) | (phi_grid >= math.pi / 2)):
        raise ValueError("large-cap angles must lie in (0, pi/2)")
    if np.any(np.diff(phi_grid) <= 0):
        raise ValueError("phi grid must be strictly increasing")
    config = {"regime": "large", "phi_grid": phi_grid.tolist(), "verdict_margin": 2.0}
    if len(seq) < 4:
        return RegimeReport("large", "inconclusive", config=config | {"reason": "fewer than 4 sets"})
    evaluator = evaluator or _default_evaluator()

    sizes = np.array(seq.sizes, dtype=float)
    vals = np.empty((len(seq), len(phi_grid)))
    errs = np.empty_like(vals)
    for i, member in enumerate(seq):
        vals[i], errs[i] = evaluator(member, phi_grid)

    exponents = []
    table = []
    worst = -math.inf
    degenerate = False
    for j, phi in enumerate(phi_grid):
        v, nclamp = _clamped_log_values(vals[:, j], CLAMP_REL * sizes)
        fit = fit_loglog(sizes, v)
        if not math.isfinite(fit.slope) or not math.isfinite(fit.stderr):
            degenerate = True
        exponents.append(
            {"param": float(phi), "slope": fit.slope, "stderr": fit.stderr, "clamped": nclamp}
        )
        worst = max(worst, fit.slope + 2.0 * fit.stderr)
        for i, member in enumerate(seq):
            table.append(
                {
                    "phi": float(phi),
                    "N": member.n,
                    "V": float(vals[i, j]),
                    "error": float(errs[i, j]),
                    "V_over_N": float(vals[i, j] / member.n),
                }
            )
    if degenerate:
        verdict = "inconclusive"
    else:
        verdict = "consistent" if worst < 1.0 - VERDICT_EPS else "inconsistent"
    return RegimeReport("large", verdict, exponents, table, config | {"max_slope_plus_2se": worst})


def classify_small_caps(
    seq: PointSetSequence,
    w_rule: Callable[[float], float] | None = None,
    evaluator: VarianceEvaluator | None = None,
    w_label: str = "log(N)",
) -> RegimeReport:
    """Shrinking caps ``phi_N = N^(-1/d) w(N)``: fit the normalised ratio
    ``V / (N sigma)`` against N; consistent iff the slope is negative.

    ``w`` must grow without bound while ``phi_N`` shrinks to zero on the
    tested range; violations raise ``ValueError``.
    """
    d = seq.d
    if w_rule is None:
        w_rule = math.log
    sizes = np.array(seq.sizes, dtype=float)
    w_vals = np.array([float(w_rule(n)) for n in sizes])
    phi_n = sizes ** (-1.0 / d) * w_vals
    if np.any(~np.isfinite(w_vals)) or np.any(w_vals <= 0):
        raise ValueError("invalid w_rule: w(N) must be finite and positive")
    if np.any(np.diff(w_vals) <= 0):
        raise ValueError("invalid w_rule: w(N) must grow on the tested range")
    if np.any(np.diff(phi_n) >= 0) or np.any(phi_n >= math.pi):
        raise ValueError("invalid w_rule: phi_N = N^(-1/d) w(N) must shrink on the tested range")
    config = {
        "regime": "small",
        "w_rule": w_label,
        "phi_N": phi_n.tolist(),
        "verdict_margin": 2.0,
    }
    if len(seq) < 4:
        return RegimeReport("small", "inconclusive", config=config | {"reason": "fewer than 4 sets"})
    evaluator = evaluator or _default_evaluator()

    ratios = np.empty(len(seq))
    table = []
    for i, member in enumerate(seq):
        angles = np.array([phi_n[i]])
        val, err = evaluator(member, angles)
        scale = member.n * specfun.cap_measure(d, phi_n[i])
        ratios[i] = val[0] / scale
        table.append(
            {
                "N": member.n,
                "phi_N": float(phi_n[i]),
                "V": float(val[0]),
                "error": float(err[0]),
                "ratio": float(ratios[i]),
            }
        )
    clamped_ratios, nclamp = _clamped_log_values(ratios, np.full(len(seq), CLAMP_REL))
    fit = fit_loglog(sizes, clamped_ratios)
    exponents = [{"param": "ratio", "slope": fit.slope, "stderr": fit.stderr, "clamped": nclamp}]
    if not math.isfinite(fit.slope) or not math.isfinite(fit.stderr):
        verdict = "inconclusive"
    else:
        verdict = "consistent" if fit.slope + 2.0 * fit.stderr < -VERDICT_EPS else "inconsistent"
    return RegimeReport("small", verdict, exponents, table, config)


def classify_threshold(
    seq: PointSetSequence,
    t_grid,
    evaluator: VarianceEvaluator | None = None,
) -> RegimeReport:
    """Caps at threshold order ``phi = t N^(-1/d)``.

    ``V_sup(t)`` is the maximum of V over the last half of the sequence; the
    growth exponent beta is fitted over the upper half of the t grid and
    compared with the surface-order target d - 1 (slack 0.3).
    """
    d = seq.d
    t_grid = np.asarray(t_grid, dtype=float)
    if np.any(t_grid <= 0) or np.any(np.diff(t_grid) <= 0):
        raise ValueError("t grid must be positive and strictly increasing")
    smallest_n = seq.sizes[0]
    if np.any(t_grid * smallest_n ** (-1.0 / d) >= math.pi):
        raise ValueError(f"t grid out of range: t * N^(-1/d) must stay below pi for N={smallest_n}")
    config = {
        "regime": "threshold",
        "t_grid": t_grid.tolist(),
        "target_exponent": d - 1,
        "slack": 0.3,
        "verdict_margin": 2.0,
    }
    if len(seq) < 4:
        return RegimeReport("threshold", "inconclusive", config=config | {"reason": "fewer than 4 sets"})
    evaluator = evaluator or _default_evaluator()

    half = len(seq) // 2
    tail_members = list(seq)[half:]
    v_by_member = {}
    table = []
    for member in tail_members:
        angles = t_grid * member.n ** (-1.0 / d)
        vals, errs = evaluator(member, angles)
        v_by_member[member.n] = vals
        for t, phi, v, e in zip(t_grid, angles, vals, errs):
            table.append(
                {"t": float(t), "N": member.n, "phi": float(phi), "V": float(v), "error": float(e)}
            )
    v_sup = np.array([max(v_by_member[m.n][j] for m in tail_members) for j in range(len(t_grid))])

    upper = t_grid[len(t_grid) // 2 :]
    v_upper = v_sup[len(t_grid) // 2 :]
    if len(upper) < 2:
        return RegimeReport(
            "threshold",
            "inconclusive",
            [],
            table,
            config | {"reason": "t grid too short to fit"},
        )
    floor = CLAMP_REL * np.maximum(1.0, upper ** (d - 1))
    v_clamped, nclamp = _clamped_log_values(v_upper, floor)
    fit = fit_loglog(upper, v_clamped)
    exponents = [
        {"param": "t", "slope": fit.slope, "stderr": fit.stderr, "clamped": nclamp},
    ]
    config["V_sup"] = v_sup.tolist()
    if not math.isfinite(fit.slope) or not math.isfinite(fit.stderr):
        verdict = "inconclusive"
    else:
        bound = (d - 1) + 0.3 + 2.0 * fit.stderr
        verdict = "consistent" if fit.slope <= bound else "inconsistent"
    return RegimeReport("threshold", verdict, exponents, table, config)


# ---------------------------------------------------------------------------
# Weyl-sum decay and strength estimation.


class WeylDecay(NamedTuple):
    beta_hat: float
    stderr: float
    s_implied: float
    s_implied_stderr: float
    num_clamped: int
    clamp_dominated: bool


def weyl_decay_exponent(seq: PointSetSequence, n: int) -> WeylDecay:
    """Slope of ``log W_n`` against ``log N`` along the sequence.

    Values are clamped below at ``1e-12 N^2`` before taking logs; when the
    clamp floor dominates (design-like sequences with vanishing Weyl sums)
    the fit is flagged instead of trusted.  The implied strength lower bound
    is ``s = d (2 - beta) / 2``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if len(seq) < 4:
        raise ValueError("need at least 4 sets")
    d = seq.d
    sizes = np.array(seq.sizes, dtype=float)
    raw = np.array([variance.weyl_sum(m, n).value for m in seq])
    clamped, num_clamped = _clamped_log_values(raw, CLAMP_REL * sizes**2)
    fit = fit_loglog(sizes, clamped)
    s_implied = d * (2.0 - fit.slope) / 2.0
    s_stderr = d * fit.stderr / 2.0
    return WeylDecay(
        beta_hat=fit.slope,
        stderr=fit.stderr,
        s_implied=s_implied,
        s_implied_stderr=s_stderr,
        num_clamped=num_clamped,
        clamp_dominated=num_clamped >= len(seq) // 2,
    )


def estimate_strength(
    seq: PointSetSequence,
    s_grid,
    degree_scale: float = 12.0,
    min_degree: int = 64,
) -> dict:
    """Fit ``log wce(X_N; s)`` against ``log N`` for each smoothness s.

    A sequence behaving like a QMC design sequence for H^s shows slope
    ``-s/d``; the reported ``s_star_hat`` is the largest grid value whose
    fitted slope is still compatible with that rate (within 2 SE).
    """
    d = seq.d
    s_grid = np.asarray(s_grid, dtype=float)
    if np.any(s_grid <= d / 2.0) or np.any(s_grid > d / 2.0 + 3.0):
        raise ValueError("s grid must lie in (d/2, d/2 + 3]")
    if len(seq) < 4:
        raise ValueError("need at least 4 sets")
    sizes = np.array(seq.sizes, dtype=float)
    degrees = [int(max(min_degree, degree_scale * n ** (1.0 / d))) for n in sizes]
    rows = []
    s_star = None
    for s in s_grid:
        spec = energy.sobolev_spec(d, float(s))
        wces = []
        for member, m in zip(seq, degrees):
            rep = energy.wce_squared(member, spec, max_degree=m)
            wces.append(math.sqrt(max(rep.wce_squared, 1e-300)))
        fit = fit_loglog(sizes, np.asarray(wces))
        predicted = -float(s) / d
        compatible = (
            math.isfinite(fit.stderr)
            and fit.slope <= predicted + STRENGTH_SLACK + 2.0 * fit.stderr
        )
        rows.append(
            {
                "s": float(s),
                "slope": fit.slope,
                "stderr": fit.stderr,
                "predicted": predicted,
                "compatible": bool(compatible),
                "wce": [float(v) for v in wces],
            }
        )
        if compatible:
            s_star = float(s)
    return {
        "rows": rows,
        "s_star_hat": s_star,
        "sizes": seq.sizes,
        "config": {
            "degree_scale": degree_scale,
            "min_degree": min_degree,
            "slack": STRENGTH_SLACK,
        },
    }


def weyl_sweep(
    seq: PointSetSequence,
    alphas: Sequence[float] = (0.5, 1.0, 1.5),
    c: float = 1.0,
) -> list[dict]:
    """Diagnostic sweep of normalised Weyl sums over growing degree windows.

    For each alpha, degrees up to ``c N^(alpha/d) / log N`` are scanned and
    the maximum of ``W_n / N^2`` recorded per member.  Purely descriptive:
    no verdict is attached.
    """
    d = seq.d
    out = []
    for alpha in alphas:
        for member in seq:
            n_pts = member.n
            n_max = int(max(1, math.floor(c * n_pts ** (alpha / d) / max(1.0, math.log(n_pts)))))
            table = variance.weyl_sum_table(member, n_max)
            out.append(
                {
                    "alpha": float(alpha),
                    "N": n_pts,
                    "n_max": n_max,
                    "max_normalized_weyl": float(np.max(table[:n_max]) / n_pts**2),
                }
            )
    return out
