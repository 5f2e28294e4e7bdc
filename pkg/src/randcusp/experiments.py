"""Experiment drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import Region
from .kernel import dim_cusp_space, variance_profile
from .sampler import (
    DEFAULT_DENSITY,
    CovarianceFactor,
    Grid,
    factor_for_grid,
    global_region,
    make_grid,
    map_draws,
)
from .stats import (
    EnsembleStats,
    analytic_lp_expectation,
    bootstrap_se,
    concentration_fit,
    ensemble_stats,
    growth_fit,
    lp_norms,
    moment_factor,
)

COMPACT_REGION = Region.rectangle((-0.25, 0.25), (1.3, 2.0))
K_SWEEP = (60, 120, 240, 480, 960)


def region_for(name: str, k: int) -> Region:
    if name == "compact":
        return COMPACT_REGION
    if name == "global":
        return global_region(k)
    raise ValueError("region must be 'compact' or 'global'")


def lipschitz_bias_cap(k: int, density: float) -> float:
    """k^(7/4) times the spacing over the height, i.e. density * k^(5/4), constant 1."""
    return density * k ** 1.25


@dataclass
class SupResult:
    k: int
    N: int
    region: str
    model: str
    n_samples: int
    grid: dict
    stats: EnsembleStats
    argmax_y: np.ndarray
    zeta_mean: float
    rank: int
    dropped_mass: float
    bias_cap: float
    extras: dict = field(default_factory=dict)


def prepared_factor(k: int, region: Region, density: float = DEFAULT_DENSITY,
                    cache: dict | None = None) -> tuple[Grid, CovarianceFactor]:
    key = (k, region, density)
    if cache is not None and key in cache:
        return cache[key]
    g = make_grid(region, k, density)
    F = factor_for_grid(g)
    if cache is not None:
        cache[key] = (g, F)
    return g, F


def run_sup(k: int, region: str = "compact", model: str = "spherical", n_samples: int = 2000,
            seed: int = 0, density: float = DEFAULT_DENSITY, cache: dict | None = None,
            workers: int | None = None) -> SupResult:
    """Grid sup of |h_k| over n_samples draws; stream = k keeps weights independent."""
    reg = region_for(region, k)
    g, F = prepared_factor(k, reg, density, cache)

    def reducer(V, zeta):
        a = np.abs(V)
        j = a.argmax(axis=1)
        return a[np.arange(len(j)), j], g.points[j].imag, zeta

    parts = map_draws(F, model, n_samples, seed, k, reducer, workers=workers)
    sup = np.concatenate([p[0] for p in parts])
    ay = np.concatenate([p[1] for p in parts])
    zeta = np.concatenate([p[2] for p in parts])
    return SupResult(k, dim_cusp_space(k), region, model, n_samples, g.descriptor(),
                     ensemble_stats(sup, seed=seed), ay, float(zeta.mean()), F.rank,
                     F.dropped_mass, lipschitz_bias_cap(k, density))


def argmax_mode(ys: np.ndarray, k: int, bins: int = 24) -> float:
    """Centre of the most populated bin of argmax heights (log-spaced bins)."""
    lo, hi = math.sqrt(3) / 2, 1.2 * k / (2 * math.pi)
    edges = np.geomspace(lo, hi, bins + 1)
    counts, _ = np.histogram(ys, edges)
    j = int(np.argmax(counts))
    return float(math.sqrt(edges[j] * edges[j + 1]))


@dataclass
class LpRow:
    p: float
    analytic: float
    analytic_paper: float
    mean_norm: float
    mean_norm_se: float
    moment_root: float
    moment_root_se: float

    @property
    def z_mean(self) -> float:
        return (self.mean_norm - self.analytic) / self.mean_norm_se

    @property
    def z_moment(self) -> float:
        return (self.moment_root - self.analytic) / self.moment_root_se


def run_lp(k: int, p_list, region: Region = COMPACT_REGION, n_samples: int = 5000,
           seed: int = 0, n_boot: int = 500, cache: dict | None = None,
           workers: int | None = None) -> tuple[list[LpRow], dict]:
    """Empirical L^p norms of spherical draws against the closed form."""
    p_list = [float(p) for p in p_list]
    if not all(math.isfinite(p) and p >= 1 for p in p_list):
        raise ValueError("each p must be finite and at least 1")
    g, F = prepared_factor(k, region, DEFAULT_DENSITY, cache)
    parts = map_draws(F, "spherical", n_samples, seed, 10_000 + k,
                      lambda V, z: np.stack([lp_norms(V, g.weights, p) for p in p_list], 1),
                      workers=workers)
    norms = np.concatenate(parts)
    rows = []
    N = dim_cusp_space(k)
    for j, p in enumerate(p_list):
        n = norms[:, j]
        a = analytic_lp_expectation(k, p, region)
        ap = a * (moment_factor(N, p, "paper") / moment_factor(N, p)) ** (1 / p)
        if n_samples >= 2:
            se = bootstrap_se(np.mean, n, n_boot, seed)
            se_m = bootstrap_se(lambda s: np.mean(s ** p) ** (1 / p), n, n_boot, seed)
        else:
            se = se_m = float("nan")
        rows.append(LpRow(p, a, ap, float(n.mean()), se, float(np.mean(n ** p) ** (1 / p)), se_m))
    return rows, {"grid": g.descriptor(), "rank": F.rank, "dropped_mass": F.dropped_mass}


@dataclass
class ConcentrationReport:
    k: int
    region: str
    c_hat: float
    linearity_r2: float
    c_lower: float
    c_hat_corrected: float
    median_mean_gap: float
    n_samples: int


def concentration_from(res: SupResult) -> ConcentrationReport:
    scale = math.sqrt(res.k) if res.region == "global" else 1.0
    fit = concentration_fit(res.stats, scale)
    return ConcentrationReport(res.k, res.region, fit.c_hat, fit.linearity_r2, fit.c_lower,
                               fit.c_hat_corrected, res.stats.median - res.stats.mean,
                               res.n_samples)


def run_concentration(k: int, region: str = "compact", n_samples: int = 5000, seed: int = 0,
                      cache: dict | None = None) -> ConcentrationReport:
    if n_samples < 50:
        raise ValueError("too few samples for a tail fit")
    return concentration_from(run_sup(k, region, "spherical", n_samples, seed, cache=cache))


def profile_rows(k: int, y_min: float, y_max: float, steps: int, x: float = 0.0):
    ys = np.geomspace(y_min, y_max, steps)
    return variance_profile(k, ys, x)


def growth_summary(results: list[SupResult]) -> dict:
    pairs = [(r.k, r.stats.mean) for r in results]
    return {law: growth_fit(pairs, law) for law in
            ("sqrt-log", "quarter-power", "quarter-power-times-sqrt-log")}
