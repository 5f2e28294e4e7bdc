"""Norms of sampled fields, closed-form L^p predictions and ensemble statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .hyperbolic import Region
from .kernel import _check_k, bergman_R_pairs, covariance_scale, dim_cusp_space

CONVENTIONS = ("corrected", "paper")


@dataclass(frozen=True)
class NormReport:
    p: float
    value: float
    region: Region | None
    quadrature_error: float


def _coarse_blocks(grid):
    """Map each grid cell to a 2x2 block of the next coarser grid."""
    key = (grid.row // 2) * (int(grid.col.max()) + 2) + grid.col // 2
    _, inv = np.unique(key, return_inverse=True)
    first = np.full(inv.max() + 1, -1)
    for i in range(len(inv) - 1, -1, -1):
        first[inv[i]] = i
    return inv, first


def lp_norm(sample, grid, p: float) -> NormReport:
    """Hyperbolic L^p norm by the cell-weighted Riemann sum (p = inf gives max |h|).

    The quadrature error is the Richardson estimate |I_h - I_2h| / 3 against the sum
    on 2x2 merged cells, carried to the norm scale.
    """
    values = np.asarray(getattr(sample, "values", sample))
    if values.size == 0 or len(grid) == 0:
        raise ValueError("empty grid")
    if values.shape[-1] != len(grid):
        raise ValueError("sample length does not match grid")
    if p == math.inf:
        return NormReport(p, float(np.abs(values).max()), grid.region, 0.0)
    if p < 1:
        raise ValueError("p must be >= 1")
    a = np.abs(values) ** p
    I = float(np.dot(grid.weights, a))
    inv, first = _coarse_blocks(grid)
    wc = np.bincount(inv, weights=grid.weights)
    Ic = float(np.dot(wc, a[first]))
    errI = abs(I - Ic) / 3.0
    val = I ** (1.0 / p)
    err = val * errI / (p * I) if I > 0 else 0.0
    return NormReport(p, val, grid.region, err)


def lp_norms(values: np.ndarray, weights: np.ndarray, p: float) -> np.ndarray:
    """Row-wise L^p norms of a block of samples (shape (n, M))."""
    a = np.abs(values)
    if p == math.inf:
        return a.max(axis=1)
    return (a ** p @ weights) ** (1.0 / p)


def moment_factor(N: int, p: float, convention: str = "corrected") -> float:
    """E|a_1|^p N^(p/2) for a uniform point on the complex unit sphere in C^N.

    corrected: Gamma(p/2+1) Gamma(N) / Gamma(p/2+N) (tail (1-t^2)^(N-1)).
    paper: Gamma(p/2+1) Gamma((2N-1)/2) / Gamma((p+2N-1)/2) (tail exponent 2N-3).
    """
    if convention == "corrected":
        lg = gammaln(p / 2 + 1) + gammaln(N) - gammaln(p / 2 + N)
    elif convention == "paper":
        lg = gammaln(p / 2 + 1) + gammaln((2 * N - 1) / 2) - gammaln((p + 2 * N - 1) / 2)
    else:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    return math.exp(lg + (p / 2) * math.log(N))


def _gl(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return a + (b - a) * (x + 1) / 2, w * (b - a) / 2


def _quad_nodes(region: Region, n: int):
    """Tensor Gauss-Legendre nodes and weights for dx dy / y^2 over the region."""
    if region.kind == "compact-rectangle":
        (x0, x1), (y0, y1) = region.x_range, region.y_range
        xs, wx = _gl(n, x0, x1)
        # log y substitution: dy / y^2 = e^(-s) ds
        s, ws = _gl(n, math.log(y0), math.log(y1))
        Z = xs[None, :] + 1j * np.exp(s)[:, None]
        W = (wx[None, :] * (ws * np.exp(-s))[:, None])
        return Z.ravel(), W.ravel()
    if region.kind == "fundamental-domain-truncated":
        xs, wx = _gl(n, -0.5, 0.5)
        zs, ws = [], []
        for x, w in zip(xs, wx):
            lo = math.sqrt(1 - x * x)
            s, wsl = _gl(n, math.log(lo), math.log(region.y_cap))
            zs.append(x + 1j * np.exp(s))
            ws.append(w * wsl * np.exp(-s))
        return np.concatenate(zs), np.concatenate(ws)
    raise ValueError("quadrature available for rectangles and the truncated domain")


def integrate_rdiag_power(k, q: float, region: Region, rtol: float = 1e-10,
                          n0: int = 16, n_max: int = 512, eps: float = 1e-13):
    """Integral of r_diag^q over the region, doubling nodes until the change < rtol.

    Returns (value, error_estimate, nodes_per_axis).
    """
    k = _check_k(k)
    scale = covariance_scale(k)
    prev = None
    n = n0
    while True:
        Z, W = _quad_nodes(region, n)
        R, _, _, _ = bergman_R_pairs(Z, Z, k, eps)
        I = float(np.dot(W, np.maximum(scale * R.real, 0.0) ** q))
        if prev is not None and abs(I - prev) <= rtol * abs(I):
            return I, abs(I - prev), n
        if 2 * n > n_max:
            if prev is None:
                return I, float("inf"), n
            return I, abs(I - prev), n
        prev = I
        n *= 2


def analytic_lp_expectation(k, p: float, region: Region, convention: str = "corrected",
                            rtol: float = 1e-10) -> float:
    """||sqrt(r_diag)||_p * (moment factor)^(1/p).

    Under the corrected convention this equals (E ||h||_p^p)^(1/p) exactly.
    """
    k = _check_k(k)
    if p < 1:
        raise ValueError("p must be >= 1")
    N = dim_cusp_space(k)
    if N < 1:
        raise ValueError("no cusp forms at this weight")
    if region.kind != "compact-rectangle" and region.y_cap is None:
        raise ValueError("divergent quadrature: region needs a y-cap")
    I, _, _ = integrate_rdiag_power(k, p / 2.0, region, rtol)
    return (I * moment_factor(N, p, convention)) ** (1.0 / p)


def sphere_tail_law(N: int, t: float, convention: str = "corrected") -> float:
    if convention == "corrected":
        return (1 - t * t) ** (N - 1)
    if convention == "paper":
        return (1 - t * t) ** ((2 * N - 3) / 2)
    raise ValueError(f"convention must be one of {CONVENTIONS}")


def sphere_tail_estimate(N: int, t: float, n_draws: int, seed: int = 0,
                         chunk: int = 200_000) -> tuple[float, float]:
    """Monte Carlo P(|a_1| > t) for a uniform point of the unit sphere in C^N, with SE."""
    if N < 2 or not (0 < t < 1):
        raise ValueError("need N >= 2 and 0 < t < 1")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(N,)))
    hits = 0
    done = 0
    while done < n_draws:
        m = min(chunk, n_draws - done)
        g = rng.standard_normal((m, 2 * N))
        a1 = g[:, 0] ** 2 + g[:, 1] ** 2
        hits += int(np.count_nonzero(a1 > t * t * (g * g).sum(axis=1)))
        done += m
    p = hits / n_draws
    return p, math.sqrt(max(p * (1 - p), 1e-300) / n_draws)


def sphere_tail_oracle(N: int, t: float, n_draws: int, seed: int = 0) -> float:
    return sphere_tail_estimate(N, t, n_draws, seed)[0]


# -- ensemble statistics ---------------------------------------------------------

@dataclass(frozen=True)
class EnsembleStats:
    n_samples: int
    mean: float
    median: float
    quantiles: dict
    tail_pairs: list
    stderr: float
    median_stderr: float = float("nan")
    minimum: float = float("nan")
    maximum: float = float("nan")
    values: np.ndarray | None = field(default=None, repr=False, compare=False)


def default_r_grid(values: np.ndarray, center: float, n: int = 12):
    dev = np.abs(values - center)
    lo, hi = np.quantile(dev, [0.60, 0.995])
    if not (hi > lo > 0):
        return np.zeros(0)
    return np.geomspace(lo, hi, n)


def ensemble_stats(values, r_grid=None, n_boot: int = 1000, seed: int = 0) -> EnsembleStats:
    """Mean, median, quantiles, tail pairs P(|M - median| > r) and bootstrap SEs."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size < 2:
        raise ValueError("need at least 2 values")
    med = float(np.median(v))
    r = default_r_grid(v, med) if r_grid is None else np.asarray(r_grid, dtype=float)
    dev = np.abs(v - med)
    tails = [(float(ri), float(np.mean(dev > ri))) for ri in r]
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xB007,)))
    means = np.empty(n_boot)
    meds = np.empty(n_boot)
    for b in range(n_boot):
        s = v[rng.integers(0, v.size, v.size)]
        means[b] = s.mean()
        meds[b] = np.median(s)
    qs = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    return EnsembleStats(
        v.size, float(v.mean()), med,
        {q: float(np.quantile(v, q)) for q in qs}, tails,
        float(means.std(ddof=1)), float(meds.std(ddof=1)), float(v.min()), float(v.max()), v)


def bootstrap_se(stat, values, n_boot: int = 1000, seed: int = 0) -> float:
    v = np.asarray(values)
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xB008,)))
    out = np.array([stat(v[rng.integers(0, len(v), len(v))]) for _ in range(n_boot)])
    return float(out.std(ddof=1))


@dataclass(frozen=True)
class ConcentrationFit:
    c_hat: float
    linearity_r2: float
    c_lower: float
    intercept: float
    c_hat_corrected: float
    n_points: int

    def __iter__(self):
        return iter((self.c_hat, self.linearity_r2))


def concentration_fit(stats: EnsembleStats, scale: float = 1.0) -> ConcentrationFit:
    """Least-squares fit of -log(tail/2) against r^2 / scale.

    c_hat is the plain slope (with intercept) and linearity_r2 its coefficient of
    determination. c_lower = min over the grid of -log(tail/2) / (r^2 / scale), the
    largest c with -log(tail/2) >= c r^2 / scale at every grid point.
    c_hat_corrected adds a log r term to absorb the polynomial prefactor of a
    Gaussian-type tail.
    """
    pairs = [(r, t) for r, t in stats.tail_pairs if t > 0 and r > 0]
    if len(pairs) < 4:
        raise ValueError("insufficient tail data")
    r = np.array([p[0] for p in pairs])
    t = np.array([p[1] for p in pairs])
    x = r ** 2 / scale
    y = -np.log(t / 2)
    if np.ptp(x) <= 0:
        raise ValueError("insufficient tail data")
    A = np.vstack([x, np.ones_like(x)]).T
    (c, a), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - A @ np.array([c, a])) ** 2)) / ss if ss > 0 else 0.0
    B = np.vstack([x, np.log(r), np.ones_like(x)]).T
    cc = float(np.linalg.lstsq(B, y, rcond=None)[0][0])
    return ConcentrationFit(float(c), r2, float(np.min(y / x)), float(a), cc, len(pairs))


LAWS = {
    "sqrt-log": lambda k: math.sqrt(math.log(k)),
    "quarter-power": lambda k: k ** 0.25,
    "quarter-power-times-sqrt-log": lambda k: k ** 0.25 * math.sqrt(math.log(k)),
}


@dataclass(frozen=True)
class GrowthFit:
    ratios: list
    min_ratio: float
    max_ratio: float
    monotone_increasing: bool
    monotone_decreasing: bool

    def __iter__(self):
        return iter((self.ratios, self.min_ratio, self.max_ratio))

    @property
    def spread(self) -> float:
        return self.max_ratio / self.min_ratio


def growth_fit(pairs, law: str) -> GrowthFit:
    """value / law(k) per weight."""
    if law not in LAWS:
        raise ValueError(f"law must be one of {sorted(LAWS)}")
    pairs = sorted((int(k), float(v)) for k, v in pairs)
    if len(pairs) < 3:
        raise ValueError("need at least 3 weights")
    ratios = [v / LAWS[law](k) for k, v in pairs]
    d = np.diff(ratios)
    return GrowthFit(ratios, min(ratios), max(ratios), bool(np.all(d > 0)), bool(np.all(d < 0)))
