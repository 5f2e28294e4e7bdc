"""Exact-law sampling of h_k = y^(k/2) g_k on finite grids.

Only the covariance kernel and N = dim S_k are used. With C = F F^* (F of rank r <= N),
the spherical field is sqrt(N) F w / sqrt(|w|^2 + T) with w ~ CN(0, I_r) and
T ~ Gamma(N - r, 1) independent: writing the coefficient vector b ~ CN(0, I_N) as a
grid-visible part w plus an orthogonal remainder, |b|^2 = |w|^2 + T.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import Region
from .kernel import (
    _check_k,
    bergman_R_pairs,
    covariance_scale,
    dim_cusp_space,
)

DEFAULT_DENSITY = 1.0 / 3.0
DEFAULT_GRID_CAP = 20_000
COVARIANCE_EPS = 1e-13  # absolute accuracy on R for matrix entries
EIG_TOL = 1e-10
GLOBAL_CAP_FACTOR = 1.2  # global grids stop at y = 1.2 k / (2 pi)
BLOCK = 256
PAIR_CHUNK = 20_000


class GridBudgetExceeded(RuntimeError):
    pass


class FactorError(RuntimeError):
    pass


@dataclass
class Grid:
    points: np.ndarray  # complex
    weights: np.ndarray  # hyperbolic cell areas
    region: Region
    k: int
    density: float
    row: np.ndarray
    col: np.ndarray
    spacing_policy: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.points)

    @property
    def area(self) -> float:
        return float(self.weights.sum())

    def descriptor(self) -> dict:
        return {"region": self.region.describe(), "k": self.k, "size": len(self),
                "area": self.area, **self.spacing_policy}


def global_region(k) -> Region:
    k = _check_k(k)
    return Region.fundamental(GLOBAL_CAP_FACTOR * k / (2 * math.pi))


def make_grid(region: Region, k, density: float = DEFAULT_DENSITY,
              cap: int = DEFAULT_GRID_CAP) -> Grid:
    """Cell-centred grid with spacing density * y / sqrt(k) at height y.

    Rows are geometric in y (ratio exp(density / sqrt(k))), so the spacing is the
    same in both directions; each row tiles its x-extent uniformly. A cell is kept
    when its centre lies in the region; its weight is the hyperbolic area
    dx (1/y_lo - 1/y_hi).
    """
    k = _check_k(k)
    if density <= 0:
        raise ValueError("density must be positive")
    step = density / math.sqrt(k)
    y0, y1 = region.y_bounds
    x0, x1 = region.x_bounds
    nrows = max(1, math.ceil(math.log(y1 / y0) / step))
    edges = y0 * np.exp(np.linspace(0.0, math.log(y1 / y0), nrows + 1))
    # rough size check before building
    est = sum(math.ceil((x1 - x0) / (step * math.sqrt(a * b))) for a, b in zip(edges[:-1], edges[1:]))
    if est > 2 * cap:
        raise GridBudgetExceeded("grid budget exceeded")
    pts, wts, rows, cols = [], [], [], []
    for j, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        yc = math.sqrt(lo * hi)
        nx = max(1, math.ceil((x1 - x0) / (step * yc)))
        dx = (x1 - x0) / nx
        xc = x0 + dx * (np.arange(nx) + 0.5)
        z = xc + 1j * yc
        keep = region.contains(z)
        pts.append(z[keep])
        wts.append(np.full(int(keep.sum()), dx * (1.0 / lo - 1.0 / hi)))
        rows.append(np.full(int(keep.sum()), j))
        cols.append(np.nonzero(keep)[0])
    points = np.concatenate(pts)
    if points.size > cap:
        raise GridBudgetExceeded("grid budget exceeded")
    if points.size == 0:
        raise ValueError("grid is empty")
    return Grid(points, np.concatenate(wts), region, k, density,
                np.concatenate(rows), np.concatenate(cols),
                {"density": density, "spacing": "density*y/sqrt(k)", "rows": nrows})


def points_grid(points, region: Region, k, weights=None) -> Grid:
    """Wrap explicit points (e.g. a probe set) as a Grid with unit weights."""
    points = np.asarray(points, dtype=complex).ravel()
    if not np.all(region.contains(points)):
        raise ValueError("all points must lie inside the region")
    if len(np.unique(points)) != len(points):
        raise ValueError("grid points must be distinct")
    w = np.ones(points.size) if weights is None else np.asarray(weights, dtype=float)
    idx = np.arange(points.size)
    return Grid(points, w, region, _check_k(k), float("nan"), idx, np.zeros_like(idx),
                {"spacing": "explicit"})


# -- covariance and factors ---------------------------------------------------

@dataclass
class CovarianceFactor:
    grid: Grid | None
    k: int
    factor: np.ndarray  # (M, rank)
    rank: int
    truncation_tol: float
    dropped_mass: float
    method: str = "eig"

    @property
    def N(self) -> int:
        return dim_cusp_space(self.k)

    def diagonal(self) -> np.ndarray:
        return np.sum(np.abs(self.factor) ** 2, axis=1)


def build_covariance(grid: Grid, k=None, eps: float = COVARIANCE_EPS) -> np.ndarray:
    """Hermitian matrix r_k(z_i, z_j): upper triangle computed, lower mirrored."""
    k = _check_k(grid.k if k is None else k)
    scale = covariance_scale(k)
    z = grid.points
    M = z.size
    iu, ju = np.triu_indices(M)
    C = np.zeros((M, M), dtype=complex)
    for s in range(0, iu.size, PAIR_CHUNK):
        i, j = iu[s:s + PAIR_CHUNK], ju[s:s + PAIR_CHUNK]
        vals, _, _, _ = bergman_R_pairs(z[i], z[j], k, eps)
        C[i, j] = scale * vals
    C[np.diag_indices(M)] = C[np.diag_indices(M)].real
    low = np.tril_indices(M, -1)
    C[low] = np.conj(C.T[low])
    return C


def hermitian_factor(C: np.ndarray, tol: float = EIG_TOL, N: int | None = None,
                     grid: Grid | None = None, k: int | None = None) -> CovarianceFactor:
    """Eigen-factor of C, dropping eigenvalues below tol * max."""
    C = np.asarray(C, dtype=complex)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(C, C.conj().T, rtol=0, atol=1e-14 * max(np.abs(C).max(), 1e-300)):
        raise ValueError("matrix must be Hermitian")
    lam, U = np.linalg.eigh(C)
    top = float(lam.max()) if lam.size else 0.0
    if top <= 0:
        raise FactorError("covariance not PSD within tolerance")
    if lam.min() < -tol * top:
        raise FactorError("covariance not PSD within tolerance")
    keep = lam > tol * top
    rank = int(keep.sum())
    if N is not None and rank > N:
        raise FactorError("covariance rank exceeds dim S_k: kernel inaccuracy")
    F = U[:, keep] * np.sqrt(lam[keep])
    return CovarianceFactor(grid, k or (grid.k if grid else 0), F[:, ::-1].copy(), rank, tol,
                            float(np.abs(lam[~keep]).sum()), "eig")


def pivoted_factor(grid: Grid, k=None, tol: float = EIG_TOL, eps: float = COVARIANCE_EPS,
                   max_rank: int | None = None) -> CovarianceFactor:
    """Greedy pivoted Cholesky from kernel columns, never forming the full matrix.

    Stops once the largest residual diagonal is below tol times the largest variance.
    """
    k = _check_k(grid.k if k is None else k)
    N = dim_cusp_space(k)
    scale = covariance_scale(k)
    z = grid.points
    M = z.size
    diag0, _, _, _ = bergman_R_pairs(z, z, k, eps)
    diag0 = scale * diag0.real
    res = diag0.copy()
    top = float(diag0.max())
    cap = N if max_rank is None else min(N, max_rank)
    cols = []
    while True:
        p = int(np.argmax(res))
        if res[p] <= tol * top:
            break
        if len(cols) >= cap:
            if max_rank is None:
                raise FactorError("covariance rank exceeds dim S_k: kernel inaccuracy")
            break
        vals, _, _, _ = bergman_R_pairs(z, np.full(M, z[p]), k, eps)
        col = scale * vals  # r(z_i, z_p)
        col[p] = diag0[p]
        for f in cols:
            col -= f * np.conj(f[p])
        f = col / math.sqrt(res[p])
        f[p] = math.sqrt(res[p])
        cols.append(f)
        res = np.maximum(res - np.abs(f) ** 2, 0.0)
        res[p] = 0.0
    F = np.stack(cols, axis=1) if cols else np.zeros((M, 0), complex)
    return CovarianceFactor(grid, k, F, F.shape[1], tol, float(res.sum()), "pivoted-cholesky")


def factor_for_grid(grid: Grid, tol: float = EIG_TOL, eps: float = COVARIANCE_EPS,
                    dense_limit: int = 400) -> CovarianceFactor:
    """Eigen path for small grids, pivoted Cholesky above dense_limit points."""
    if len(grid) <= dense_limit:
        C = build_covariance(grid, eps=eps)
        return hermitian_factor(C, tol, dim_cusp_space(grid.k), grid, grid.k)
    return pivoted_factor(grid, tol=tol, eps=eps)


# -- random draws ----------------------------------------------------------------

@dataclass(frozen=True)
class FieldSample:
    values: np.ndarray
    model: str
    seed: int
    stream: int
    index: int = 0
    zeta: float = float("nan")


def draw_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for one (seed, stream, draw index)."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def _complex_normal(rng, n):
    return (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / math.sqrt(2.0)


def _coefficients(F: CovarianceFactor, model: str, N: int, seed, stream, indices):
    """(w, scale) per draw: the field is scale * (F w)."""
    r = F.rank
    if model == "spherical" and r > N:
        raise FactorError("covariance rank exceeds dim S_k: kernel inaccuracy")
    W = np.empty((len(indices), r), dtype=complex)
    sc = np.ones(len(indices))
    zeta = np.empty(len(indices))
    for j, i in enumerate(indices):
        rng = draw_rng(seed, stream, i)
        w = _complex_normal(rng, r)
        T = rng.gamma(N - r) if N > r else 0.0
        W[j] = w
        tot = float(np.vdot(w, w).real) + T
        zeta[j] = math.sqrt(tot / N)
        if model == "spherical":
            sc[j] = 1.0 / zeta[j]
    return W, sc, zeta


def sample_gaussian(F: CovarianceFactor, seed: int = 0, stream: int = 0, index: int = 0) -> FieldSample:
    """G_k on the grid: F w with w standard complex normal (E|w_j|^2 = 1)."""
    W, sc, zeta = _coefficients(F, "gaussian", max(F.N, F.rank), seed, stream, [index])
    return FieldSample(F.factor @ W[0], "gaussian", seed, stream, index, float(zeta[0]))


def sample_spherical(F: CovarianceFactor, N: int | None = None, seed: int = 0, stream: int = 0,
                     index: int = 0) -> FieldSample:
    """h_k on the grid: sqrt(N) F w / sqrt(|w|^2 + T), T ~ Gamma(N - rank, 1)."""
    N = F.N if N is None else int(N)
    W, sc, zeta = _coefficients(F, "spherical", N, seed, stream, [index])
    return FieldSample(sc[0] * (F.factor @ W[0]), "spherical", seed, stream, index, float(zeta[0]))


def workers_from_env() -> int:
    try:
        return max(1, int(os.environ.get("RANDCUSP_WORKERS", "1")))
    except ValueError:
        return 1


def sample_block(F: CovarianceFactor, model: str, start: int, count: int, seed: int,
                 stream: int, N: int | None = None):
    """Draws start .. start+count-1 as an array (count, M) plus their zeta values."""
    N = F.N if N is None else int(N)
    if model not in ("gaussian", "spherical"):
        raise ValueError("model must be gaussian or spherical")
    idx = range(start, start + count)
    W, sc, zeta = _coefficients(F, model, max(N, F.rank) if model == "gaussian" else N,
                                seed, stream, idx)
    V = (W @ F.factor.T) * sc[:, None]
    return V, zeta


def map_draws(F: CovarianceFactor, model: str, n_draws: int, seed: int, stream: int,
              reducer, N: int | None = None, workers: int | None = None):
    """Apply reducer(values_block, zeta_block) over blocks of draws and concatenate.

    Block boundaries and per-draw seeds are fixed, so output is identical for any
    worker count.
    """
    workers = workers or workers_from_env()
    starts = list(range(0, n_draws, BLOCK))

    def job(s):
        V, zeta = sample_block(F, model, s, min(BLOCK, n_draws - s), seed, stream, N)
        return reducer(V, zeta)

    if workers == 1:
        parts = [job(s) for s in starts]
    else:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(job, starts))
    return parts
