"""Bergman kernel R_k(z, w) and the covariance kernel r_k(z, w).

R_k(z, w) = sum over g in SL2(Z) of l_g(z, w)^k with
l_g(z, w) = sqrt(y v) * 2i / ((g z - conj w) (c z + d)) and |l_g| = (1 + u(w, g z))^(-1/2).

Three evaluators are provided:

* ``bergman_R``: the direct group sum over {g : u(w, g z) <= X}, with X chosen from a
  certified lattice-count majorant.
* ``cusp_series_R``: the translation-coset (Gamma_infinity) part on the diagonal after
  Poisson summation, plus bounds for the m-window truncation and the remaining group.
* ``coset_series_R``: Poisson summation applied to every coset Gamma_infinity g, which is
  the complete kernel evaluated through an independent route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from scipy.special import gammaln

from .hyperbolic import (
    COUNT_CONSTANT,
    DEFAULT_ENUM_BUDGET,
    GroupElement,
    _completion_arrays,
    _expand,
    as_complex,
    effective_height,
    enumerate_near_arrays,
)

TAIL_SAFETY = 10.0
DEFAULT_EPS = 2e-9  # 1e-9 relative to the diagonal main term 2


def dim_cusp_space(k: int) -> int:
    """dim S_k, counted as monomials E4^a E6^b of weight k, minus one."""
    k = _check_k(k, 4)
    return sum(1 for b in range(k // 6 + 1) if (k - 6 * b) % 4 == 0) - 1


def _check_k(k, kmin=4) -> int:
    if isinstance(k, Weight):
        return k.k
    if isinstance(k, bool) or int(k) != k:
        raise ValueError("invalid weight")
    k = int(k)
    if k % 2 or k < kmin:
        raise ValueError("invalid weight")
    return k


@dataclass(frozen=True)
class Weight:
    k: int

    def __post_init__(self):
        _check_k(self.k)

    @property
    def N(self) -> int:
        return dim_cusp_space(self.k)

    @property
    def kappa(self) -> int:
        return self.k - 1


@dataclass(frozen=True)
class KernelValue:
    value: complex
    tail_bound: float
    terms_used: int
    method: str = "direct"
    cutoff: float = float("nan")


@dataclass(frozen=True)
class CuspSeriesConfig:
    delta_window: float = 1.0 / 3.0
    log_space: bool = True

    def __post_init__(self):
        if not (0 < self.delta_window < 1):
            raise ValueError("delta_window must lie in (0, 1)")


def ell_log(g: GroupElement, z, w) -> complex:
    """Principal log of l_g(z, w)."""
    zc, wc = as_complex(z), as_complex(w)
    gz = (g.a * zc + g.b) / (g.c * zc + g.d)
    ell = math.sqrt(zc.imag * wc.imag) * 2j / ((gz - wc.conjugate()) * (g.c * zc + g.d))
    return complex(np.log(ell))


def _ell(a, b, c, d, z, w):
    cz = c * z + d
    gz = (a * z + b) / cz
    return np.sqrt(z.imag * w.imag) * 2j / ((gz - np.conj(w)) * cz)


# -- direct group sum -------------------------------------------------------------

def _tail_constant(k: int, yeff):
    s = k / 2.0
    return TAIL_SAFETY * COUNT_CONSTANT * yeff * s / (s - 1.0)


def direct_tail_bound(k: int, X, yeff):
    """Certified bound on sum over u(w, g z) > X of (1 + u)^(-k/2)."""
    return _tail_constant(k, yeff) * (1.0 + np.asarray(X, dtype=float)) ** (1.0 - k / 2.0)


def direct_cutoff(k: int, eps, yeff):
    """Smallest X with direct_tail_bound(k, X, yeff) <= eps."""
    s = k / 2.0
    X = (_tail_constant(k, yeff) / np.asarray(eps, dtype=float)) ** (1.0 / (s - 1.0)) - 1.0
    return np.maximum(X, 0.0)


def bergman_R_pairs(z, w, k, eps=DEFAULT_EPS, X=None, budget=DEFAULT_ENUM_BUDGET):
    """Vectorized direct sum for pairs (z[i], w[i]).

    Returns (values, tail_bounds, terms_used, cutoffs). The summation order within a
    pair is the enumeration order, so results do not depend on how pairs are batched.
    """
    k = _check_k(k)
    z = np.atleast_1d(np.asarray(z, dtype=complex)).ravel()
    w = np.atleast_1d(np.asarray(w, dtype=complex)).ravel()
    z, w = np.broadcast_arrays(z, w)
    yeff = effective_height(z, w)
    if X is None:
        X = direct_cutoff(k, eps, yeff)
    X = np.broadcast_to(np.asarray(X, dtype=float), z.shape)
    ns = enumerate_near_arrays(z, w, X, budget)
    p = ns.pair
    ell = _ell(ns.a, ns.b, ns.c, ns.d, z[p], w[p])
    t = np.exp(k * np.log(ell))
    vals = np.bincount(p, weights=t.real, minlength=z.size) + 1j * np.bincount(
        p, weights=t.imag, minlength=z.size)
    counts = np.bincount(p, minlength=z.size)
    return vals, direct_tail_bound(k, X, yeff), counts, np.array(X)


def bergman_R(z, w, k, eps: float = DEFAULT_EPS, precision: int | None = None,
              X: float | None = None, budget: int = DEFAULT_ENUM_BUDGET) -> KernelValue:
    """Direct group sum; ``precision`` (decimal digits) switches to mpmath arithmetic."""
    k = _check_k(k)
    if eps <= 0:
        raise ValueError("eps must be positive")
    zc, wc = as_complex(z), as_complex(w)
    if precision is None:
        vals, tails, counts, Xs = bergman_R_pairs(zc, wc, k, eps, X, budget)
        return KernelValue(complex(vals[0]), float(tails[0]), int(counts[0]), "direct", float(Xs[0]))
    yeff = float(effective_height(zc, wc)[0])
    if X is None:
        X = float(direct_cutoff(k, eps, yeff))
    ns = enumerate_near_arrays(zc, wc, X, budget)
    with mpmath.workdps(precision):
        zm, wm = mpmath.mpc(zc.real, zc.imag), mpmath.mpc(wc.real, wc.imag)
        pre = mpmath.sqrt(zm.imag * wm.imag) * 2j
        wbar = mpmath.conj(wm)
        terms = []
        for a, b, c, d in zip(ns.a.tolist(), ns.b.tolist(), ns.c.tolist(), ns.d.tolist()):
            cz = c * zm + d
            terms.append((pre / (((a * zm + b) / cz - wbar) * cz)) ** k)
        total = mpmath.fsum(terms)
        value = complex(total)
    return KernelValue(value, float(direct_tail_bound(k, X, yeff)), len(ns), "direct-mp", X)


# -- Poisson summation ------------------------------------------------------------

def _lipschitz_m_tail(Y, kappa, delta):
    """Bound on sum over |m - kappa/Y| > delta*kappa/Y of m^kappa e^(-Y m).

    Explicit constants from the standard incomplete-gamma estimate.
    """
    lead = kappa * (math.log(kappa) - 1.0 - math.log(Y))
    b = math.exp(lead - delta ** 2 * kappa / 4.0) * (2.0 / (Y * delta) + 1.0)
    b += math.exp(lead - delta ** 2 * kappa / 2.0) * (1.0 / (delta * Y) + 1.0)
    if Y >= (1 + delta) * kappa:
        b += math.exp(-Y)
    return b


def _m_window_terms(Y, kappa, delta):
    m0 = kappa / Y
    lo = max(1, math.ceil((1 - delta) * m0))
    hi = math.floor((1 + delta) * m0)
    m = np.arange(lo, hi + 1, dtype=float)
    return m, kappa * np.log(m) - Y * m if m.size else m


def _direct_m_tail(Y, kappa, lo, hi):
    """Crude but rigorous bound on the terms left out of [lo, hi]."""
    f = lambda m: kappa * math.log(m) - Y * m
    out = 0.0
    if lo > 1:
        # increasing below the mode: at most (lo - 1) terms, each <= f(lo - 1)
        out += (lo - 1) * math.exp(f(lo - 1))
    m1 = max(hi + 1, 1)
    rho = math.exp(kappa / m1 - Y)
    if rho < 1:
        out += math.exp(f(m1)) / (1 - rho)
    else:
        out = float("inf")
    return out


def cusp_series_R(y: float, k, cfg: CuspSeriesConfig | None = None) -> KernelValue:
    """Gamma_infinity part of R_k(iy, iy) via Poisson summation, for y >= 2.

    2 (4 pi y)^k / Gamma(k) * sum_m m^(k-1) e^(-4 pi m y), summed over the window
    |m - kappa/Y| <= Delta kappa/Y in log space (ascending distance from the mode,
    exactly rounded accumulation). The tail bound adds the m-window bound and a
    certified bound on every element outside Gamma_infinity, each of which satisfies
    u >= (y - 1/y)^2 / 4.
    """
    k = _check_k(k)
    cfg = cfg or CuspSeriesConfig()
    y = float(y)
    if y < 2:
        raise ValueError("cusp series valid only for y >= 2")
    kappa = k - 1
    Y = 4 * math.pi * y
    delta = cfg.delta_window
    log_pref = math.log(2.0) + k * math.log(Y) - float(gammaln(k))
    m, lt = _m_window_terms(Y, kappa, delta)
    if m.size:
        order = np.argsort(np.abs(m - kappa / Y), kind="stable")
        top = lt.max()
        s = math.fsum(np.exp(lt[order] - top).tolist())
        value = math.exp(log_pref + top + math.log(s))
        lo, hi = int(m[0]), int(m[-1])
    else:
        value = 0.0
        lo = hi = max(1, math.ceil(kappa / Y))
        hi = lo - 1
    # both are valid bounds; report the sharper one
    m_tail = min(_lipschitz_m_tail(Y, kappa, delta), _direct_m_tail(Y, kappa, lo, hi))
    m_tail *= math.exp(log_pref)
    u0 = (y - 1.0 / y) ** 2 / 4.0
    g_tail = float(direct_tail_bound(k, u0, y))
    return KernelValue(complex(value), m_tail + g_tail, int(m.size), "cusp-series", u0)


def _log_lattice_tail(k, y, D, M):
    """log of a bound on sum over lattice points |c z + d| > M of |c z + d|^(-k)."""
    return (math.log(k * math.pi / y) + 2 * math.log1p(D / M) + (2 - k) * math.log(M)
            - math.log(k - 2))


def coset_series_R(z, w, k, eps: float = DEFAULT_EPS, max_cosets: int = 2_000_000) -> KernelValue:
    """R_k(z, w) by Poisson summation over each coset Gamma_infinity g.

    Coset (c, d) contributes 2 (4 pi sqrt(yv))^k / ((cz+d)^k Gamma(k)) sum_m m^(k-1)
    e^(2 pi i m tau) with tau = g z - conj w. Cosets with |cz+d| > M are dropped under a
    lattice-count bound; each m-series is cut where a geometric bound is below budget.
    """
    k = _check_k(k)
    if not eps > 0:
        raise ValueError("eps must be positive")
    zc, wc = as_complex(z), as_complex(w)
    y, v = zc.imag, wc.imag
    kappa = k - 1
    half = eps / 2.0
    # per-coset magnitude bound A |cz+d|^(-k); uses Im tau >= v
    mm = np.arange(1, int(4 * kappa / (2 * math.pi * v)) + 200, dtype=float)
    lS = kappa * np.log(mm) - 2 * math.pi * v * mm
    top = lS.max()
    logS = top + math.log(math.fsum(np.exp(lS - top).tolist()))
    logA = k * math.log(4 * math.pi * math.sqrt(y * v)) - float(gammaln(k)) + logS
    D = 1.0 + abs(zc)
    target = math.log(half) - math.log(2.0) - logA
    M = 1.0
    while _log_lattice_tail(k, y, D, M) > target:
        M *= 1.25
    coset_tail = 2.0 * math.exp(logA + _log_lattice_tail(k, y, D, M))
    # about (pi/2) M^2 / y lattice points with c >= 1 and |cz + d| <= M
    if M * M / y > max_cosets:
        raise RuntimeError("coset budget exceeded")
    # enumerate (c, d): c = 0, d = 1 and c >= 1 coprime with |cz + d| <= M
    cs, ds = [np.array([0])], [np.array([1])]
    for c in range(1, int(M / y) + 1):
        rad2 = M * M - (c * y) ** 2
        if rad2 < 0:
            continue
        r = math.sqrt(rad2)
        d = np.arange(math.ceil(-c * zc.real - r), math.floor(-c * zc.real + r) + 1)
        d = d[np.gcd(d, c) == 1]
        cs.append(np.full(d.size, c))
        ds.append(d)
    c = np.concatenate(cs).astype(np.int64)
    d = np.concatenate(ds).astype(np.int64)
    if c.size > max_cosets:
        raise RuntimeError("coset budget exceeded")
    ncos = c.size
    a0 = np.empty_like(c)
    b0 = np.empty_like(c)
    for cv in np.unique(c):
        sel = c == cv
        a0[sel], b0[sel] = _completion_arrays(int(cv), d[sel])
    cz = c * zc + d
    tau = (a0 * zc + b0) / cz - np.conj(wc)
    it = tau.imag
    log_pref = (k * math.log(4 * math.pi * math.sqrt(y * v)) - float(gammaln(k))
                - k * np.log(cz))
    # per-coset m cut: m_hi >= 2 * mode and geometric tail below the per-coset budget
    mode = kappa / (2 * math.pi * it)
    per = math.log(half / (2.0 * ncos))
    m_hi = np.maximum(np.ceil(2 * mode), 1).astype(np.int64)
    m_tail = 0.0
    for _ in range(200):
        m1 = (m_hi + 1).astype(float)
        lt = log_pref.real + kappa * np.log(m1) - 2 * math.pi * m1 * it
        rho = np.exp(kappa / m1 - 2 * math.pi * it)
        lb = lt - np.log1p(-rho)
        over = lb > per
        if not over.any():
            m_tail = float(np.sum(np.exp(lb)))
            break
        m_hi = np.where(over, m_hi + np.maximum(m_hi // 4, 1), m_hi)
    else:
        raise RuntimeError("m-series did not converge")
    rows, m = _expand(np.arange(ncos), np.ones(ncos, dtype=np.int64), m_hi)
    lt = log_pref[rows] + kappa * np.log(m.astype(float)) + 2j * math.pi * m * tau[rows]
    t = np.exp(lt)
    per_coset = np.bincount(rows, weights=t.real, minlength=ncos) + 1j * np.bincount(
        rows, weights=t.imag, minlength=ncos)
    value = 2.0 * complex(np.sum(per_coset))
    return KernelValue(value, coset_tail + 2.0 * m_tail, int(m.size), "coset-series", M)


# -- covariance ----------------------------------------------------------------------

def covariance_scale(k) -> float:
    k = _check_k(k)
    N = dim_cusp_space(k)
    if N == 0:
        raise ValueError("no cusp forms at this weight")
    return (k - 1) / (4 * math.pi * N) / 2.0


def kernel_best(z, w, k, eps: float = DEFAULT_EPS, rel: float = 1e-10) -> KernelValue:
    """Coset series on the diagonal for y >= 2, direct sum otherwise.

    On that diagonal the absolute target is tightened until the tail bound is below
    ``rel`` times the value, so tiny variances high in the cusp keep relative accuracy.
    """
    k = _check_k(k)
    zc, wc = as_complex(z), as_complex(w)
    if zc == wc and zc.imag >= 2:
        kv = coset_series_R(zc, wc, k, eps)
        for _ in range(6):
            scale = abs(kv.value)
            if scale == 0 or kv.tail_bound <= rel * scale:
                break
            try:
                kv = coset_series_R(zc, wc, k, min(rel * scale, kv.tail_bound / 1e3))
            except RuntimeError:
                break  # keep the last value; its tail bound is still honest
        return kv
    return bergman_R(zc, wc, k, eps)


def covariance_r(z, w, k, eps: float = DEFAULT_EPS) -> complex:
    """r_k(z, w) = (k-1)/(4 pi N) * R_k(z, w) / 2."""
    scale = covariance_scale(k)
    return scale * kernel_best(z, w, k, eps).value


def covariance_pairs(z, w, k, eps: float = DEFAULT_EPS):
    """Vectorized r_k over pairs by the direct sum (absolute accuracy eps on R)."""
    scale = covariance_scale(k)
    vals, tails, counts, _ = bergman_R_pairs(z, w, k, eps)
    return scale * vals, scale * tails


def predicted_R(z, w, k, near_i: bool = False) -> complex:
    """Main term 2 (2i sqrt(yv) / (z - conj w))^k, plus the elliptic term at i if asked."""
    k = _check_k(k)
    zc, wc = as_complex(z), as_complex(w)
    root = math.sqrt(zc.imag * wc.imag)
    out = 2 * (2j * root / (zc - wc.conjugate())) ** k
    if near_i:
        out += 2 * (2j * root / (zc * wc.conjugate() + 1)) ** k
    return complex(out)


def resonant(k, y: float, window: str = "upper") -> bool:
    """True if min_n |n - (k-1)/(4 pi y)| lies inside the window.

    upper: sqrt(k) log k / y (outside it the variance is negligible).
    lower: sqrt(k-1) / (12 pi y) (inside it the variance is of size y / sqrt(k)).
    The upper window exceeds 1/2, so tags everything, until k is far beyond desk scale.
    """
    k = _check_k(k)
    t = (k - 1) / (4 * math.pi * y)
    if window == "upper":  # n ranges over all integers
        return abs(t - round(t)) <= math.sqrt(k) * math.log(k) / y
    if window == "lower":  # n >= 1
        n = max(1, round(t))
        return abs(t - n) <= math.sqrt(k - 1) / (12 * math.pi * y)
    raise ValueError("window must be 'upper' or 'lower'")


@dataclass(frozen=True)
class ProfileRow:
    y: float
    r: float
    resonant: bool
    tail_bound: float
    strict_resonant: bool = False


def variance_profile(k, y_grid, x: float = 0.0, eps: float = DEFAULT_EPS) -> list[ProfileRow]:
    """Diagonal variance r_k(z, z) along Re z = x."""
    k = _check_k(k)
    scale = covariance_scale(k)
    y_grid = [float(y) for y in y_grid]
    if any(y <= 0 for y in y_grid):
        raise ValueError("y_grid must be positive")
    z = np.array([complex(x, y) for y in y_grid])
    vals, tails, _, _ = bergman_R_pairs(z, z, k, eps)
    return [ProfileRow(y, float(scale * v.real), resonant(k, y), float(scale * t),
                       resonant(k, y, "lower"))
            for y, v, t in zip(y_grid, vals, tails)]
