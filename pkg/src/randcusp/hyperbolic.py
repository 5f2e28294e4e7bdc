"""Upper half-plane geometry and the SL2(Z) action.

Points are handled either as :class:`UpperHalfPoint` values (public API) or as
numpy complex arrays (internal, vectorized paths).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MEMBERSHIP_SLACK = 1e-12

# #{g : u(w, g z) <= t} <= COUNT_CONSTANT * Yeff * (1 + t), Yeff from effective_height.
# The count grows like 24 t in the bulk (area 4 pi t of the ball over area pi/3 of the
# domain, both signs); the calibration sweep in tests/test_hyperbolic.py peaks at 24.3.
COUNT_CONSTANT = 32.0

DEFAULT_ENUM_BUDGET = 5_000_000


class EnumerationBudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class UpperHalfPoint:
    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("point components must be finite")
        if self.y <= 0:
            raise ValueError("point must lie in the upper half-plane (y > 0)")

    @classmethod
    def from_complex(cls, z) -> "UpperHalfPoint":
        z = complex(z)
        return cls(z.real, z.imag)

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)

    def __complex__(self):
        return self.z


def as_complex(z) -> complex:
    if isinstance(z, UpperHalfPoint):
        return z.z
    if isinstance(z, (tuple, list)) and len(z) == 2:
        return complex(z[0], z[1])
    return complex(z)


@dataclass(frozen=True)
class GroupElement:
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        for v in (self.a, self.b, self.c, self.d):
            if not isinstance(v, (int, np.integer)):
                raise TypeError("matrix entries must be integers")
        if int(self.a) * int(self.d) - int(self.b) * int(self.c) != 1:
            raise ValueError("determinant must be 1")

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        a, b, c, d = self.a, self.b, self.c, self.d
        e, f, g, h = other.a, other.b, other.c, other.d
        return GroupElement(a * e + b * g, a * f + b * h, c * e + d * g, c * f + d * h)

    def __neg__(self) -> "GroupElement":
        return GroupElement(-self.a, -self.b, -self.c, -self.d)

    def inverse(self) -> "GroupElement":
        return GroupElement(self.d, -self.b, -self.c, self.a)

    def entries(self) -> tuple[int, int, int, int]:
        return (int(self.a), int(self.b), int(self.c), int(self.d))

    def __call__(self, z):
        return moebius_apply(self, z)


IDENTITY = GroupElement(1, 0, 0, 1)
S = GroupElement(0, -1, 1, 0)
T = GroupElement(1, 1, 0, 1)

ELLIPTIC_POINTS = (complex(0.5, math.sqrt(3) / 2), 1j, complex(-0.5, math.sqrt(3) / 2))

REGION_KINDS = ("compact-rectangle", "fundamental-domain-truncated", "bulk-F-delta")


@dataclass(frozen=True)
class Region:
    """Sampling region.

    compact-rectangle: x_range by y_range.
    fundamental-domain-truncated: the standard domain with y <= y_cap.
    bulk-F-delta: the standard domain minus hyperbolic delta-discs around the
    elliptic points, cut at y <= y_cap.
    """

    kind: str
    x_range: tuple[float, float] = (-0.5, 0.5)
    y_range: tuple[float, float] | None = None
    delta: float = 0.0
    y_cap: float | None = None

    def __post_init__(self):
        if self.kind not in REGION_KINDS:
            raise ValueError(f"unknown region kind {self.kind!r}")
        if self.kind == "compact-rectangle":
            if self.y_range is None:
                raise ValueError("compact-rectangle needs y_range")
            (x0, x1), (y0, y1) = self.x_range, self.y_range
            if not (x1 > x0 and y1 > y0 > 0):
                raise ValueError("region must have positive area")
        else:
            if self.y_cap is None or self.y_cap <= 1.0:
                raise ValueError("y_cap must exceed 1")
        if self.kind == "bulk-F-delta" and not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")

    @classmethod
    def rectangle(cls, x_range, y_range) -> "Region":
        return cls("compact-rectangle", tuple(map(float, x_range)), tuple(map(float, y_range)))

    @classmethod
    def fundamental(cls, y_cap: float) -> "Region":
        return cls("fundamental-domain-truncated", y_cap=float(y_cap))

    @classmethod
    def bulk(cls, delta: float, y_cap: float) -> "Region":
        return cls("bulk-F-delta", delta=float(delta), y_cap=float(y_cap))

    @property
    def y_bounds(self) -> tuple[float, float]:
        if self.kind == "compact-rectangle":
            return self.y_range
        return (math.sqrt(3) / 2, self.y_cap)

    @property
    def x_bounds(self) -> tuple[float, float]:
        return self.x_range if self.kind == "compact-rectangle" else (-0.5, 0.5)

    def contains(self, z, slack: float = MEMBERSHIP_SLACK) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        x, y = z.real, z.imag
        if self.kind == "compact-rectangle":
            (x0, x1), (y0, y1) = self.x_range, self.y_range
            return (x >= x0 - slack) & (x <= x1 + slack) & (y >= y0 - slack) & (y <= y1 + slack)
        ok = in_fundamental_domain(z, slack) & (y <= self.y_cap + slack)
        if self.kind == "bulk-F-delta":
            for e in ELLIPTIC_POINTS:
                ok &= np.arccosh(1 + 2 * _u(z, np.complex128(e))) >= self.delta - slack
        return ok

    def describe(self) -> str:
        if self.kind == "compact-rectangle":
            return f"rect[{self.x_range[0]},{self.x_range[1]}]x[{self.y_range[0]},{self.y_range[1]}]"
        if self.kind == "bulk-F-delta":
            return f"F_delta[{self.delta}],ycap={self.y_cap}"
        return f"D,ycap={self.y_cap}"


def in_fundamental_domain(z, slack: float = MEMBERSHIP_SLACK):
    z = np.asarray(z, dtype=complex)
    return (np.abs(z.real) <= 0.5 + slack) & (np.abs(z) >= 1 - slack) & (z.imag > 0)


def _u(z, w):
    """Point-pair invariant on complex arrays."""
    return np.abs(z - w) ** 2 / (4.0 * z.imag * w.imag)


def point_pair_invariant(z, w) -> float:
    z, w = as_complex(z), as_complex(w)
    if z.imag <= 0 or w.imag <= 0:
        raise ValueError("points must lie in the upper half-plane")
    return float(_u(np.complex128(z), np.complex128(w)))


def hyperbolic_distance(z, w) -> float:
    z, w = as_complex(z), as_complex(w)
    return 2.0 * math.asinh(abs(z - w) / (2.0 * math.sqrt(z.imag * w.imag)))


def moebius_apply(g: GroupElement, z):
    zc = as_complex(z)
    out = (g.a * zc + g.b) / (g.c * zc + g.d)
    if isinstance(z, UpperHalfPoint):
        return UpperHalfPoint.from_complex(out)
    return out


def _apply_entries(a, b, c, d, z):
    return (a * z + b) / (c * z + d)


def reduce_to_fundamental(z, max_iter: int = 10_000):
    """Return (z', g) with z' = g z in the closed standard domain."""
    zc = as_complex(z)
    if zc.imag <= 0:
        raise ValueError("point must lie in the upper half-plane")
    a, b, c, d = 1, 0, 0, 1
    for _ in range(max_iter):
        n = math.floor(zc.real + 0.5)
        if n:
            zc = zc - n
            a, b = a - n * c, b - n * d
        if abs(zc) < 1 - MEMBERSHIP_SLACK:
            zc = -1 / zc
            a, b, c, d = -c, -d, a, b
        elif abs(zc.real) <= 0.5 + MEMBERSHIP_SLACK:
            break
    else:
        raise RuntimeError("reduction did not terminate")
    g = GroupElement(a, b, c, d)
    out = UpperHalfPoint.from_complex(zc) if isinstance(z, UpperHalfPoint) else zc
    return out, g


def reduce_array(z, max_iter: int = 1000) -> np.ndarray:
    """Vectorized reduction of points (group elements are not tracked)."""
    z = np.array(z, dtype=complex, copy=True).ravel()
    for _ in range(max_iter):
        z = z - np.floor(z.real + 0.5)
        inside = np.abs(z) < 1 - MEMBERSHIP_SLACK
        if not inside.any():
            return z
        z[inside] = -1 / z[inside]
    raise RuntimeError("reduction did not terminate")


def effective_height(z, w) -> np.ndarray:
    """max(Im of reduced z, Im of reduced w, 1); this controls lattice counts."""
    yz = reduce_array(z).imag
    yw = reduce_array(w).imag
    return np.maximum(np.maximum(yz, yw), 1.0)


@lru_cache(maxsize=None)
def _completion(c: int, d: int) -> tuple[int, int]:
    """Some (a, b) with a d - b c = 1."""
    if c == 0:
        return (d, 0)
    # extended Euclid on (d, c): d*s + c*t = 1
    r0, r1, s0, s1, t0, t1 = d, c, 1, 0, 0, 1
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    if r0 == -1:
        s0, t0 = -s0, -t0
    # d*s0 + c*t0 = 1 so (a, b) = (s0, -t0)
    return (s0, -t0)


def _expand(ids, lo, cnt):
    """Rows (ids[j], lo[j] + r) for r < cnt[j]."""
    cnt = np.asarray(cnt, dtype=np.int64)
    tot = int(cnt.sum())
    rep = np.repeat(np.arange(len(ids)), cnt)
    starts = np.cumsum(cnt) - cnt
    return ids[rep], lo[rep] + (np.arange(tot) - starts[rep])


def _completion_arrays(c: int, d: np.ndarray):
    """Vectorized (a, b) with a d - b c = 1, assuming gcd(c, d) = 1."""
    d = np.asarray(d, dtype=np.int64)
    r0, r1 = d.copy(), np.full_like(d, c)
    s0, s1 = np.ones_like(d), np.zeros_like(d)
    t0, t1 = np.zeros_like(d), np.ones_like(d)
    while np.any(r1 != 0):
        act = r1 != 0
        q = np.where(act, r0 // np.where(act, r1, 1), 0)
        r0, r1 = np.where(act, r1, r0), np.where(act, r0 - q * r1, r1)
        s0, s1 = np.where(act, s1, s0), np.where(act, s0 - q * s1, s1)
        t0, t1 = np.where(act, t1, t0), np.where(act, t0 - q * t1, t1)
    flip = r0 < 0
    s0 = np.where(flip, -s0, s0)
    t0 = np.where(flip, -t0, t0)
    return s0, -t0


def _u_image(a, b, c, d, z, w):
    """u(w, g z) for integer arrays (a, b, c, d); shared by all enumerators."""
    return _u(w, _apply_entries(a, b, c, d, z))


@dataclass
class NearSet:
    """Flat arrays of matrices; ``pair`` indexes the (z, w) pair each row belongs to."""

    pair: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray

    def __len__(self):
        return len(self.a)

    def elements(self) -> list[GroupElement]:
        return [GroupElement(int(a), int(b), int(c), int(d))
                for a, b, c, d in zip(self.a, self.b, self.c, self.d)]


def enumerate_near_arrays(z, w, X, budget: int = DEFAULT_ENUM_BUDGET) -> NearSet:
    """All g in SL2(Z) with u(w, g z) <= X, for every pair (z[i], w[i]).

    Sweep c, then d with gcd(c, d) = 1, then the translation n of a
    completion (a0 + n c, b0 + n d); every candidate is then filtered with the
    exact predicate so the result matches the brute-force oracle.
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    w = np.atleast_1d(np.asarray(w, dtype=complex))
    z, w = np.broadcast_arrays(z, w)
    z, w = z.ravel(), w.ravel()
    X = np.broadcast_to(np.asarray(X, dtype=float), z.shape).ravel()
    if np.any(X < 0):
        raise ValueError("X must be non-negative")
    y, v = z.imag, w.imag
    if np.any(y <= 0) or np.any(v <= 0):
        raise ValueError("points must lie in the upper half-plane")
    s = 1.0 + 2.0 * X
    erho = s + np.sqrt(s * s - 1.0)
    cmax = np.floor(np.sqrt(erho / (y * v)) * (1 + 1e-9) + 1e-9).astype(np.int64)
    cg = int(cmax.max()) if cmax.size else 0
    # rough count estimate to fail fast
    est = float(np.sum(30.0 * X + 8.0 * effective_height(z, w) * np.sqrt(X) + 4.0))
    if est > 4 * budget:
        raise EnumerationBudgetExceeded("enumeration budget exceeded")
    out = [[], [], [], [], []]
    total = 0
    all_idx = np.arange(z.size)
    for c in range(-cg, cg + 1):
        sel = all_idx[cmax >= abs(c)]
        if sel.size == 0:
            continue
        if c == 0:
            pi = np.repeat(sel, 2)
            d = np.tile(np.array([-1, 1], dtype=np.int64), sel.size)
        else:
            ys, vs, es = y[sel], v[sel], erho[sel]
            D2 = ys * es / vs - (c * ys) ** 2
            rad = np.sqrt(np.maximum(D2, 0.0))
            ctr = -c * z[sel].real
            tol = 1e-9 * (1 + np.abs(ctr) + rad)
            dlo = np.ceil(ctr - rad - tol).astype(np.int64)
            dhi = np.floor(ctr + rad + tol).astype(np.int64)
            cnt = np.where(D2 >= -1e-9 * (1 + ys * es / vs), np.maximum(dhi - dlo + 1, 0), 0)
            pi, d = _expand(sel, dlo, cnt)
            cop = np.gcd(d, c) == 1
            pi, d = pi[cop], d[cop]
        if pi.size == 0:
            continue
        a0, b0 = _completion_arrays(c, d)
        zz, ww, XX = z[pi], w[pi], X[pi]
        g0 = _apply_entries(a0, b0, c, d, zz)
        yp, vv = g0.imag, ww.imag
        W2 = 4 * XX * vv * yp - (yp - vv) ** 2
        rad = np.sqrt(np.maximum(W2, 0.0))
        ctr = ww.real - g0.real
        tol = 1e-9 * (1 + np.abs(ctr) + rad)
        nlo = np.ceil(ctr - rad - tol).astype(np.int64)
        nhi = np.floor(ctr + rad + tol).astype(np.int64)
        cnt = np.where(W2 >= -1e-9 * (1 + 4 * XX * vv * yp), np.maximum(nhi - nlo + 1, 0), 0)
        ntot = int(cnt.sum())
        if ntot == 0:
            continue
        total += ntot
        if total > 2 * budget:
            raise EnumerationBudgetExceeded("enumeration budget exceeded")
        rows, n = _expand(np.arange(pi.size), nlo, cnt)
        p_ = pi[rows]
        a = a0[rows] + n * c
        b = b0[rows] + n * d[rows]
        cc = np.full(ntot, c, dtype=np.int64)
        dd = d[rows]
        keep = _u_image(a, b, cc, dd, z[p_], w[p_]) <= X[p_]
        for lst, arr in zip(out, (p_, a, b, cc, dd)):
            lst.append(arr[keep])
    if not out[0]:
        empty = np.zeros(0, dtype=np.int64)
        return NearSet(empty, empty, empty, empty, empty)
    res = [np.concatenate(lst).astype(np.int64) for lst in out]
    if len(res[0]) > budget:
        raise EnumerationBudgetExceeded("enumeration budget exceeded")
    # group rows by pair, keeping sweep order within each pair
    order = np.argsort(res[0], kind="stable")
    return NearSet(*(r[order] for r in res))


def enumerate_near(z, w, X: float, budget: int = DEFAULT_ENUM_BUDGET) -> list[GroupElement]:
    """Exactly the elements g (both signs) with u(w, g z) <= X."""
    if X < 0:
        raise ValueError("X must be non-negative")
    return enumerate_near_arrays(as_complex(z), as_complex(w), X, budget).elements()


def brute_force_near(z, w, X: float, entry_bound: int = 40) -> set[tuple[int, int, int, int]]:
    """Oracle: every det-1 matrix with entries bounded by entry_bound and u <= X."""
    zc, wc = np.complex128(as_complex(z)), np.complex128(as_complex(w))
    B = entry_bound
    found = set()
    for c in range(-B, B + 1):
        for d in range(-B, B + 1):
            if math.gcd(c, d) != 1:
                continue
            a0, b0 = _completion(c, d)
            # all n with |a0 + n c| <= B and |b0 + n d| <= B
            lo, hi = -10 * B - 10, 10 * B + 10
            if c:
                lo = max(lo, math.ceil((-B - a0) / c) if c > 0 else math.ceil((B - a0) / c))
                hi = min(hi, math.floor((B - a0) / c) if c > 0 else math.floor((-B - a0) / c))
            if d:
                lo = max(lo, math.ceil((-B - b0) / d) if d > 0 else math.ceil((B - b0) / d))
                hi = min(hi, math.floor((B - b0) / d) if d > 0 else math.floor((-B - b0) / d))
            if hi < lo:
                continue
            n = np.arange(lo, hi + 1)
            a, b = a0 + n * c, b0 + n * d
            ok = (np.abs(a) <= B) & (np.abs(b) <= B)
            a, b = a[ok], b[ok]
            keep = _u_image(a, b, c, d, zc, wc) <= X
            found.update((int(ai), int(bi), c, d) for ai, bi in zip(a[keep], b[keep]))
    return found


def count_near(z, w, X) -> np.ndarray:
    """Per-pair counts of {g : u(w, g z) <= X}."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    ns = enumerate_near_arrays(z, w, X)
    return np.bincount(ns.pair, minlength=z.size)


def count_bound_check(z, X: float) -> tuple[int, float]:
    """(count, count/(y X)) for the diagonal count at z."""
    if X < 1:
        raise ValueError("X must be at least 1")
    zc = as_complex(z)
    n = int(count_near(zc, zc, X)[0])
    return n, n / (zc.imag * X)
