"""The discriminant form Delta: the single normalized cusp form of weight 12.

Used as an independent oracle for the covariance kernel at k = 12, where
r_12(z, z) = y^12 |Delta(z)|^2 / <Delta, Delta>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import gammaincc, gammaln

from .hyperbolic import as_complex, reduce_array

Y_MIN = 0.5


@dataclass(frozen=True)
class QExpansion:
    coefficients: tuple[int, ...]  # tau(1), ..., tau(n_max)
    n_max: int

    def __post_init__(self):
        if len(self.coefficients) != self.n_max or self.coefficients[0] != 1:
            raise ValueError("malformed q-expansion")

    def tau(self, n: int) -> int:
        return self.coefficients[n - 1]


def _mul_trunc(a: list[int], b: list[int], n: int) -> list[int]:
    out = [0] * n
    for i, ai in enumerate(a[:n]):
        if ai:
            for j, bj in enumerate(b[: n - i]):
                out[i + j] += ai * bj
    return out


@lru_cache(maxsize=8)
def tau_coefficients(n_max: int = 200) -> QExpansion:
    """tau(n) for n <= n_max, exactly.

    prod (1 - q^n)^3 = sum_m (-1)^m (2m+1) q^(m(m+1)/2); the 24th power is the
    cube of that series raised to the 8th, by three exact squarings.
    """
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    n = n_max  # need coefficients of q^0 .. q^(n_max - 1) in the product
    a = [0] * n
    m = 0
    while m * (m + 1) // 2 < n:
        a[m * (m + 1) // 2] = (-1) ** m * (2 * m + 1)
        m += 1
    for _ in range(3):
        a = _mul_trunc(a, a, n)
    return QExpansion(tuple(a), n_max)


def tau_naive(n_max: int) -> list[int]:
    """Reference expansion of q prod (1 - q^n)^24 by repeated factor multiplication."""
    c = [0] * n_max
    c[0] = 1
    for n in range(1, n_max):
        for _ in range(24):
            for j in range(n_max - 1, n - 1, -1):
                c[j] -= c[j - n]
    return c


def _tail_bound(y, n_max):
    """Bound on sum over n > n_max of |tau(n)| e^(-2 pi n y), using |tau(n)| <= 2 n^6."""
    n1 = n_max + 1
    rho = ((n1 + 1) / n1) ** 6 * np.exp(-2 * math.pi * y)
    return 2.0 * n1 ** 6 * np.exp(-2 * math.pi * n1 * y) / (1 - rho)


def delta_eval(z, exp: QExpansion | None = None, return_bound: bool = False):
    """Delta(z) = sum tau(n) q^n, q = e^(2 pi i z); accepts scalars or arrays."""
    exp = exp or tau_coefficients()
    zc = np.asarray(z if not hasattr(z, "x") else as_complex(z), dtype=complex)
    y = zc.imag
    if np.any(y < Y_MIN):
        raise ValueError(f"delta_eval needs Im z >= {Y_MIN}")
    bound = _tail_bound(y, exp.n_max)
    lead = np.exp(-2 * math.pi * y)
    if np.any(bound >= 1e-15 * lead):
        raise ValueError("increase n_max")
    n = np.arange(1, exp.n_max + 1)
    coef = np.array(exp.coefficients, dtype=float)
    terms = coef * np.exp(2j * math.pi * np.multiply.outer(zc, n))
    val = terms.sum(axis=-1)
    if return_bound:
        return val, bound
    return complex(val) if val.ndim == 0 else val


def _delta_sq_weighted(z, exp):
    """y^12 |Delta(z)|^2 after reduction into the standard domain."""
    zr = reduce_array(z)
    return zr.imag ** 12 * np.abs(delta_eval(zr, exp)) ** 2


@dataclass(frozen=True)
class PeterssonNorm:
    value: float
    error_estimate: float
    tail_bound: float
    resolution: int
    y_max: float


def _norm_quadrature(n: int, y_max: float, exp: QExpansion) -> float:
    gx, wx = np.polynomial.legendre.leggauss(n)
    ga, wa = np.polynomial.legendre.leggauss(2 * n)
    x = 0.5 * gx
    wxs = 0.5 * wx
    total = 0.0
    for xi, wi in zip(x, wxs):
        y0 = math.sqrt(1.0 - xi * xi)
        # two panels: the bulk of the mass lies below y = 3
        parts = []
        for lo, hi in ((y0, 3.0), (3.0, y_max)):
            t = lo + (hi - lo) * 0.5 * (ga + 1)
            z = xi + 1j * t
            f = t ** 10 * np.abs(delta_eval(z, exp)) ** 2
            parts.append(0.5 * (hi - lo) * math.fsum((wa * f).tolist()))
        total += wi * math.fsum(parts)
    return total


def petersson_norm_delta(resolution: int = 24, y_max: float = 30.0,
                         exp: QExpansion | None = None) -> PeterssonNorm:
    """<Delta, Delta> = integral over the domain of y^12 |Delta|^2 dx dy / y^2.

    Gauss-Legendre in x, and in y from the arc to y_max on two panels; the error
    estimate is the change under doubling the resolution. Above y_max,
    |Delta| <= 1.01 e^(-2 pi y), which gives the certified tail.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    exp = exp or tau_coefficients()
    coarse = _norm_quadrature(resolution, y_max, exp)
    fine = _norm_quadrature(2 * resolution, y_max, exp)
    a = 4 * math.pi * y_max
    tail = 1.01 ** 2 * math.exp(gammaln(11)) * gammaincc(11, a) / (4 * math.pi) ** 11
    return PeterssonNorm(fine, abs(fine - coarse), tail, resolution, y_max)


@lru_cache(maxsize=1)
def default_norm() -> float:
    return petersson_norm_delta().value


def oracle_variance_k12(z, norm: float | None = None, exp: QExpansion | None = None):
    """y^12 |Delta(z)|^2 / <Delta, Delta>, for scalars or arrays of points."""
    exp = exp or tau_coefficients()
    norm = default_norm() if norm is None else norm
    zc = np.asarray(as_complex(z) if not isinstance(z, np.ndarray) else z, dtype=complex)
    out = _delta_sq_weighted(zc.ravel(), exp) / norm
    return float(out[0]) if zc.ndim == 0 else out.reshape(zc.shape)
