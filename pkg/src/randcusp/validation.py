"""Oracle battery run by ``randcusp validate``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cubature

from .delta import oracle_variance_k12, petersson_norm_delta
from .experiments import COMPACT_REGION
from .hyperbolic import brute_force_near, enumerate_near
from .kernel import DEFAULT_EPS, bergman_R, bergman_R_pairs, covariance_scale, kernel_best
from .sampler import factor_for_grid, make_grid
from .stats import analytic_lp_expectation, sphere_tail_estimate, sphere_tail_law


@dataclass
class Check:
    name: str
    passed: bool
    detail: str


def check_enumeration(n_pairs: int = 5, seed: int = 0) -> Check:
    rng = np.random.default_rng(seed)
    bad = 0
    for _ in range(n_pairs):
        z = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.9, 2.0))
        w = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.9, 2.0))
        X = float(rng.uniform(0, 5))
        fast = {g.entries() for g in enumerate_near(z, w, X)}
        bad += fast != brute_force_near(z, w, X, 30)
    return Check("enumeration vs brute force", bad == 0, f"{n_pairs - bad}/{n_pairs} pairs equal")


def check_cross_method() -> Check:
    worst = 0.0
    for y, k in ((2, 40), (3, 40), (3, 60)):
        P = kernel_best(1j * y, 1j * y, k)
        D = bergman_R(1j * y, 1j * y, k, eps=1e-10 * abs(P.value), precision=40)
        worst = max(worst, abs(D.value - P.value) / abs(P.value))
    return Check("coset series vs direct sum", worst <= 1e-8, f"max rel diff {worst:.2e}")


def check_delta(kernel_eps: float = DEFAULT_EPS) -> Check:
    norm = petersson_norm_delta().value
    pts = [0.1 + 1.3j, 0.3 + 1.05j, 0.45 + 0.95j, 0.02 + 1.02j, -0.2 + 1.7j]
    worst = 0.0
    for z in pts:
        r = covariance_scale(12) * bergman_R(z, z, 12, kernel_eps).value.real
        o = oracle_variance_k12(z, norm)
        worst = max(worst, abs(r - o) / o)
    return Check("weight-12 kernel vs Delta", worst <= 1e-6, f"max rel diff {worst:.2e} (eps {kernel_eps:g})")


def check_sphere_tail(n_draws: int = 200_000) -> Check:
    p, se = sphere_tail_estimate(2, 0.6, n_draws, seed=1)
    zc = (p - sphere_tail_law(2, 0.6, "corrected")) / se
    zp = (p - sphere_tail_law(2, 0.6, "paper")) / se
    ok = abs(zc) < 5 and abs(zp) > 20
    return Check("sphere tail convention", ok, f"z(corrected)={zc:.1f}, z(paper)={zp:.1f}")


def rdiag_integral_cubature(k: int, region=COMPACT_REGION, rtol: float = 1e-11) -> float:
    """Integral of r_diag over a rectangle by scipy's adaptive cubature (independent rule)."""
    scale = covariance_scale(k)
    (x0, x1), (y0, y1) = region.x_range, region.y_range

    def f(P):
        z = P[:, 0] + 1j * P[:, 1]
        R, _, _, _ = bergman_R_pairs(z, z, k, 1e-13)
        return scale * R.real / P[:, 1] ** 2

    res = cubature(f, [x0, y0], [x1, y1], rtol=rtol, atol=0)
    if res.status != "converged":
        raise RuntimeError("cubature did not converge")
    return float(res.estimate)


def check_p2_identity(k: int = 120) -> Check:
    a = analytic_lp_expectation(k, 2, COMPACT_REGION)
    I = rdiag_integral_cubature(k)
    g = make_grid(COMPACT_REGION, k)
    F = factor_for_grid(g)
    riemann = math.sqrt(float(np.dot(g.weights, F.diagonal())))
    rel = abs(a - math.sqrt(I)) / math.sqrt(I)
    ok = rel <= 1e-6 and abs(riemann - a) / a < 1e-3
    return Check("p=2 identity", ok, f"rel {rel:.1e}; grid sum differs by {abs(riemann - a) / a:.1e}")


def run_all(kernel_eps: float = DEFAULT_EPS, quick: bool = False) -> list[Check]:
    return [
        check_enumeration(3 if quick else 8),
        check_cross_method(),
        check_delta(kernel_eps),
        check_sphere_tail(50_000 if quick else 400_000),
        check_p2_identity(),
    ]
