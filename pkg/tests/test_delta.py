import math

import numpy as np
import pytest

from randcusp.delta import (
    QExpansion,
    default_norm,
    delta_eval,
    oracle_variance_k12,
    petersson_norm_delta,
    tau_coefficients,
    tau_naive,
)
from randcusp.hyperbolic import S, T, moebius_apply
from randcusp.kernel import covariance_r

KNOWN_TAU = [1, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643, -115920]


def test_tau_examples():
    e = tau_coefficients(60)
    assert e.tau(1) == 1
    assert e.tau(2) == -24
    assert list(e.coefficients[:10]) == KNOWN_TAU
    assert e.tau(6) == e.tau(2) * e.tau(3)


def test_tau_exact_integers_and_naive():
    e = tau_coefficients(80)
    assert all(isinstance(c, int) for c in e.coefficients)
    assert list(e.coefficients) == tau_naive(80)


def test_hecke_multiplicativity():
    e = tau_coefficients(200)
    for m, n in ((2, 3), (2, 5), (3, 5), (4, 25), (7, 11)):
        assert e.tau(m * n) == e.tau(m) * e.tau(n)
    p = 2
    assert e.tau(p ** 3) == e.tau(p) * e.tau(p ** 2) - p ** 11 * e.tau(p)


def test_tau_bound_used_for_tail():
    e = tau_coefficients(200)
    assert all(abs(c) <= 2 * n ** 6 for n, c in enumerate(e.coefficients, 1))


def test_qexpansion_validation():
    with pytest.raises(ValueError):
        QExpansion((2, 1), 2)
    with pytest.raises(ValueError):
        tau_coefficients(0)


def test_delta_periodic():
    z = 0.3 + 0.9j
    assert delta_eval(z + 1) == pytest.approx(delta_eval(z), rel=1e-12)


def test_delta_weight_12():
    z = 0.3 + 1.4j
    w = -1 / z
    # w has Im about 0.69, still inside the evaluation range
    assert w.imag ** 6 * abs(delta_eval(w)) == pytest.approx(z.imag ** 6 * abs(delta_eval(z)), rel=1e-9)
    assert delta_eval(w) == pytest.approx(z ** 12 * delta_eval(z), rel=1e-9)


def test_delta_single_term_decay():
    d = [abs(delta_eval(1j * y)) for y in (3, 4, 5)]
    assert d[1] / d[0] == pytest.approx(math.exp(-2 * math.pi), rel=1e-6)
    assert d[2] / d[1] == pytest.approx(math.exp(-2 * math.pi), rel=1e-8)


def test_delta_errors():
    with pytest.raises(ValueError):
        delta_eval(0.1 + 0.3j)
    with pytest.raises(ValueError, match="increase n_max"):
        delta_eval(0.5j, tau_coefficients(10))
    v, b = delta_eval(0.1 + 0.6j, return_bound=True)
    assert b < 1e-15 * math.exp(-2 * math.pi * 0.6)


def test_petersson_norm():
    pn = petersson_norm_delta()
    assert pn.value == pytest.approx(1.0354e-6, rel=1e-3)
    assert pn.error_estimate <= 1e-4 * pn.value
    assert pn.tail_bound < 1e-12 * pn.value
    longer = petersson_norm_delta(y_max=60)
    assert abs(longer.value - pn.value) <= pn.tail_bound + 1e-12 * pn.value
    coarse = petersson_norm_delta(resolution=12)
    assert coarse.value == pytest.approx(pn.value, rel=1e-4)


def test_half_cell_symmetry():
    # tau real, so y^12 |Delta|^2 is even in x: each half of the domain carries half the mass
    g, w = np.polynomial.legendre.leggauss(40)
    total = 0.0
    for sign in (-1, 1):
        part = 0.0
        for xi, wi in zip(0.25 * (g + 1), 0.25 * w):
            y0 = math.sqrt(1 - xi * xi)
            t = y0 + (8 - y0) * 0.5 * (g + 1)
            f = t ** 10 * np.abs(delta_eval(sign * xi + 1j * t)) ** 2
            part += wi * 0.5 * (8 - y0) * float(np.dot(w, f))
        total += part
        if sign < 0:
            left = part
    assert left == pytest.approx(total / 2, rel=1e-12)
    assert total == pytest.approx(default_norm(), rel=1e-6)


def test_oracle_matches_kernel():
    z = 0.1 + 1.3j
    assert covariance_r(z, z, 12).real == pytest.approx(oracle_variance_k12(z), rel=1e-6)


def test_oracle_invariance():
    z = 0.1 + 1.3j
    for g in (T, S, S @ T, T @ S @ T):
        gz = moebius_apply(g, z)
        assert oracle_variance_k12(gz) == pytest.approx(oracle_variance_k12(z), rel=1e-9)


def test_oracle_high_in_cusp():
    # uses the coset series for y >= 2
    for y in (2.0, 3.0, 12 / (4 * math.pi) * 5):
        z = 0.2 + 1j * y
        assert covariance_r(z, z, 12).real == pytest.approx(oracle_variance_k12(z), rel=1e-6)


def test_oracle_vectorized():
    z = np.array([0.1 + 1.3j, -0.4 + 1.1j])
    v = oracle_variance_k12(z)
    assert v.shape == (2,)
    assert v[0] == pytest.approx(oracle_variance_k12(0.1 + 1.3j))
