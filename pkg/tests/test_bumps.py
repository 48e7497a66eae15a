import math

import numpy as np
import pytest
from scipy import integrate

from latlab.bumps import (BumpFunction, GridFunction, c_ell_norm, contracted_product, l1_norm,
                          multi_indices, product_function, sobolev_norm, tensor_function)
from latlab.errors import AccuracyError, InvalidArgumentError


def test_multi_indices():
    assert multi_indices(2, 1) == [(0, 0), (1, 0), (0, 1)]
    assert len(multi_indices(3, 2)) == 10


def test_bump_integral_is_one():
    f = BumpFunction(1, 0.5)
    val, _ = integrate.quad(lambda x: f(np.array([x]))[0], -0.5, 0.5, epsabs=1e-13, epsrel=1e-12)
    assert val == pytest.approx(1.0, abs=1e-8)
    g = BumpFunction(2, 0.7)
    val, _ = integrate.dblquad(lambda y, x: g(np.array([[x, y]]))[0], -0.7, 0.7, -0.7, 0.7,
                               epsabs=1e-11, epsrel=1e-10)
    assert val == pytest.approx(1.0, abs=1e-8)


def test_bump_scaling_identity():
    rng = np.random.default_rng(0)
    for N in (1, 2, 3):
        X = rng.uniform(-0.4, 0.4, size=(50, N))
        r = 0.4
        assert np.allclose(BumpFunction(N, r)(X), r ** -N * BumpFunction(N, 1.0)(X / r))


def test_bump_support_and_sign():
    f = BumpFunction(2, 0.3)
    assert f(np.array([[0.3, 0.0], [0.0, -0.3], [0.5, 0.5]])).tolist() == [0.0, 0.0, 0.0]
    X = np.random.default_rng(1).uniform(-0.3, 0.3, size=(200, 2))
    assert np.all(f(X) >= 0)
    with pytest.raises(InvalidArgumentError):
        BumpFunction(1, 0.0)


def test_bump_partials_match_finite_differences():
    f = BumpFunction(2, 0.8)
    X = np.array([[0.1, -0.2], [0.3, 0.25]])
    h = 1e-5
    for i in range(2):
        e = np.zeros(2)
        e[i] = h
        fd = (f(X + e) - f(X - e)) / (2 * h)
        alpha = tuple(int(j == i) for j in range(2))
        assert np.allclose(f.partial(alpha, X), fd, rtol=1e-6)


def test_sobolev_l2_scaling_example():
    unit = sobolev_norm(BumpFunction(1, 1.0), 0)
    for r in (0.5, 0.25):
        assert sobolev_norm(BumpFunction(1, r), 0) == pytest.approx(r ** -0.5 * unit, rel=1e-6)


@pytest.mark.parametrize("N", [1, 2])
@pytest.mark.parametrize("ell", [0, 1])
def test_sobolev_scaling_law(N, ell):
    vals = [r ** (ell + N / 2) * sobolev_norm(BumpFunction(N, r), ell) for r in (0.5, 0.25, 0.125)]
    assert max(vals) / min(vals) - 1 < 0.05


def test_sobolev_homogeneity():
    f = BumpFunction(1, 0.5)
    doubled = GridFunction(lambda X: 2 * f(X), 1, 0.5)
    assert sobolev_norm(doubled, 1) == pytest.approx(2 * sobolev_norm(f, 1), rel=1e-3)


def test_sobolev_grid_function_matches_exact_partials():
    f = BumpFunction(1, 0.5)
    as_grid = GridFunction(f, 1, 0.5)
    assert sobolev_norm(as_grid, 2) == pytest.approx(sobolev_norm(f, 2), rel=1e-3)


def test_sobolev_rejects_bad_ell_and_unresolved_grid():
    f = BumpFunction(1, 0.5)
    with pytest.raises(InvalidArgumentError):
        sobolev_norm(f, 4)
    with pytest.raises(AccuracyError):
        sobolev_norm(BumpFunction(1, 0.01), 3, points_per_axis=9)


def test_l1_and_c_ell():
    f = BumpFunction(1, 0.5)
    assert l1_norm(f) == pytest.approx(1.0, rel=1e-6)
    assert c_ell_norm(f, 0) == pytest.approx(float(f(np.array([0.0]))[0]), rel=1e-6)


def test_product_bound_constant_is_stable():
    # ||theta_1 theta_2||_l <= K ||theta_1||_l ||theta_2||_{C^l}, K fitted then re-fitted on a finer grid
    def fitted_K(n):
        ratios = []
        for r in (0.5, 0.25, 0.125):
            t1, t2 = BumpFunction(1, r), BumpFunction(1, 2 * r)
            lhs = sobolev_norm(product_function(t1, t2), 1, points_per_axis=n)
            ratios.append(lhs / (sobolev_norm(t1, 1, points_per_axis=n) * c_ell_norm(t2, 1, n)))
        return max(ratios)

    K, K_fine = fitted_K(801), fitted_K(1601)
    assert K <= 1.0
    assert K_fine == pytest.approx(K, rel=0.01)


def test_tensor_bound():
    for r in (0.5, 0.25):
        t1, t2 = BumpFunction(1, r), BumpFunction(1, r)
        tensor = tensor_function(t1, t2)
        K = sobolev_norm(tensor, 1) / (sobolev_norm(t1, 1) * sobolev_norm(t2, 1))
        assert K <= 1.0 + 1e-6
    exact = BumpFunction(1, 0.5)
    t = tensor_function(exact, exact)
    assert sobolev_norm(t, 0) == pytest.approx(sobolev_norm(exact, 0) ** 2, rel=1e-3)


def test_contracted_product_bookkeeping():
    # ||f_h||_l <= K'' r^{-(l + mn/2)} ||f||_{C^l} over r and contraction sweeps, m = n = 1
    f = BumpFunction(1, 1.0)
    cf = c_ell_norm(f, 1)
    vals = []
    for r in (0.4, 0.2, 0.1):
        theta = BumpFunction(1, r)
        for u in (0.0, 0.5, 1.0, 2.0):
            fh = contracted_product(f, theta, [math.exp(-2 * u)], [0.1])
            vals.append(sobolev_norm(fh, 1) * r ** 1.5 / cf)
    assert max(vals) < 1.0
    assert max(vals) / min(vals) < 3.0
    with pytest.raises(InvalidArgumentError):
        contracted_product(f, BumpFunction(1, 0.2), [2.0], [0.0])
