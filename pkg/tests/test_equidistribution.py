import math

import numpy as np
import pytest
from scipy import integrate

from latlab.bumps import BumpFunction, sobolev_norm
from latlab.core import ConeVector, Dims, make_g_vt, make_u_Y
from latlab.errors import AccuracyError, InsufficientDataError, InvalidArgumentError
from latlab.equidistribution import (TestFunction, I_integral, I_integral_certified,
                                     I_integral_unfolded, balancing_radius, base_points,
                                     decay_fit, eps_of_section_4, equidist_error, equidist_point,
                                     eval_test_function, gamma_tilde, infer_dims,
                                     rhs_bound_thm_2_3)
from latlab.lattice import Lattice, in_K_eps, indicator_ball, smoothed_ball, zeta

Z2 = Lattice.standard(2)
Z3 = Lattice.standard(3)
DISC = TestFunction.siegel(smoothed_ball())


def test_eval_test_function_examples():
    one = TestFunction.lambda1_profile(lambda x: np.ones_like(np.asarray(x, dtype=float)))
    assert eval_test_function(one, Lattice(np.diag([3.0, 1 / 3]))) == 1.0
    assert eval_test_function(TestFunction.siegel(indicator_ball(0.5)), Z2) == 0.0
    assert eval_test_function(TestFunction.siegel(indicator_ball(1.0)), Z2) == 4.0


def test_test_function_validation():
    with pytest.raises(InvalidArgumentError):
        TestFunction("heat")
    with pytest.raises(InvalidArgumentError):
        TestFunction("siegel")


def test_means():
    assert DISC.mean(2) == pytest.approx(6 / math.pi, rel=1e-12)
    # the ramp is in r^2, so it preserves volume only in the plane
    radial, _ = integrate.quad(lambda r: smoothed_ball()(np.array([r]))[0] * r * r, 0, 1.1,
                               points=[math.sqrt(0.95), 1.0], epsabs=1e-14)
    assert DISC.mean(3) == pytest.approx(4 * math.pi * radial / zeta(3), rel=1e-10)
    assert DISC.mean(3) == pytest.approx(4 * math.pi / 3 / zeta(3), rel=1e-3)
    assert TestFunction.constant(2.5).mean(2) == 2.5
    assert TestFunction.lambda1_profile(np.cos).mean(2) is None


def test_infer_dims():
    assert infer_dims(1, 2) == Dims(1, 1)
    assert infer_dims(4, 4) == Dims(2, 2)
    with pytest.raises(InvalidArgumentError):
        infer_dims(2, 3)
    with pytest.raises(InvalidArgumentError):
        infer_dims(3, 3)


def test_I_constant_psi():
    f = BumpFunction(1, 0.3)
    g = make_g_vt(Dims(1, 1), ConeVector(Dims(1, 1), (2.0, 2.0)))
    assert I_integral(f, TestFunction.constant(1.7), g, Z2) == pytest.approx(1.7, rel=1e-3)


def test_I_certificate_resists_aliasing():
    # on a symmetric rational grid every node sits in the cusp at these floors
    # and coarse rules agree on the wrong value 2
    f = BumpFunction(1, 0.3)
    for s in (6.0, 8.0):
        g = make_g_vt(Dims(1, 1), ConeVector(Dims(1, 1), (s, s)))
        res = I_integral_certified(f, DISC, g, Z2, 16, max_points_per_axis=2 ** 14)
        assert res.points_per_axis > 64
        assert res.value == pytest.approx(6 / math.pi, rel=0.01)


def test_I_concentrated_bump_recovers_point_value():
    F = lambda x: np.exp(-np.asarray(x, dtype=float))
    psi = TestFunction.lambda1_profile(F)
    val = I_integral(BumpFunction(1, 0.05), psi, np.eye(2), Z2)
    assert val == pytest.approx(math.exp(-1.0), rel=0.01)


def test_I_substitution_identity():
    # translating f by Y0 equals replacing z by u_{Y0} z
    dims = Dims(1, 1)
    f = BumpFunction(1, 0.3)
    g = make_g_vt(dims, ConeVector(dims, (0.5, 0.5)))
    Y0 = 0.2
    shifted = Lattice(make_u_Y(dims, Y0) @ Z2.basis)
    lhs = I_integral(f, DISC, g @ make_u_Y(dims, Y0), Z2, 64)
    rhs = I_integral(f, DISC, g, shifted, 64)
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_I_certificate_failure():
    f = BumpFunction(1, 0.3)
    for s in (4.0, 6.0):
        g = make_g_vt(Dims(1, 1), ConeVector(Dims(1, 1), (s, s)))
        with pytest.raises(AccuracyError):
            I_integral_certified(f, DISC, g, Z2, 16, max_points_per_axis=64)
    with pytest.raises(InvalidArgumentError):
        I_integral_certified(f, DISC, g, Z2, 4)


def test_unfolded_matches_midpoint_k2():
    f = BumpFunction(1, 0.3)
    for s in (1.0, 2.0):
        t = ConeVector(Dims(1, 1), (s, s))
        u = I_integral_unfolded(f, DISC, t, Z2).value
        mid = I_integral(f, DISC, make_g_vt(t.dims, t), Z2, 64, rtol=1e-4)
        assert u == pytest.approx(mid, rel=2e-3)


def test_unfolded_matches_midpoint_k3():
    f = BumpFunction(2, 0.3)
    dims = Dims(2, 1)
    for s in (0.25, 0.5):
        t = ConeVector.along_ray(dims, (1, 2, 3), s)
        u = I_integral_unfolded(f, DISC, t, Z3).value
        mid = I_integral(f, DISC, make_g_vt(dims, t), Z3, 32, dims=dims)
        assert u == pytest.approx(mid, rel=0.01)


def test_unfolded_perturbed_base_point():
    # the box enumeration path (basis not upper triangular in the last row)
    dims = Dims(1, 1)
    f = BumpFunction(1, 0.3)
    L = Lattice(np.array([[1.0, 0.0], [0.3, 1.0]]))
    t = ConeVector(dims, (1.0, 1.0))
    u = I_integral_unfolded(f, DISC, t, L).value
    mid = I_integral(f, DISC, make_g_vt(dims, t), L, 64, rtol=1e-4)
    assert u == pytest.approx(mid, rel=2e-3)


def test_unfolded_rejects_unsupported():
    f = BumpFunction(1, 0.3)
    t = ConeVector(Dims(1, 1), (1.0, 1.0))
    with pytest.raises(InvalidArgumentError):
        I_integral_unfolded(f, TestFunction.constant(1.0), t, Z2)
    with pytest.raises(InvalidArgumentError):
        I_integral_unfolded(BumpFunction(2, 0.3), DISC, ConeVector(Dims(1, 2), (2.0, 1.0, 1.0)),
                            Z3)


def test_equidist_error_at_floor_8():
    f = BumpFunction(1, 0.3)
    assert equidist_error(f, DISC, ConeVector(Dims(1, 1), (8.0, 8.0)), Z2) < 0.05


def test_equidist_error_zero_scale():
    f = BumpFunction(1, 0.3)
    t = ConeVector(Dims(1, 1), (2.0, 2.0))
    assert equidist_error(f, DISC.scaled(0.0), t, Z2) == 0.0
    assert equidist_error(f, DISC.scaled(0.0), t, Z2, quad="midpoint") == 0.0


def test_equidist_point_needs_mean():
    with pytest.raises(InvalidArgumentError):
        equidist_point(BumpFunction(1, 0.3), TestFunction.lambda1_profile(np.cos),
                       ConeVector(Dims(1, 1), (1.0, 1.0)), Z2)
    with pytest.raises(InvalidArgumentError):
        equidist_point(BumpFunction(1, 0.3), DISC, ConeVector(Dims(1, 1), (1.0, 1.0)), Z2,
                       method="simpson")


def test_decay_k2():
    f = BumpFunction(1, 0.3)
    pts = [(s, equidist_error(f, DISC, ConeVector(Dims(1, 1), (s, s)), Z2)) for s in range(2, 9)]
    fit = decay_fit(pts)
    assert fit.gamma_hat > 0
    assert fit.residual < 0.5
    assert pts[-1][1] < 0.05


def test_decay_fit_exact():
    s = np.arange(1, 11)
    fit = decay_fit(list(zip(s, 5 * np.exp(-0.3 * s))))
    assert fit.gamma_hat == pytest.approx(0.3, abs=1e-12)
    assert fit.C_hat == pytest.approx(5.0, rel=1e-12)
    assert fit.residual < 1e-12


def test_decay_fit_noisy():
    rng = np.random.default_rng(0)
    s = np.arange(1, 11)
    err = 5 * np.exp(-0.3 * s) * (1 + 0.01 * rng.normal(size=s.size))
    assert abs(decay_fit(list(zip(s, err))).gamma_hat - 0.3) < 0.02


def test_decay_fit_constant_and_insufficient():
    assert decay_fit([(1, 0.2), (2, 0.2), (3, 0.2)]).gamma_hat == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(InsufficientDataError):
        decay_fit([(1, 0.1), (2, 0.05)])
    with pytest.raises(InsufficientDataError):
        decay_fit([(1, 0.1), (2, 0.0), (3, 0.0)])


def test_gamma_tilde():
    assert gamma_tilde(1.0, 1, Dims(1, 1)) == pytest.approx(1 / 7, rel=1e-15)
    assert gamma_tilde(1.0, 1, Dims(2, 1)) == pytest.approx(1 / 61, rel=1e-15)
    for dims in (Dims(1, 1), Dims(2, 1), Dims(2, 2)):
        assert gamma_tilde(0.7, 2, dims) < 0.7
    with pytest.raises(InvalidArgumentError):
        gamma_tilde(1.0, 0, Dims(1, 1))


def test_rhs_bound():
    val = rhs_bound_thm_2_3(1.0, 0.1, 1.0, 10.0, 1, 2, 1.0, 10.0)
    assert val == pytest.approx(0.1 + 1e3 * 10 * math.exp(-10), rel=1e-15)
    assert val == pytest.approx(0.554, abs=1e-3)
    assert rhs_bound_thm_2_3(2.0, 0.1, 3.0, 10.0, 1, 2, 1.0, 1e4) == pytest.approx(0.6)


def test_balancing_radius():
    # r* solves r^{2l+N/2+1} = (2l+N/2) |f|_l e^{-gamma t} / |f|_1, so r* ~ e^{-gamma t / 4}
    rs = [balancing_radius(1.0, 1.0, 10.0, 1, 2, 1.0, t) for t in (10.0, 14.0)]
    for t, r in zip((10.0, 14.0), rs):
        assert r == pytest.approx((3 * 10.0 * math.exp(-t)) ** 0.25, rel=1e-6)
    assert math.log(rs[0] / rs[1]) / 4.0 == pytest.approx(0.25, rel=1e-6)


def test_eps_of_section_4():
    assert eps_of_section_4(0.5, 1.0, 2.0, 2) == pytest.approx(math.sqrt(4 * math.exp(-2)))
    assert eps_of_section_4(0.5, 1.0, 2.0, 2) == pytest.approx(0.7358, abs=1e-4)
    assert eps_of_section_4(0.5, 1.0, 200.0, 2) < 1e-40
    vals = [eps_of_section_4(4.0, 1.0, 1.0, k) for k in (2, 4, 8, 16, 64)]
    assert all(a < b < 1 for a, b in zip(vals, vals[1:]))


def test_sobolev_feeds_rhs():
    f = BumpFunction(1, 0.3)
    assert rhs_bound_thm_2_3(1.0, 0.1, 1.0, sobolev_norm(f, 1), 1, 2, 1.0, 50.0) == \
        pytest.approx(0.1, rel=1e-6)


def test_base_points():
    for dims in (Dims(1, 1), Dims(2, 1)):
        pts = base_points(dims)
        assert len(pts) == 4
        assert np.allclose(pts[0].basis, np.eye(dims.k))
        assert all(in_K_eps(L, 0.3) for L in pts)
    with pytest.raises(InvalidArgumentError):
        base_points(Dims(1, 1), count=5)


@pytest.mark.slow
def test_direction_uniformity_k3():
    f = BumpFunction(2, 0.3)
    dims = Dims(2, 1)
    gammas = []
    for ray in ((1, 2, 3), (2, 1, 3), (1.4, 1.6, 3)):
        pts = [(s, equidist_error(f, DISC, ConeVector.along_ray(dims, ray, s), Z3))
               for s in (1.5, 1.75, 2.0)]
        gammas.append(decay_fit(pts).gamma_hat)
    assert min(gammas) > 0
