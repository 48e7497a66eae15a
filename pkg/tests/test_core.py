import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latlab.core import (ConeVector, Dims, EntryBump, conj_phi, decompose_local, dist_G,
                         floor_vt, make_g_t, make_g_vt, make_u_Y, mc_haar_check, modular_delta,
                         split_vt)
from latlab.errors import DecompositionError, InvalidArgumentError, SupportError


def random_sl(rng, k):
    A = rng.normal(size=(k, k))
    if np.linalg.det(A) < 0:
        A[0] *= -1
    return A / np.linalg.det(A) ** (1 / k)


def test_dims():
    d = Dims(2, 3)
    assert d.k == 5 and d.mn == 6
    with pytest.raises(InvalidArgumentError):
        Dims(0, 1)


def test_make_g_t_examples():
    assert np.allclose(make_g_t(Dims(1, 1), 0.0), np.eye(2))
    assert np.allclose(make_g_t(Dims(1, 1), math.log(2)), np.diag([2, 0.5]))
    e = math.e
    assert np.allclose(make_g_t(Dims(2, 1), 2.0), np.diag([e, e, e ** -2]))
    with pytest.raises(InvalidArgumentError):
        make_g_t(Dims(1, 1), float("inf"))


def test_make_g_vt_examples():
    e = math.e
    assert np.allclose(make_g_vt(Dims(1, 1), ConeVector(Dims(1, 1), (3, 3))), np.diag([e ** 3, e ** -3]))
    assert np.allclose(make_g_vt(Dims(2, 2), ConeVector(Dims(2, 2), (1, 1, 1, 1))),
                       np.diag([e, e, 1 / e, 1 / e]))
    assert np.allclose(make_g_vt(Dims(2, 1), ConeVector(Dims(2, 1), (1, 2, 3))),
                       np.diag([e, e * e, e ** -3]))


def test_make_g_vt_matches_scalar_flow():
    dims = Dims(2, 3)
    t = 1.7
    vt = ConeVector(dims, (t / 2, t / 2, t / 3, t / 3, t / 3))
    assert np.allclose(make_g_vt(dims, vt), make_g_t(dims, t))


def test_cone_vector_rejects_invalid():
    with pytest.raises(InvalidArgumentError):
        ConeVector(Dims(1, 1), (1.0, 2.0))
    with pytest.raises(InvalidArgumentError):
        ConeVector(Dims(1, 1), (0.0, 0.0))
    with pytest.raises(InvalidArgumentError):
        ConeVector(Dims(2, 1), (1.0, 2.0))


def test_make_u_Y():
    d = Dims(1, 1)
    assert np.allclose(make_u_Y(d, 0.0), np.eye(2))
    assert np.allclose(make_u_Y(d, 0.5), [[1, 0.5], [0, 1]])
    d = Dims(2, 2)
    Y = np.arange(4.0).reshape(2, 2)
    assert np.allclose(make_u_Y(d, Y) @ make_u_Y(d, -Y), np.eye(4))
    assert np.allclose(make_u_Y(d, Y) @ make_u_Y(d, 2 * Y), make_u_Y(d, 3 * Y))


def test_floor_vt():
    assert floor_vt(ConeVector(Dims(2, 2), (1, 1, 1, 1))) == 1
    assert floor_vt(ConeVector(Dims(2, 2), (0.5, 1.5, 1.2, 0.8))) == 0.5
    assert floor_vt(ConeVector(Dims(1, 1), (3, 3))) == 3


def test_split_vt_examples():
    s, u = split_vt(ConeVector(Dims(1, 1), (3, 3)))
    assert s == 1.5 and np.allclose(u.t, (1.5, 1.5))
    s, u = split_vt(ConeVector(Dims(2, 1), (1, 2, 3)))
    assert s == 0.5 and np.allclose(u.t, (0.75, 1.75, 2.5))
    assert u.floor >= s
    s, u = split_vt(ConeVector(Dims(1, 1), (4, 4)))
    assert s == 2 and np.allclose(u.t, (2, 2))
    # for m, n > 1 equal components 2c lose c/m and c/n, not c
    s, u = split_vt(ConeVector(Dims(2, 2), (4, 4, 4, 4)))
    assert s == 2 and np.allclose(u.t, (3, 3, 3, 3))


@st.composite
def cone_vectors(draw):
    m = draw(st.integers(1, 3))
    n = draw(st.integers(1, 3))
    top = np.array(draw(st.lists(st.floats(0.05, 5), min_size=m, max_size=m)))
    low = np.array(draw(st.lists(st.floats(0.05, 5), min_size=n, max_size=n)))
    low = low * top.sum() / low.sum()
    return ConeVector(Dims(m, n), tuple(top) + tuple(low))


@settings(max_examples=200, deadline=None)
@given(cone_vectors())
def test_split_vt_reconstructs(t):
    s, u = split_vt(t)
    G = make_g_vt(t.dims, t)
    assert np.allclose(make_g_t(t.dims, s) @ make_g_vt(t.dims, u), G, rtol=1e-12, atol=0)
    assert u.floor >= s * (1 - 1e-12)


def test_conj_phi_examples():
    t = ConeVector(Dims(1, 1), (1, 1))
    assert conj_phi(t, 0.0) == 0
    assert math.isclose(conj_phi(t, 1.0).item(), math.e ** 2)
    assert math.isclose(conj_phi(t, 1.0, inverse=True).item(), math.e ** -2)


@settings(max_examples=100, deadline=None)
@given(cone_vectors(), st.integers(0, 2**31))
def test_conj_phi_matches_conjugation(t, seed):
    dims = t.dims
    Y = np.random.default_rng(seed).normal(size=(dims.m, dims.n))
    G = make_g_vt(dims, t)
    expected = G @ make_u_Y(dims, Y) @ np.linalg.inv(G)
    assert np.allclose(make_u_Y(dims, conj_phi(t, Y)), expected, rtol=1e-12, atol=1e-12 * np.abs(expected).max())
    back = conj_phi(t, Y, inverse=True)
    assert np.all(np.abs(back) <= np.abs(Y) * math.exp(-2 * t.floor) * (1 + 1e-12))


def test_dist_G_examples():
    rng = np.random.default_rng(0)
    g, h = random_sl(rng, 3), random_sl(rng, 3)
    assert dist_G(g, g) == pytest.approx(0, abs=1e-12)
    assert dist_G(make_u_Y(Dims(1, 1), 1.0), np.eye(2)) == pytest.approx(1.0)
    assert dist_G(g @ h, h) == pytest.approx(dist_G(g, np.eye(3)))


def test_decompose_local_examples():
    d = Dims(1, 1)
    dec = decompose_local(np.eye(2), d)
    assert all(np.allclose(x, np.eye(2)) for x in dec[:3])
    u = make_u_Y(d, 0.7)
    dec = decompose_local(u, d)
    assert np.allclose(dec.h_minus, np.eye(2)) and np.allclose(dec.h_zero, np.eye(2))
    assert np.allclose(dec.h, u)
    dec = decompose_local(np.array([[2.0, 1.0], [1.0, 1.0]]), d)
    assert np.allclose(dec.h_minus, [[1, 0], [0.5, 1]])
    assert np.allclose(dec.h_zero, np.diag([2, 0.5]))
    assert np.allclose(dec.h, [[1, 0.5], [0, 1]])


def test_decompose_local_singular_block():
    with pytest.raises(DecompositionError):
        decompose_local(np.array([[0.0, 1.0], [-1.0, 0.0]]), Dims(1, 1))


@pytest.mark.parametrize("m,n", [(1, 1), (2, 1), (1, 2), (2, 2)])
def test_decompose_local_round_trip(m, n):
    rng = np.random.default_rng(m * 10 + n)
    dims = Dims(m, n)
    for _ in range(200):
        g = random_sl(rng, dims.k)
        dec = decompose_local(g, dims)
        assert np.linalg.norm(dec.product() - g) <= 1e-10 * np.linalg.norm(g)
        assert np.allclose(dec.h_minus[:m, m:], 0) and np.allclose(dec.h[m:, :m], 0)
        assert np.linalg.det(dec.h_zero) == pytest.approx(1.0)


def test_modular_delta():
    d = Dims(1, 1)
    assert modular_delta(np.eye(2), d) == 1.0
    assert modular_delta(np.diag([2.0, 0.5]), d) in (pytest.approx(4.0), pytest.approx(0.25))
    with pytest.raises(InvalidArgumentError):
        modular_delta(np.array([[1.0, 0.1], [0.0, 1.0]]), d)


def test_modular_delta_multiplicative():
    rng = np.random.default_rng(3)
    dims = Dims(2, 1)
    for _ in range(50):
        blocks = []
        for _ in range(2):
            A = random_sl(rng, 2) * rng.uniform(0.5, 2)
            h = np.zeros((3, 3))
            h[:2, :2] = A
            h[2, 2] = 1 / np.linalg.det(A)
            blocks.append(h)
        a, b = blocks
        assert modular_delta(a @ b, dims) == pytest.approx(modular_delta(a, dims) * modular_delta(b, dims))


def test_mc_haar_check_at_identity():
    rep = mc_haar_check(EntryBump(width=0.1), 200_000, seed=0)
    assert rep.passed
    assert rep.scalar == pytest.approx(1.0, abs=0.01)


def test_mc_haar_check_pins_the_sign():
    phi = EntryBump(((1.5, 0.3), (0.2, (1 + 0.06) / 1.5)), width=0.1)
    rep = mc_haar_check(phi, 200_000, seed=1)
    assert rep.passed
    assert rep.z_score_alt > 10
    wrong = mc_haar_check(phi, 200_000, seed=1, exponent=1)
    assert not wrong.passed


def test_mc_haar_check_support_error():
    with pytest.raises(SupportError):
        mc_haar_check(EntryBump(((0.05, 0.0), (0.0, 20.0)), width=0.1), 100, seed=0)


def test_mc_haar_check_deterministic():
    a = mc_haar_check(EntryBump(), 10_000, seed=5)
    b = mc_haar_check(EntryBump(), 10_000, seed=5)
    assert a == b
