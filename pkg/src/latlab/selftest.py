"""Reduced-size invariant suite behind ``latlab selftest``.

Every check is deterministic in the seed; details are printed with a
fixed number of digits so repeated runs give identical bytes.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .bumps import BumpFunction, sobolev_norm
from .core import (ConeVector, Dims, EntryBump, conj_phi, decompose_local, make_g_t, make_g_vt,
                   make_u_Y, mc_haar_check, modular_delta, split_vt)
from .equidistribution import (TestFunction, decay_fit, equidist_point, gamma_tilde,
                               I_integral_certified, rhs_bound_thm_2_3)
from .exterior import fit_growth, random_unit_multivectors, wedge_matrix
from .lattice import (Lattice, indicator_ball, shortest_vector, siegel_mean, siegel_transform,
                      smoothed_ball)
from .nondivergence import (AffineLatticeMap, Ball, is_C_alpha_good, nondivergence_fractions)


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    detail: str


def _g(x) -> str:
    return "%.6g" % x


def _random_sl(rng, k):
    while True:
        A = rng.normal(size=(k, k))
        d = np.linalg.det(A)
        if abs(d) > 0.1:
            if d < 0:
                A[0] *= -1
            return A / abs(d) ** (1.0 / k)


def check_det(seed, fault):
    dims = Dims(2, 1)
    g = make_g_t(dims, 2.0)
    if fault == "det":
        g = g.copy()
        g[0, 0] *= 1 + 1e-6
    err = abs(np.linalg.det(g) - 1)
    return err <= 1e-12, err, f"|det g_t - 1| = {_g(err)}"


def check_split(seed, fault):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        m, n = rng.integers(1, 3, size=2)
        dims = Dims(int(m), int(n))
        top = rng.uniform(0.1, 3, m)
        low = rng.uniform(0.1, 3, n)
        low *= top.sum() / low.sum()
        t = ConeVector(dims, tuple(top) + tuple(low))
        s, u = split_vt(t)
        G = make_g_vt(dims, t)
        worst = max(worst, np.abs(make_g_t(dims, s) @ make_g_vt(dims, u) - G).max() / np.abs(G).max())
    return worst <= 1e-12, worst, f"max relative error {_g(worst)}"


def check_conj(seed, fault):
    rng = np.random.default_rng(seed)
    dims = Dims(2, 2)
    worst = 0.0
    for _ in range(50):
        t = ConeVector(dims, (1.0, 2.0, 1.5, 1.5))
        Y = rng.normal(size=(2, 2))
        G = make_g_vt(dims, t)
        lhs = make_u_Y(dims, conj_phi(t, Y))
        rhs = G @ make_u_Y(dims, Y) @ np.linalg.inv(G)
        worst = max(worst, np.abs(lhs - rhs).max() / np.abs(rhs).max())
    return worst <= 1e-12, worst, f"max relative error {_g(worst)}"


def check_decompose(seed, fault):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(100):
        dims = Dims(2, 1)
        g = _random_sl(rng, 3)
        dec = decompose_local(g, dims)
        worst = max(worst, np.linalg.norm(dec.product() - g) / np.linalg.norm(g))
    return worst <= 1e-10, worst, f"max relative error {_g(worst)}"


def check_delta_multiplicative(seed, fault):
    rng = np.random.default_rng(seed)
    dims = Dims(1, 2)
    worst = 0.0
    for _ in range(50):
        a = rng.uniform(0.5, 2)
        D1 = _random_sl(rng, 2) / math.sqrt(a)
        b = rng.uniform(0.5, 2)
        D2 = _random_sl(rng, 2) / math.sqrt(b)
        h1 = np.block([[np.array([[a]]), np.zeros((1, 2))], [np.zeros((2, 1)), D1]])
        h2 = np.block([[np.array([[b]]), np.zeros((1, 2))], [np.zeros((2, 1)), D2]])
        lhs = modular_delta(h1 @ h2, dims)
        rhs = modular_delta(h1, dims) * modular_delta(h2, dims)
        worst = max(worst, abs(lhs - rhs) / rhs)
    return worst <= 1e-10, worst, f"max relative error {_g(worst)}"


def check_haar(seed, fault):
    phi = EntryBump(((1.5, 0.3), (0.2, (1 + 0.06) / 1.5)), width=0.1)
    rep = mc_haar_check(phi, 200_000, seed)
    return rep.passed, rep.z_score, f"z = {_g(rep.z_score)} (opposite sign z = {_g(rep.z_score_alt)})"


def check_svp(seed, fault):
    rng = np.random.default_rng(seed)
    bad = 0
    for i in range(60):
        k = 2 + i % 2
        L = Lattice(_random_sl(rng, k))
        c = np.array(list(itertools.product(range(-4, 5), repeat=k)), dtype=float)
        c = c[np.any(c != 0, axis=1)]
        brute = np.linalg.norm(c @ L.basis.T, axis=1).min()
        bad += abs(shortest_vector(L).lambda1 - brute) > 1e-9 * brute
    return bad == 0, bad, f"{bad} mismatches in 60 lattices"


def check_siegel(seed, fault):
    v = siegel_transform(Lattice.standard(2), indicator_ball(1.0))
    mean = siegel_mean(smoothed_ball(), 2)
    err = abs(mean - 6 / math.pi)
    return v == 4 and err < 1e-9, err, f"S(Z^2) = {_g(v)}, mean error {_g(err)}"


def check_wedge(seed, fault):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(50):
        a, b = _random_sl(rng, 4), _random_sl(rng, 4)
        for j in (1, 2, 3):
            lhs = wedge_matrix(a @ b, j)
            worst = max(worst, np.abs(lhs - wedge_matrix(a, j) @ wedge_matrix(b, j)).max()
                        / np.abs(lhs).max())
    return worst <= 1e-10, worst, f"max relative error {_g(worst)}"


def check_growth(seed, fault):
    dims = Dims(2, 1)
    ws = random_unit_multivectors(3, [1, 2], 40, seed)
    fit = fit_growth(dims, [(1, 2, 3), (2, 1, 3), (1.4, 1.6, 3)], [0.5, 1.0, 1.5, 2.0], ws)
    return fit.alpha >= 0.5 and fit.bound_holds, fit.alpha, f"alpha = {_g(fit.alpha)}"


def check_nondiv_oracle(seed, fault):
    phi = AffineLatticeMap.horospherical(Dims(1, 1), np.diag([10.0, 0.1]))
    frac, se = nondivergence_fractions(phi, Ball((0.5,), 0.5), [0.1, 0.2], 20_000, seed)
    target = 2 * math.sqrt(0.0003)
    z = abs(frac[1] - target) / se[1]
    return frac[0] == 0 and z <= 3, z, f"fraction {_g(frac[1])} vs {_g(target)}, z = {_g(z)}"


def check_goodness(seed, fault):
    rep = is_C_alpha_good(lambda x: x[:, 0] ** 2, Ball((0.0,), 1.0), 2.0, 0.5, 50, seed)
    return rep.passed, rep.worst_ratio, f"worst ratio {_g(rep.worst_ratio)}"


def check_sobolev(seed, fault):
    vals = [r ** 1.5 * sobolev_norm(BumpFunction(1, r), 1) for r in (0.5, 0.25, 0.125)]
    spread = max(vals) / min(vals) - 1
    return spread < 0.05, spread, f"relative spread {_g(spread)}"


def check_formulas(seed, fault):
    g = gamma_tilde(1.0, 1, Dims(1, 1))
    rhs = rhs_bound_thm_2_3(1.0, 0.1, 1.0, 10.0, 1, 2, 1.0, 10.0)
    ok = abs(g - 1 / 7) < 1e-15 and abs(rhs - (0.1 + 1e4 * math.exp(-10))) < 1e-15
    return ok, rhs, f"gamma_tilde = {_g(g)}, rhs = {_g(rhs)}"


def check_decay_fit(seed, fault):
    s = np.arange(1, 11)
    fit = decay_fit(list(zip(s, 5 * np.exp(-0.3 * s))))
    err = abs(fit.gamma_hat - 0.3) + abs(fit.C_hat - 5)
    return err < 1e-12, err, f"gamma_hat = {_g(fit.gamma_hat)}, C_hat = {_g(fit.C_hat)}"


def check_equidist(seed, fault):
    dims = Dims(1, 1)
    f = BumpFunction(1, 0.3)
    psi = TestFunction.siegel(smoothed_ball())
    t = ConeVector(dims, (2.0, 2.0))
    unfolded = equidist_point(f, psi, t, Lattice.standard(2)).value
    mid = I_integral_certified(f, psi, make_g_vt(dims, t), Lattice.standard(2), 16).value
    far = equidist_point(f, psi, ConeVector(dims, (5.0, 5.0)), Lattice.standard(2)).error
    agree = abs(unfolded - mid) / abs(unfolded)
    return agree < 0.005 and far < 1e-3, agree, \
        f"unfolded vs midpoint {_g(agree)}, error at floor 5 = {_g(far)}"


def check_determinism(seed, fault):
    phi = AffineLatticeMap.horospherical(Dims(1, 1), np.diag([10.0, 0.1]))
    a = nondivergence_fractions(phi, Ball((0.5,), 0.5), [0.15, 0.2], 5000, seed)
    b = nondivergence_fractions(phi, Ball((0.5,), 0.5), [0.15, 0.2], 5000, seed)
    same = all(np.array_equal(x, y) for x, y in zip(a, b))
    return same, float(same), "identical" if same else "differs"


CHECKS = [
    ("g_t determinant", check_det),
    ("split of cone vectors", check_split),
    ("conjugation formula", check_conj),
    ("local decomposition", check_decompose),
    ("modular function multiplicative", check_delta_multiplicative),
    ("Haar product formula", check_haar),
    ("shortest vector vs brute force", check_svp),
    ("Siegel transform and mean", check_siegel),
    ("wedge functoriality", check_wedge),
    ("sup-norm growth", check_growth),
    ("nondivergence oracle", check_nondiv_oracle),
    ("(C, alpha)-good x^2", check_goodness),
    ("Sobolev scaling", check_sobolev),
    ("formula evaluators", check_formulas),
    ("decay fit", check_decay_fit),
    ("equidistribution", check_equidist),
    ("determinism", check_determinism),
]


def run_selftest(seed: int = 0, fault: str | None = None) -> list:
    out = []
    for name, fn in CHECKS:
        try:
            ok, value, detail = fn(seed, fault)
        except Exception as exc:  # a crashing check is a failed check
            ok, value, detail = False, float("nan"), f"{type(exc).__name__}: {exc}"
        out.append(CheckResult(name, bool(ok), float(value), detail))
    return out
