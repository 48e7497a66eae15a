"""Translates of horospherical pieces and their convergence to the Haar mean.

For a bump f on H (coordinates Y in M_{m,n}) and a lattice function psi,

    I(g, z) = integral over Y of f(Y) psi(g u_Y z) dY.

Test functions are lattice-intrinsic: primitive Siegel transforms of
radial profiles (exact Haar mean via the Siegel formula) and profiles of
the first minimum. Two evaluators are provided. ``I_integral`` is a
tensor midpoint rule certified by grid doubling; it resolves the
integrand only while the translate is mildly distorted. ``I_integral_unfolded``
exchanges the Siegel sum with the integral and integrates each primitive
vector's contribution over its own (thin) support, which stays accurate
for large flow times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import optimize

from .bumps import BumpFunction
from .core import ConeVector, Dims, make_g_t, make_g_vt, make_u_Y, make_u_Y_batch
from .errors import AccuracyError, InsufficientDataError, InvalidArgumentError
from .lattice import (Lattice, RadialFunction, lambda1_batch, lattice_points_in_box,
                      primitive_mask, short_vectors, shortest_vector, siegel_mean,
                      siegel_transform)

CERTIFY_RTOL = 0.005
# absolute floor for the certificate when the integral is ~0
CERTIFY_ATOL = 1e-12


@dataclass(frozen=True)
class TestFunction:
    """psi on the space of lattices.

    kind == "siegel": psi(L) = scale * sum of radial(|v|) over primitive v.
    kind == "lambda1": psi(L) = scale * profile(lambda_1(L)).
    """

    __test__ = False  # keep pytest from collecting this class

    kind: str
    radial: RadialFunction | None = None
    profile: Callable | None = None
    scale: float = 1.0
    constant_value: float | None = None

    def __post_init__(self):
        if self.kind not in ("siegel", "lambda1"):
            raise InvalidArgumentError(f"unknown test function kind {self.kind!r}")
        if self.kind == "siegel" and self.radial is None:
            raise InvalidArgumentError("siegel test function needs a radial profile")
        if self.kind == "lambda1" and self.profile is None:
            raise InvalidArgumentError("lambda1 test function needs a profile")

    @classmethod
    def siegel(cls, radial: RadialFunction, scale: float = 1.0) -> "TestFunction":
        return cls("siegel", radial=radial, scale=scale)

    @classmethod
    def lambda1_profile(cls, F: Callable, scale: float = 1.0) -> "TestFunction":
        return cls("lambda1", profile=F, scale=scale)

    @classmethod
    def constant(cls, value: float) -> "TestFunction":
        return cls("lambda1", profile=lambda x: np.full(np.shape(x), 1.0), scale=value,
                   constant_value=float(value))

    def scaled(self, factor: float) -> "TestFunction":
        cv = None if self.constant_value is None else self.constant_value * factor
        return TestFunction(self.kind, self.radial, self.profile, self.scale * factor, cv)

    def mean(self, k: int) -> float | None:
        """Exact Haar mean when one is available."""
        if self.kind == "siegel":
            return self.scale * siegel_mean(self.radial, k)
        return self.constant_value


def eval_test_function(psi: TestFunction, L: Lattice) -> float:
    if psi.kind == "siegel":
        return psi.scale * siegel_transform(L, psi.radial)
    return psi.scale * float(psi.profile(shortest_vector(L).lambda1))


def eval_test_function_batch(psi: TestFunction, bases) -> np.ndarray:
    """psi on a stack of lattices given by (P, k, k) column bases."""
    bases = np.asarray(bases, dtype=float)
    if psi.kind == "lambda1":
        return psi.scale * np.asarray(psi.profile(lambda1_batch(bases)), dtype=float)
    if psi.scale == 0:
        return np.zeros(len(bases))
    out = np.empty(len(bases))
    R = psi.radial.support_radius * (1 + 1e-12)
    for i, b in enumerate(bases):
        coeffs, vecs = short_vectors(Lattice(b), R)
        prim = primitive_mask(coeffs)
        out[i] = np.sum(psi.radial(np.linalg.norm(vecs[prim], axis=1))) if prim.any() else 0.0
    return psi.scale * out


def infer_dims(N: int, k: int) -> Dims:
    sols = [Dims(m, k - m) for m in range(1, k) if m * (k - m) == N]
    if not sols:
        raise InvalidArgumentError(f"no split m + n = {k} with m n = {N}")
    if len(sols) > 1 and sols[0].m != sols[0].n:
        raise InvalidArgumentError(f"ambiguous split for k={k}, mn={N}; pass dims")
    return sols[0]


@dataclass
class QuadResult:
    value: float
    method: str
    points_per_axis: int
    history: list = field(default_factory=list)
    stderr: float | None = None


# Offset of the nodes inside each cell. An irrational offset keeps nodes off
# rationals p/q, where u_Y z has the short vector (0, q) and a strongly
# expanded translate sits deep in the cusp at every node.
_NODE_SHIFT = (math.sqrt(5.0) - 1.0) / 2.0


def _midpoint(f: BumpFunction, psi, g, z, dims, n):
    axis = -f.r + (np.arange(n) + _NODE_SHIFT) * (2 * f.r / n)
    Ys = np.stack(np.meshgrid(*([axis] * dims.mn), indexing="ij"), axis=-1).reshape(-1, dims.mn)
    w = f(Ys) * (2 * f.r / n) ** dims.mn
    keep = w > 0
    mats = g @ make_u_Y_batch(dims, Ys[keep]) @ z.basis
    vals = eval_test_function_batch(psi, mats)
    # fixed-order pairwise summation keeps the result reproducible
    return float(np.sum(w[keep] * vals))


def I_integral_certified(f: BumpFunction, psi: TestFunction, g, z: Lattice,
                         quad_points_per_axis: int = 16, dims: Dims | None = None,
                         max_points_per_axis: int | None = None, rtol: float = CERTIFY_RTOL,
                         mc_samples: int = 20000, seed: int = 0) -> QuadResult:
    """Midpoint tensor quadrature, doubled until three successive values agree within rtol.

    For mn >= 4 a Monte Carlo estimate with a standard error is used instead.
    """
    if quad_points_per_axis < 8:
        raise InvalidArgumentError("quad_points_per_axis must be >= 8")
    dims = dims or infer_dims(f.N, z.k)
    if dims.mn != f.N:
        raise InvalidArgumentError("bump dimension must equal mn")
    g = np.asarray(g, dtype=float)
    if dims.mn >= 4:
        rng = np.random.default_rng(seed)
        Ys = rng.uniform(-f.r, f.r, size=(mc_samples, dims.mn))
        w = f(Ys) * (2 * f.r) ** dims.mn
        vals = eval_test_function_batch(psi, g @ make_u_Y_batch(dims, Ys) @ z.basis)
        terms = w * vals
        return QuadResult(float(terms.mean()), "mc", 0, [],
                          float(terms.std(ddof=1) / math.sqrt(mc_samples)))
    if max_points_per_axis is None:
        max_points_per_axis = {1: 2 ** 12, 2: 2 ** 7, 3: 2 ** 5}[dims.mn]
    n = quad_points_per_axis
    history = [(n, _midpoint(f, psi, g, z, dims, n))]
    while True:
        n *= 2
        if n > max_points_per_axis:
            raise AccuracyError(
                f"midpoint rule not certified up to {max_points_per_axis} points per axis",
                [v for _, v in history])
        history.append((n, _midpoint(f, psi, g, z, dims, n)))
        # two consecutive doublings must agree: rational midpoint nodes can
        # alias with the cusp excursions of a strongly expanded translate
        vals = [v for _, v in history[-3:]]
        if len(vals) == 3 and all(abs(b - a) <= max(rtol * abs(b), CERTIFY_ATOL)
                                  for a, b in zip(vals, vals[1:])):
            return QuadResult(vals[-1], "midpoint", n, history)


def I_integral(f: BumpFunction, psi: TestFunction, g, z: Lattice,
               quad_points_per_axis: int = 16, **kwargs) -> float:
    return I_integral_certified(f, psi, g, z, quad_points_per_axis, **kwargs).value


# ---------------------------------------------------------------------------
# Unfolded evaluation for Siegel test functions


@lru_cache(maxsize=None)
def _gauss01(nodes):
    gx, gw = np.polynomial.legendre.leggauss(nodes)
    return (gx + 1) / 2, gw / 2


def _radial_nodes(rho, cuts, nodes):
    """Gauss-Legendre nodes on [0, rho] split at the radii in ``cuts``.

    rho has shape (T,), cuts shape (T, q) (already clipped to [0, rho]).
    Returns radii and weights of shape (T, (q + 1) * nodes).
    """
    u, wu = _gauss01(nodes)
    edges = np.concatenate([np.zeros((len(rho), 1)), np.sort(cuts, axis=1), rho[:, None]], axis=1)
    a, b = edges[:, :-1, None], edges[:, 1:, None]
    r = (a + (b - a) * u).reshape(len(rho), -1)
    w = ((b - a) * wu).reshape(len(rho), -1)
    return r, w


def _directions(m, angles):
    if m == 1:
        return np.array([[1.0], [-1.0]]), np.ones(2)
    theta = 2 * np.pi * np.arange(angles) / angles
    return np.stack([np.cos(theta), np.sin(theta)], axis=1), np.full(angles, 2 * np.pi / angles)


def _terms(f, rad, top, vk, c, et_top, cuts_r2, nodes, angles):
    """Contribution of each vector (top, vk) with vk != 0, before the Jacobian."""
    m = top.shape[1]
    R = rad.support_radius
    dirs, dir_w = _directions(m, angles)
    rho = np.sqrt(R * R - c)
    cuts = np.minimum(np.sqrt(np.clip(cuts_r2[None, :] - c[:, None], 0.0, None)), rho[:, None])
    r, w = _radial_nodes(rho, cuts, nodes)
    prof = rad(np.sqrt(r * r + c[:, None]))
    if m == 2:
        w = w * r
    # x = r * direction; Y_i = (x_i / e^{t_i} - v_i) / v_k
    x = r[:, :, None, None] * dirs[None, None, :, :]
    Y = (x / et_top - top[:, None, None, :]) / vk[:, None, None, None]
    fv = f(Y.reshape(-1, m)).reshape(Y.shape[:3])
    inner = fv @ dir_w
    return np.sum(inner * w * prof, axis=1) / np.abs(vk) ** m


def _moment_terms(f, rad, top, vk, c, et_top, cuts_r2, nodes):
    """Second-order expansion of :func:`_terms` for terms with a tiny Y-image.

    With Y(x) = Y0 + D x, D = diag(e^{-t_i}) / v_k, odd moments of the
    radial weight vanish, so
    integral f(Y) F = f(Y0) M0 + (1/2) sum_i d_ii f(Y0) D_i^2 M2 + O(|D|^4),
    where M0 = integral of F and M2 = integral of x_1^2 F over the disc.
    """
    m = top.shape[1]
    R = rad.support_radius
    rho = np.sqrt(R * R - c)
    cuts = np.minimum(np.sqrt(np.clip(cuts_r2[None, :] - c[:, None], 0.0, None)), rho[:, None])
    r, w = _radial_nodes(rho, cuts, nodes)
    prof = rad(np.sqrt(r * r + c[:, None])) * w
    if m == 1:
        M0 = 2 * np.sum(prof, axis=1)
        M2 = 2 * np.sum(prof * r * r, axis=1)
    else:
        M0 = 2 * np.pi * np.sum(prof * r, axis=1)
        M2 = np.pi * np.sum(prof * r ** 3, axis=1)
    Y0 = -top / vk[:, None]
    val = f(Y0) * M0
    for i in range(m):
        alpha = tuple(2 if j == i else 0 for j in range(m))
        val = val + 0.5 * f.partial(alpha, Y0) * (1.0 / (et_top[i] * vk)) ** 2 * M2
    return val / np.abs(vk) ** m


# ratios of Y-spread to bump radius below which a term uses the coarse
# quadrature rule, resp. the moment expansion
_COARSE_SPREAD = 0.05
_COARSE_RULE = (6, 8)
_MOMENT_SPREAD = 0.01


def _cone_candidates(z: Lattice, m: int, vk_max: float, slope: float, offset: float,
                     chunk_points: int = 2_000_000):
    """Yield (coeffs, vectors) covering every v in z with |v_k| <= vk_max and
    |v_top| <= slope |v_k| + offset, for a basis whose last row is (0, ..., 0, b).

    Slabs of fixed last coefficient are enumerated in the top coordinates
    only, so the cost follows the volume of the cone rather than a box.
    """
    B = z.basis
    A, beta, b = B[:m, :m], B[:m, m], B[m, m]
    Ainv = np.linalg.inv(A)
    stretch = np.linalg.norm(Ainv, 2)
    shift = -Ainv @ beta
    K = int(math.floor(vk_max / abs(b) + 1e-12))
    cks = np.arange(-K, K + 1)
    cks = cks[np.argsort(np.abs(cks), kind="stable")]
    i = 0
    while i < len(cks):
        h = int(math.ceil((slope * abs(cks[i] * b) + offset) * stretch)) + 1
        grid = np.arange(-h, h + 1)
        offs = np.stack(np.meshgrid(*([grid] * m), indexing="ij"), axis=-1).reshape(-1, m)
        # every slab in this chunk needs at most the radius of its outermost member
        span = 1
        while (i + span < len(cks) and abs(cks[i + span]) == abs(cks[i])) or \
                (i + span < len(cks) and (span + 1) * len(offs) <= chunk_points
                 and (slope * abs(cks[i + span] * b) + offset) * stretch + 1 <= h):
            span += 1
        ck = cks[i:i + span]
        centers = np.rint(np.outer(ck, shift)).astype(np.int64)
        ctop = (centers[:, None, :] + offs[None, :, :]).reshape(-1, m)
        coeffs = np.column_stack([ctop, np.repeat(ck, len(offs))])
        yield coeffs, coeffs @ B.T
        i += span


def I_integral_unfolded(f: BumpFunction, psi: TestFunction, t: ConeVector, z: Lattice,
                        nodes: int = 16, angles: int = 24, budget: int = 10**8) -> QuadResult:
    """I(g_t, z) for a Siegel test function, summed over primitive vectors of z.

    For n = 1 and each primitive v = (v_top, v_k) the substitution
    x_i = e^{t_i}(v_i + Y_i v_k) turns the contribution of v into an
    integral over the ball |x|^2 <= R^2 - e^{-2 t_k} v_k^2 of
    f(Y(x)) profile(sqrt(|x|^2 + e^{-2 t_k} v_k^2)), with Jacobian
    prod_i e^{-t_i} / |v_k|^m. Radial Gauss-Legendre pieces split at the
    profile's breakpoints; for m = 2 the angle uses the periodic
    trapezoid rule. Terms whose Y-image is small compared with the bump
    (large |v_k|) use a coarser rule, and the smallest ones a second-order
    moment expansion of f.
    """
    dims = t.dims
    if psi.kind != "siegel":
        raise InvalidArgumentError("unfolded evaluation needs a Siegel test function")
    if dims.n != 1 or dims.m not in (1, 2):
        raise InvalidArgumentError("unfolded evaluation supports n = 1 and m in {1, 2}")
    if f.N != dims.mn:
        raise InvalidArgumentError("bump dimension must equal mn")
    m, k = dims.m, dims.k
    tt = t.as_array()
    et_top, et_k = np.exp(tt[:m]), math.exp(tt[m])
    rad = psi.radial
    R = rad.support_radius
    cuts_r2 = np.array(sorted(b * b for b in rad.breakpoints if 0 < b < R))
    jac0 = float(np.prod(1.0 / et_top))
    x_reach = R * math.sqrt(np.sum(1.0 / et_top ** 2))

    half = np.empty(k)
    half[m] = R * et_k
    half[:m] = f.r * R * et_k + R / et_top
    if np.allclose(z.basis[m, :m], 0.0, atol=0.0):
        blocks = _cone_candidates(z, m, R * et_k, f.r, x_reach)
    else:
        blocks = lattice_points_in_box(z, half, budget)
    total = 0.0
    for coeffs, vecs in blocks:
        vk = vecs[:, m]
        top = vecs[:, :m]
        c = (vk / et_k) ** 2
        # v_top must come within R e^{-t_i} of -Y v_k for some |Y| < r
        reach = f.r * np.abs(vk) + x_reach
        keep = (c < R * R) & (np.linalg.norm(top, axis=1) < reach) & np.any(coeffs != 0, axis=1)
        if not keep.any():
            continue
        coeffs, top, vk, c = coeffs[keep], top[keep], vk[keep], c[keep]
        prim = primitive_mask(coeffs)
        if not prim.any():
            continue
        top, vk, c = top[prim], vk[prim], c[prim]
        flat = np.abs(vk) < 1e-12
        if flat.any():
            # v_k = 0: the translate does not depend on Y; f integrates to 1
            total += float(np.sum(rad(np.linalg.norm(top[flat] * et_top, axis=1))))
            top, vk, c = top[~flat], vk[~flat], c[~flat]
        spread = x_reach / np.abs(vk) / f.r
        small = spread < _MOMENT_SPREAD
        coarse = ~small & (spread < _COARSE_SPREAD)
        full = ~small & ~coarse
        for sel, nd, ang in ((full, nodes, angles),
                             (coarse, min(nodes, _COARSE_RULE[0]), min(angles, _COARSE_RULE[1]))):
            if sel.any():
                total += jac0 * float(np.sum(_terms(f, rad, top[sel], vk[sel], c[sel], et_top,
                                                    cuts_r2, nd, ang)))
        if small.any():
            total += jac0 * float(np.sum(_moment_terms(f, rad, top[small], vk[small], c[small],
                                                       et_top, cuts_r2, nodes)))
    return QuadResult(psi.scale * total, "unfolded", nodes)


# ---------------------------------------------------------------------------
# Errors, rates and bound bookkeeping


@dataclass
class EquidistPoint:
    t: tuple
    floor_t: float
    value: float
    target: float
    error: float
    method: str
    refinement: int


def equidist_point(f: BumpFunction, psi: TestFunction, t: ConeVector, z: Lattice,
                   method: str = "unfolded", quad_points_per_axis: int = 16,
                   max_points_per_axis: int | None = None, nodes: int = 16) -> EquidistPoint:
    target = psi.mean(z.k)
    if target is None:
        raise InvalidArgumentError("test function has no exact mean")
    if method == "unfolded" and psi.kind == "siegel":
        res = I_integral_unfolded(f, psi, t, z, nodes=nodes)
    elif method in ("midpoint", "unfolded"):
        res = I_integral_certified(f, psi, make_g_vt(t.dims, t), z, quad_points_per_axis,
                                   dims=t.dims, max_points_per_axis=max_points_per_axis)
    else:
        raise InvalidArgumentError(f"unknown quadrature method {method!r}")
    return EquidistPoint(t.t, t.floor, res.value, target, abs(res.value - target), res.method,
                         res.points_per_axis)


def equidist_error(f: BumpFunction, psi: TestFunction, t: ConeVector, z: Lattice,
                   quad: str = "unfolded", **kwargs) -> float:
    """|I(g_t, z) - (integral of f) * (Haar mean of psi)|, with integral of f equal to 1."""
    return equidist_point(f, psi, t, z, method=quad, **kwargs).error


@dataclass
class DecayFit:
    points: list
    gamma_hat: float
    log_C_hat: float
    residual: float  # root-mean-square of log-residuals

    @property
    def C_hat(self) -> float:
        return math.exp(self.log_C_hat)


def decay_fit(points) -> DecayFit:
    """Least squares of log(err) on s; err ~ C e^{-gamma s}."""
    pts = [(float(s), float(e)) for s, e in points if e > 0]
    if len(pts) < 3:
        raise InsufficientDataError(f"need >= 3 points with positive error, got {len(pts)}")
    s = np.array([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    A = np.column_stack([s, np.ones_like(s)])
    (slope, icpt), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ np.array([slope, icpt])
    return DecayFit(pts, float(-slope), float(icpt), float(np.sqrt(np.mean(resid ** 2))))


def horospherical_dimension(dims: Dims) -> int:
    """Dimension of H^- H^0: m^2 + mn + n^2 - 1."""
    return dims.m ** 2 + dims.m * dims.n + dims.n ** 2 - 1


def gamma_tilde(gamma: float, ell: int, dims: Dims) -> float:
    """gamma / (1 + mnk(k-1)(2 ell + N/2)) with N = m^2 + mn + n^2 - 1."""
    if not gamma > 0 or ell < 1:
        raise InvalidArgumentError("need gamma > 0 and ell >= 1")
    N = horospherical_dimension(dims)
    k = dims.k
    return gamma / (1 + dims.mn * k * (k - 1) * (2 * ell + N / 2))


def rhs_bound_thm_2_3(E: float, r: float, f_l1: float, f_sobolev: float, ell: int, N: int,
                      gamma: float, t: float) -> float:
    """E (r |f|_1 + r^{-(2 ell + N/2)} |f|_ell e^{-gamma t})."""
    return E * (r * f_l1 + r ** (-(2 * ell + N / 2)) * f_sobolev * math.exp(-gamma * t))


def balancing_radius(E: float, f_l1: float, f_sobolev: float, ell: int, N: int, gamma: float,
                     t: float) -> float:
    """r minimising rhs_bound_thm_2_3 at fixed t (numerical 1-D search in log r)."""
    res = optimize.minimize_scalar(
        lambda lr: math.log(rhs_bound_thm_2_3(E, math.exp(lr), f_l1, f_sobolev, ell, N, gamma, t)),
        bounds=(-60.0, 5.0), method="bounded", options={"xatol": 1e-10})
    return math.exp(res.x)


def eps_of_section_4(c: float, beta: float, t: float, k: int) -> float:
    """((2/c) e^{-beta t})^{1/k}: the Mahler threshold paired with r = e^{-beta t}."""
    if not (c > 0 and beta > 0 and t > 0):
        raise InvalidArgumentError("c, beta and t must be positive")
    return ((2.0 / c) * math.exp(-beta * t)) ** (1.0 / k)


# entries of Y0 and the flow time of a for the perturbed base points
_BASE_OFFSETS = ((0.0, 0.0), (0.17, 0.1), (-0.23, 0.2), (0.31, -0.15))


def base_points(dims: Dims, count: int = 4, eps: float = 0.3) -> list:
    """Z^k followed by u_{Y0} a Z^k for a short fixed list of (Y0, a).

    Y0 has all entries equal to the first offset, a = g_s with s the second.
    Every returned lattice lies in K_eps; a violation raises.
    """
    if not 1 <= count <= len(_BASE_OFFSETS):
        raise InvalidArgumentError(f"count must be in 1..{len(_BASE_OFFSETS)}")
    out = []
    for y, s in _BASE_OFFSETS[:count]:
        g = make_u_Y(dims, np.full((dims.m, dims.n), y)) @ make_g_t(dims, s)
        L = Lattice(g)
        if shortest_vector(L).lambda1 < eps:
            raise InvalidArgumentError(f"base point {(y, s)} leaves K_{eps}")
        out.append(L)
    return out
