"""Exterior powers of R^k in the minor basis.

Coordinates of a j-vector are indexed by the j-element subsets of
{0, ..., k-1} in lexicographic order (``itertools.combinations``). The
induced action of g on the j-th power is the matrix of j x j minors,
``(wedge^j g)[S, T] = det g[S, T]``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import ConeVector, Dims, make_g_vt, make_u_Y_batch
from .errors import BudgetError, InvalidArgumentError

ENUM_BUDGET = 10**7


@lru_cache(maxsize=None)
def subsets(k: int, j: int) -> tuple:
    return tuple(itertools.combinations(range(k), j))


@dataclass(frozen=True, eq=False)
class MultiVector:
    degree: int
    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)
        if not np.all(np.isfinite(c)):
            raise InvalidArgumentError("multivector has non-finite coordinates")

    @property
    def k(self) -> int:
        # smallest k with C(k, j) == len(coords)
        k = self.degree
        while math.comb(k, self.degree) < len(self.coords):
            k += 1
        if math.comb(k, self.degree) != len(self.coords):
            raise InvalidArgumentError("coordinate length is not a binomial coefficient")
        return k

    @classmethod
    def basis(cls, k: int, subset) -> "MultiVector":
        subset = tuple(sorted(subset))
        idx = subsets(k, len(subset)).index(subset)
        c = np.zeros(math.comb(k, len(subset)))
        c[idx] = 1.0
        return cls(len(subset), c)

    def __mul__(self, scalar):
        return MultiVector(self.degree, self.coords * scalar)

    __rmul__ = __mul__


def wedge(*vectors) -> MultiVector:
    """v_1 ^ ... ^ v_j: the j x j minors of the k x j matrix [v_1 ... v_j]."""
    V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
    k, j = V.shape
    rows = np.array(subsets(k, j))
    return MultiVector(j, np.linalg.det(V[rows]) if j > 0 else np.ones(1))


def wedge_matrix(g, j: int) -> np.ndarray:
    """Matrix of wedge^j g, or a stack of them if ``g`` has shape (P, k, k)."""
    g = np.asarray(g, dtype=float)
    k = g.shape[-1]
    if not 1 <= j <= k:
        raise InvalidArgumentError(f"degree {j} out of range for k={k}")
    S = np.array(subsets(k, j))
    # g[..., S[:, None, :, None], S[None, :, None, :]] has shape (..., C, C, j, j)
    sub = g[..., S[:, None, :, None], S[None, :, None, :]]
    return np.linalg.det(sub)


def wedge_action(g, w: MultiVector) -> MultiVector:
    g = np.asarray(g, dtype=float)
    M = wedge_matrix(g, w.degree)
    if M.shape[-1] != len(w.coords):
        raise InvalidArgumentError("multivector degree does not match the group element")
    return MultiVector(w.degree, M @ w.coords)


def mv_norm(w: MultiVector) -> float:
    return float(np.linalg.norm(w.coords))


def ball_grid(dims: Dims, radius: float, grid_per_axis: int) -> np.ndarray:
    """Uniform grid (endpoints included) on the sup-norm ball of M_{m,n}, shape (P, m, n)."""
    if grid_per_axis < 2:
        raise InvalidArgumentError("grid_per_axis must be >= 2")
    axis = np.linspace(-radius, radius, grid_per_axis)
    pts = np.stack(np.meshgrid(*([axis] * dims.mn), indexing="ij"), axis=-1)
    return pts.reshape(-1, dims.m, dims.n)


def sup_norm_over_ball(t: ConeVector, g, w: MultiVector, ball_radius: float,
                       grid_per_axis: int) -> float:
    """max over a grid of Y in the ball of |wedge^j(g_t u_Y g) w|.

    Grids with grid_per_axis - 1 dividing each other are nested, so the
    value is monotone under that refinement.
    """
    dims = t.dims
    Ys = ball_grid(dims, ball_radius, grid_per_axis)
    gw = wedge_matrix(g, w.degree) @ w.coords
    a = np.diag(wedge_matrix(make_g_vt(dims, t), w.degree))
    vals = wedge_matrix(make_u_Y_batch(dims, Ys), w.degree) @ gw
    return float(np.max(np.linalg.norm(vals * a, axis=-1)))


def enumerate_integer_multivectors(k: int, j: int, max_norm: float,
                                   budget: int = ENUM_BUDGET) -> list:
    """All nonzero integer coordinate arrays in degree j with norm <= max_norm.

    Not restricted to decomposable j-vectors.
    """
    C = math.comb(k, j)
    R = int(math.floor(max_norm + 1e-12))
    if C * (2 * R + 1) ** C > budget:
        raise BudgetError(f"{(2 * R + 1) ** C} candidates in degree {j} exceed the budget")
    return [MultiVector(j, c) for c in integer_points(C, max_norm)]


def integer_points(dim: int, max_norm: float) -> np.ndarray:
    """Nonzero integer points of Z^dim in the closed Euclidean ball, as a (P, dim) array."""
    R = int(math.floor(max_norm + 1e-12))
    axis = np.arange(-R, R + 1)
    pts = np.stack(np.meshgrid(*([axis] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    norms2 = np.sum(pts * pts, axis=1)
    keep = (norms2 > 0) & (norms2 <= max_norm ** 2 + 1e-9)
    return pts[keep].astype(float)


@dataclass
class DeltaReport:
    value: float
    degree: int
    argmin: np.ndarray
    max_norm: float
    # below this, every w with |w| > max_norm is provably at least as long
    certified_threshold: float

    @property
    def certified(self) -> bool:
        return self.value <= self.certified_threshold


def delta_L_report(g, max_norm: float, budget: int = ENUM_BUDGET) -> DeltaReport:
    g = np.asarray(g, dtype=float)
    k = g.shape[0]
    best = None
    threshold = np.inf
    for j in range(1, k):
        C = math.comb(k, j)
        R = int(math.floor(max_norm + 1e-12))
        if (2 * R + 1) ** C > budget:
            raise BudgetError(f"degree {j} enumeration exceeds the budget")
        M = wedge_matrix(g, j)
        smin = np.linalg.svd(M, compute_uv=False).min()
        threshold = min(threshold, smin * max_norm)
        W = integer_points(C, max_norm)
        norms = np.linalg.norm(W @ M.T, axis=1)
        i = int(np.argmin(norms))
        if best is None or norms[i] < best[0]:
            best = (float(norms[i]), j, W[i])
    return DeltaReport(best[0], best[1], best[2], max_norm, float(threshold))


def delta_L(g, max_norm: float) -> float:
    """min of |wedge^j g w| over j = 1..k-1 and enumerated integer w != 0."""
    return delta_L_report(g, max_norm).value


# ---------------------------------------------------------------------------
# Growth of sup-norms along rays of the cone


@dataclass
class GrowthFit:
    alpha: float
    b: float
    slopes: np.ndarray  # per (w, ray)
    floors: np.ndarray
    log_ratios: np.ndarray  # shape (n_w, n_rays, n_floors)

    @property
    def bound_holds(self) -> bool:
        lhs = self.log_ratios
        rhs = np.log(self.b) + self.alpha * self.floors
        return bool(np.all(lhs >= rhs[None, None, :] - 1e-12))


def random_unit_multivectors(k: int, degrees, count: int, seed: int) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        j = degrees[i % len(degrees)]
        c = rng.normal(size=math.comb(k, j))
        out.append(MultiVector(j, c / np.linalg.norm(c)))
    return out


def fit_growth(dims: Dims, rays, floors, ws, g=None, ball_radius: float = 1.0,
               grid_per_axis: int = 9, normalize: bool = True) -> GrowthFit:
    """Fit log sup|g_t u_Y g w| against floor(t) for every (g, w, ray).

    ``g`` may be a single matrix or a sequence of them (a compact family of
    base points). With ``normalize`` the target is log sup - log|w|; without
    it the bound is taken independent of w, as for integer w.

    alpha is the smallest fitted slope; b is then the largest constant
    with b e^{alpha floor(t)} below every measured value.
    """
    gs = [np.eye(dims.k)] if g is None else np.asarray(g, dtype=float).reshape(-1, dims.k, dims.k)
    floors = np.asarray(floors, dtype=float)
    Ys = ball_grid(dims, ball_radius, grid_per_axis)
    us = make_u_Y_batch(dims, Ys)
    degrees = sorted({w.degree for w in ws})
    wedge_u = {j: wedge_matrix(us, j) for j in degrees}
    rows = []
    for gg in gs:
        wedge_g = {j: wedge_matrix(gg, j) for j in degrees}
        rows.extend((w, wedge_g[w.degree] @ w.coords) for w in ws)
    out = np.empty((len(rows), len(rays), len(floors)))
    for r, ray in enumerate(rays):
        for f, fl in enumerate(floors):
            t = ConeVector.along_ray(dims, ray, fl)
            gt = make_g_vt(dims, t)
            diag = {j: np.diag(wedge_matrix(gt, j)) for j in degrees}
            for i, (w, gw) in enumerate(rows):
                vals = (wedge_u[w.degree] @ gw) * diag[w.degree]
                out[i, r, f] = np.log(np.max(np.linalg.norm(vals, axis=-1)))
                if normalize:
                    out[i, r, f] -= np.log(mv_norm(w))
    X = floors - floors.mean()
    slopes = np.einsum("wrf,f->wr", out - out.mean(axis=2, keepdims=True), X) / np.sum(X * X)
    alpha = float(slopes.min())
    log_b = float(np.min(out - alpha * floors[None, None, :]))
    return GrowthFit(alpha, float(np.exp(log_b)), slopes, floors, out)
