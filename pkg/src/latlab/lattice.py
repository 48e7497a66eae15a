"""Geometry of numbers for unimodular lattices in R^k.

A lattice is stored by a basis whose *columns* generate it. Shortest
vectors come from LLL reduction followed by Fincke-Pohst enumeration;
the same enumerator drives the Siegel transform.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special

from .core import check_group_element, dist_to_identity_batch
from .errors import BudgetError, InvalidArgumentError, PreconditionError, RankError

NODE_BUDGET = 10**7
LLL_DELTA = 0.99


@dataclass(frozen=True, eq=False)
class Lattice:
    basis: np.ndarray

    def __post_init__(self):
        b = check_group_element(self.basis).copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @classmethod
    def standard(cls, k: int) -> "Lattice":
        return cls(np.eye(k))

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    def gram(self) -> np.ndarray:
        return self.basis.T @ self.basis

    def transformed(self, g) -> "Lattice":
        return Lattice(np.asarray(g, dtype=float) @ self.basis)


@dataclass(frozen=True)
class ShortVectorResult:
    vector: np.ndarray
    coeffs: np.ndarray
    lambda1: float
    radius: float
    nodes: int


# ---------------------------------------------------------------------------
# Reduction


def _lll_columns(B: np.ndarray, delta: float = LLL_DELTA):
    """LLL on the columns of B. Returns (reduced basis, integer U) with B U = reduced."""
    B = np.array(B, dtype=float)
    k = B.shape[1]
    U = np.eye(k, dtype=np.int64)
    if np.linalg.matrix_rank(B) < k:
        raise RankError("basis columns are numerically dependent")

    def gso(B):
        Q, R = np.linalg.qr(B)
        d = np.diag(R)
        mu = (R / d[:, None]).T
        return d ** 2, mu

    bstar2, mu = gso(B)
    i = 1
    guard = 0
    while i < k:
        guard += 1
        if guard > 100000:
            raise RankError("LLL did not terminate; basis is too ill-conditioned")
        for j in range(i - 1, -1, -1):
            q = round(mu[i, j])
            if q:
                B[:, i] -= q * B[:, j]
                U[:, i] -= q * U[:, j]
                mu[i, : j + 1] -= q * mu[j, : j + 1]
        if bstar2[i] >= (delta - mu[i, i - 1] ** 2) * bstar2[i - 1]:
            i += 1
        else:
            B[:, [i - 1, i]] = B[:, [i, i - 1]]
            U[:, [i - 1, i]] = U[:, [i, i - 1]]
            bstar2, mu = gso(B)
            i = max(i - 1, 1)
    if round(np.linalg.det(U)) < 0:
        # keep orientation so the reduced basis is still in SL(k)
        B[:, -1] *= -1
        U[:, -1] *= -1
    return B, U


def lll_reduce(L: Lattice, delta: float = LLL_DELTA) -> Lattice:
    """LLL-reduced basis of the same lattice (columns), parameter ``delta``."""
    return Lattice(_lll_columns(L.basis, delta)[0])


def lll_transform(L: Lattice, delta: float = LLL_DELTA):
    return _lll_columns(L.basis, delta)


# ---------------------------------------------------------------------------
# Enumeration


def _enumerate(R: np.ndarray, radius: float, budget: int):
    """All nonzero integer x with |R x| <= radius, R upper triangular.

    Depth-first over the last coordinates, innermost coordinate
    vectorised. Returns (array of x, node count).
    """
    k = R.shape[0]
    r2 = radius * radius
    out = []
    x = np.zeros(k, dtype=np.int64)
    nodes = 0

    def level(i, partial):
        nonlocal nodes
        # center of coordinate i given x[i+1:]
        c = -np.dot(R[i, i + 1:], x[i + 1:]) / R[i, i]
        rem = r2 - partial
        if rem < 0:
            return
        half = math.sqrt(rem) / abs(R[i, i])
        lo, hi = math.ceil(c - half), math.floor(c + half)
        if hi < lo:
            return
        nodes += hi - lo + 1
        if nodes > budget:
            raise BudgetError(f"enumeration exceeded {budget} nodes")
        if i == 0:
            xs = np.arange(lo, hi + 1, dtype=np.int64)
            block = np.repeat(x[None, :], len(xs), axis=0)
            block[:, 0] = xs
            out.append(block)
            return
        for v in range(lo, hi + 1):
            x[i] = v
            level(i - 1, partial + (R[i, i] * (v - c)) ** 2)
        x[i] = 0

    level(k - 1, 0.0)
    if not out:
        return np.zeros((0, k), dtype=np.int64), nodes
    xs = np.concatenate(out)
    xs = xs[np.any(xs != 0, axis=1)]
    # rounding at the boundary may admit points marginally outside
    norms = np.linalg.norm(xs @ R.T, axis=1)
    return xs[norms <= radius], nodes


def _enumerate_blocks(R: np.ndarray, radius: float, budget: int):
    """Generator form of :func:`_enumerate`: yields blocks of integer x (zero included)."""
    k = R.shape[0]
    r2 = radius * radius
    x = np.zeros(k, dtype=np.int64)
    nodes = 0
    stack = [(k - 1, 0.0, None)]
    # explicit stack of (level, partial norm, remaining values iterator)
    while stack:
        i, partial, it = stack[-1]
        if it is None:
            c = -np.dot(R[i, i + 1:], x[i + 1:]) / R[i, i]
            rem = r2 - partial
            half = math.sqrt(rem) / abs(R[i, i]) if rem >= 0 else -1.0
            lo, hi = math.ceil(c - half), math.floor(c + half)
            if hi < lo:
                stack.pop()
                continue
            nodes += hi - lo + 1
            if nodes > budget:
                raise BudgetError(f"enumeration exceeded {budget} nodes")
            if i == 0:
                block = np.repeat(x[None, :], hi - lo + 1, axis=0)
                block[:, 0] = np.arange(lo, hi + 1)
                stack.pop()
                yield block
                continue
            it = (iter(range(lo, hi + 1)), c)
            stack[-1] = (i, partial, it)
        itr, c = it
        v = next(itr, None)
        if v is None:
            x[i] = 0
            stack.pop()
            continue
        x[i] = v
        stack.append((i - 1, partial + (R[i, i] * (v - c)) ** 2, None))


def lattice_points_in_box(L: Lattice, half_widths, budget: int = 10**8):
    """Yield (coeffs, vectors) blocks covering every v in L with |v_i| <= half_widths[i].

    Enumerates the ellipsoid circumscribing the box, so blocks also contain
    points outside it (and possibly 0); callers filter.
    """
    D = np.diag(1.0 / np.asarray(half_widths, dtype=float))
    scaled = D @ L.basis
    Bred, U = _lll_columns(scaled)
    _, R = np.linalg.qr(Bred)
    for xs in _enumerate_blocks(R, math.sqrt(L.k) * (1 + 1e-12), budget):
        coeffs = xs @ U.T
        yield coeffs, coeffs @ L.basis.T


def short_vectors(L: Lattice, radius: float, budget: int = NODE_BUDGET):
    """Coefficient vectors (in L's basis) of all nonzero v in L with |v| <= radius.

    Returns ``(coeffs, vectors)`` with ``vectors = coeffs @ basis.T``.
    """
    if radius <= 0:
        k = L.k
        return np.zeros((0, k), dtype=np.int64), np.zeros((0, k))
    Bred, U = _lll_columns(L.basis)
    _, R = np.linalg.qr(Bred)
    xs, _ = _enumerate(R, radius, budget)
    coeffs = xs @ U.T
    return coeffs, coeffs @ L.basis.T


def shortest_vector(L: Lattice, budget: int = NODE_BUDGET) -> ShortVectorResult:
    """Exact shortest nonzero vector; the LLL first column certifies the search radius."""
    Bred, U = _lll_columns(L.basis)
    _, R = np.linalg.qr(Bred)
    radius = float(np.linalg.norm(Bred[:, 0])) * (1 + 1e-12)
    try:
        xs, nodes = _enumerate(R, radius, budget)
    except BudgetError as exc:
        raise BudgetError(str(exc), best=float(np.linalg.norm(Bred[:, 0]))) from None
    vecs = xs @ Bred.T
    norms = np.linalg.norm(vecs, axis=1)
    # deterministic tie-break: smallest norm, then lexicographic coefficients
    order = np.lexsort(tuple(xs[:, ::-1].T) + (np.round(norms, 12),))
    best = order[0]
    coeffs = U @ xs[best]
    return ShortVectorResult(vector=L.basis @ coeffs, coeffs=coeffs,
                             lambda1=float(norms[best]), radius=radius, nodes=nodes)


def _gauss_reduce_batch(B: np.ndarray) -> np.ndarray:
    """Vectorised Lagrange-Gauss reduction of a stack of 2x2 column bases."""
    b1 = B[:, :, 0].copy()
    b2 = B[:, :, 1].copy()
    for _ in range(200):
        n1 = np.einsum("ij,ij->i", b1, b1)
        n2 = np.einsum("ij,ij->i", b2, b2)
        swap = n2 < n1
        b1[swap], b2[swap] = b2[swap].copy(), b1[swap].copy()
        n1 = np.minimum(n1, n2)
        mu = np.rint(np.einsum("ij,ij->i", b1, b2) / n1)
        if not np.any(mu):
            break
        b2 -= mu[:, None] * b1
    else:
        raise RankError("Gauss reduction did not converge")
    return np.minimum(np.linalg.norm(b1, axis=1), np.linalg.norm(b2, axis=1))


def lambda1_batch(bases) -> np.ndarray:
    """First minima of a stack of lattices given as (P, k, k) column bases."""
    bases = np.asarray(bases, dtype=float)
    if bases.shape[1:] == (2, 2):
        return _gauss_reduce_batch(bases)
    return np.array([shortest_vector(Lattice(b)).lambda1 for b in bases])


def in_K_eps(L: Lattice, eps: float) -> bool:
    if not eps > 0:
        raise InvalidArgumentError(f"eps must be positive, got {eps!r}")
    return shortest_vector(L).lambda1 >= eps


# ---------------------------------------------------------------------------
# Injectivity radius


@dataclass
class InjectivityReport:
    eps: float
    c: float
    entry_bound: int
    checked: int
    min_dist: float
    argmin: np.ndarray
    ratio: float  # min_dist / eps**k

    @property
    def passed(self) -> bool:
        return self.min_dist >= self.c * self.eps ** len(self.argmin)


def _integer_sl(k: int, bound: int, budget: int = NODE_BUDGET) -> np.ndarray:
    vals = np.arange(-bound, bound + 1)
    total = len(vals) ** (k * k)
    if total > budget:
        raise BudgetError(f"{total} candidate matrices exceed the budget {budget}")
    grids = np.array(list(itertools.product(vals, repeat=k * k)), dtype=float).reshape(-1, k, k)
    det = np.rint(np.linalg.det(grids))
    keep = det == 1
    keep &= np.any(grids != np.eye(k), axis=(1, 2))
    return grids[keep]


def injectivity_radius_check(g, eps: float, entry_bound: int, c: float) -> InjectivityReport:
    """Smallest dist(g gamma g^-1, e) over nontrivial gamma in SL_k(Z) with bounded entries."""
    g = check_group_element(g)
    k = len(g)
    if not in_K_eps(Lattice(g), eps):
        raise PreconditionError(f"g Z^{k} is not in K_eps for eps={eps}")
    gammas = _integer_sl(k, entry_bound)
    conj = g @ gammas @ np.linalg.inv(g)
    d = dist_to_identity_batch(conj)
    i = int(np.argmin(d))
    return InjectivityReport(eps=eps, c=c, entry_bound=entry_bound, checked=len(gammas),
                             min_dist=float(d[i]), argmin=gammas[i].astype(int),
                             ratio=float(d[i] / eps ** k))


# ---------------------------------------------------------------------------
# Radial functions, Siegel transform and its mean


@dataclass(frozen=True)
class RadialFunction:
    """f(x) = profile(|x|), vanishing for |x| > support_radius.

    ``breakpoints`` lists radii where the profile is not smooth; quadrature
    splits there.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    support_radius: float
    breakpoints: tuple = field(default=())
    name: str = "radial"

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.support_radius, self.profile(r), 0.0)

    def scaled(self, factor: float) -> "RadialFunction":
        prof = self.profile
        return RadialFunction(lambda r: factor * prof(r), self.support_radius,
                              self.breakpoints, f"{factor:g}*{self.name}")


def indicator_ball(radius: float = 1.0) -> RadialFunction:
    """Indicator of the closed ball of the given radius."""
    return RadialFunction(lambda r: np.where(r <= radius, 1.0, 0.0), radius, (radius,),
                          f"ball({radius:g})")


def _smoothstep(x):
    x = np.clip(x, 0.0, 1.0)
    return x * x * (3.0 - 2.0 * x)


def smoothed_ball(radius: float = 1.0, width: float = 0.05) -> RadialFunction:
    """Ball indicator with a C^1 ramp in |x|^2 over radius*(1 -+ width).

    The ramp is antisymmetric about |x| = radius in the variable |x|^2, so
    in the plane the integral equals the area of the sharp disc exactly.
    """
    lo2 = radius ** 2 * (1 - 2 * width)
    hi2 = radius ** 2 * (1 + 2 * width)

    def prof(r):
        return 1.0 - _smoothstep((np.asarray(r) ** 2 - lo2) / (hi2 - lo2))

    return RadialFunction(prof, math.sqrt(hi2), (math.sqrt(lo2), math.sqrt(hi2)),
                          f"smoothed_ball({radius:g},{width:g})")


def primitive_mask(coeffs: np.ndarray) -> np.ndarray:
    if len(coeffs) == 0:
        return np.zeros(0, dtype=bool)
    return np.gcd.reduce(np.abs(coeffs), axis=1) == 1


def siegel_transform(L: Lattice, f: RadialFunction, budget: int = NODE_BUDGET) -> float:
    """Sum of f(|v|) over primitive v in L (v and -v both counted)."""
    if not np.isfinite(f.support_radius):
        raise InvalidArgumentError("support radius must be finite")
    coeffs, vecs = short_vectors(L, f.support_radius * (1 + 1e-12), budget)
    prim = primitive_mask(coeffs)
    if not prim.any():
        return 0.0
    return float(np.sum(f(np.linalg.norm(vecs[prim], axis=1))))


_BERNOULLI = (1 / 6, -1 / 30, 1 / 42, -1 / 30, 5 / 66, -691 / 2730)


def zeta(k: int, terms: int = 32) -> float:
    """Riemann zeta at an integer k >= 2: partial sum plus Euler-Maclaurin tail."""
    if k < 2:
        raise InvalidArgumentError("zeta(k) needs k >= 2")
    N = terms
    n = np.arange(1, N, dtype=float)
    s = float(np.sum(n ** -k))
    s += N ** (1 - k) / (k - 1) + 0.5 * N ** -k
    rising = float(k)  # k (k+1) ... (k + 2j - 2)
    fact = 2.0
    for j, b in enumerate(_BERNOULLI, start=1):
        s += b / fact * rising * N ** (-k - 2 * j + 1)
        rising *= (k + 2 * j - 1) * (k + 2 * j)
        fact *= (2 * j + 1) * (2 * j + 2)
    return s


def sphere_area(k: int) -> float:
    """Surface area of the unit sphere in R^k."""
    return 2 * math.pi ** (k / 2) / special.gamma(k / 2)


def radial_integral(f: RadialFunction, k: int) -> float:
    """Integral of f(|x|) over R^k by 1-D radial quadrature."""
    pts = sorted(p for p in f.breakpoints if 0 < p < f.support_radius)
    edges = [0.0, *pts, f.support_radius]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(lambda r: float(f(r)) * r ** (k - 1), a, b,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        total += val
    if not np.isfinite(total):
        raise InvalidArgumentError("profile is not integrable")
    return sphere_area(k) * total


def siegel_mean(f: RadialFunction, k: int) -> float:
    """Haar mean over the space of lattices of the primitive Siegel transform of f."""
    return radial_integral(f, k) / zeta(k)
