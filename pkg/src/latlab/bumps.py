"""Smooth bump functions on R^N and their (2, l)-Sobolev norms.

The bump family is theta_r(x) = c r^{-N} exp(-1 / (1 - |x/r|^2)) on the
open ball of radius r, normalised to unit mass. Partial derivatives of
the family are exact (symbolic, compiled once per multi-index); any other
compactly supported function is differentiated by central differences.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
import sympy
from scipy import integrate

from .errors import AccuracyError, InvalidArgumentError
from .lattice import sphere_area

MAX_ELL = 3


def multi_indices(N: int, ell: int):
    """All multi-indices in N variables of total order <= ell."""
    out = []
    for order in range(ell + 1):
        for combo in itertools.combinations_with_replacement(range(N), order):
            alpha = [0] * N
            for i in combo:
                alpha[i] += 1
            out.append(tuple(alpha))
    return out


@lru_cache(maxsize=None)
def _unit_bump_mass(N: int) -> float:
    radial, _ = integrate.quad(lambda r: math.exp(-1.0 / (1.0 - r * r)) * r ** (N - 1), 0.0, 1.0,
                               epsabs=1e-15, epsrel=1e-13, limit=200)
    return sphere_area(N) * radial


@lru_cache(maxsize=None)
def _unit_partial(N: int, alpha: tuple) -> Callable:
    xs = sympy.symbols(f"x0:{N}", real=True)
    expr = sympy.exp(-1 / (1 - sum(x ** 2 for x in xs)))
    for i, a in enumerate(alpha):
        if a:
            expr = sympy.diff(expr, xs[i], a)
    return sympy.lambdify(xs, sympy.simplify(expr), "numpy")


def _as_points(X, N):
    X = np.asarray(X, dtype=float)
    if N == 1 and X.ndim == 1:
        X = X[:, None]
    if X.shape[-1] != N:
        raise InvalidArgumentError(f"expected points in R^{N}, got shape {X.shape}")
    return X


@dataclass(frozen=True)
class BumpFunction:
    N: int
    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise InvalidArgumentError(f"bump radius must be positive, got {self.r!r}")
        if self.N < 1:
            raise InvalidArgumentError("dimension must be >= 1")

    @property
    def c(self) -> float:
        """Normalisation constant in front of exp(-1/(1 - |x/r|^2))."""
        return 1.0 / (_unit_bump_mass(self.N) * self.r ** self.N)

    @property
    def extent(self) -> float:
        return self.r

    def __call__(self, X) -> np.ndarray:
        return self.partial((0,) * self.N, X)

    def partial(self, alpha, X) -> np.ndarray:
        X = _as_points(X, self.N)
        U = X / self.r
        inside = np.sum(U * U, axis=-1) < 1.0
        out = np.zeros(X.shape[:-1])
        if np.any(inside):
            vals = _unit_partial(self.N, tuple(alpha))(*U[inside].T)
            out[inside] = vals
        return self.c * self.r ** (-sum(alpha)) * out


@dataclass(frozen=True)
class GridFunction:
    """A compactly supported function on R^N known only through point values.

    ``func`` maps points (P, N) to values (P,); the support lies in the
    cube [-extent, extent]^N.
    """

    func: Callable
    N: int
    extent: float

    def __call__(self, X) -> np.ndarray:
        return np.asarray(self.func(_as_points(X, self.N)), dtype=float)


def _grid(N, extent, n):
    axis = np.linspace(-extent, extent, n)
    mesh = np.meshgrid(*([axis] * N), indexing="ij")
    return axis[1] - axis[0], np.stack(mesh, axis=-1)


def _partials_on_grid(f, ell, n):
    """Map multi-index -> array of the partial derivative on an n^N grid."""
    h, mesh = _grid(f.N, f.extent, n)
    pts = mesh.reshape(-1, f.N)
    shape = mesh.shape[:-1]
    alphas = multi_indices(f.N, ell)
    if isinstance(f, BumpFunction):
        return h, {a: f.partial(a, pts).reshape(shape) for a in alphas}
    base = f(pts).reshape(shape)
    out = {}
    for a in alphas:
        arr = base
        for axis, order in enumerate(a):
            for _ in range(order):
                arr = np.gradient(arr, h, axis=axis, edge_order=2)
        out[a] = arr
    return h, out


def _sobolev_at(f, ell, n):
    h, parts = _partials_on_grid(f, ell, n)
    total = sum(float(np.sum(p * p)) for p in parts.values())
    return math.sqrt(total * h ** f.N)


def sobolev_norm(f, ell: int, points_per_axis: int | None = None, rtol: float = 0.01) -> float:
    """(2, ell)-Sobolev norm: sqrt of the summed squared L2 norms of all partials of order <= ell.

    Computed with the trapezoid rule on a tensor grid and certified by one
    grid doubling; disagreement above ``rtol`` raises AccuracyError.
    """
    if not 0 <= ell <= MAX_ELL:
        raise InvalidArgumentError(f"ell must be in 0..{MAX_ELL}")
    n = points_per_axis or {1: 801, 2: 161, 3: 49}.get(f.N, 25)
    coarse = _sobolev_at(f, ell, n)
    fine = _sobolev_at(f, ell, 2 * n - 1)
    if abs(fine - coarse) > rtol * abs(fine):
        raise AccuracyError(f"Sobolev quadrature not converged: {coarse:.6g} vs {fine:.6g}",
                            (coarse, fine))
    return fine


def c_ell_norm(f, ell: int, points_per_axis: int | None = None) -> float:
    """max over |alpha| <= ell of sup |d^alpha f| (sampled on a grid)."""
    n = points_per_axis or {1: 2001, 2: 201, 3: 49}.get(f.N, 25)
    _, parts = _partials_on_grid(f, ell, n)
    return max(float(np.abs(p).max()) for p in parts.values())


def l1_norm(f, points_per_axis: int | None = None) -> float:
    n = points_per_axis or {1: 2001, 2: 201, 3: 49}.get(f.N, 25)
    h, mesh = _grid(f.N, f.extent, n)
    return float(np.sum(np.abs(f(mesh.reshape(-1, f.N)))) * h ** f.N)


def product_function(f1, f2) -> GridFunction:
    """x -> f1(x) f2(x) on a common R^N."""
    if f1.N != f2.N:
        raise InvalidArgumentError("factors must live on the same R^N")
    return GridFunction(lambda X: f1(X) * f2(X), f1.N, min(f1.extent, f2.extent))


def tensor_function(f1, f2) -> GridFunction:
    """(x1, x2) -> f1(x1) f2(x2) on R^{N1 + N2}."""
    N1 = f1.N

    def func(X):
        return f1(X[:, :N1]) * f2(X[:, N1:])

    return GridFunction(func, f1.N + f2.N, max(f1.extent, f2.extent))


def contracted_product(f, theta, scales, shift) -> GridFunction:
    """y -> f(scales * y + shift) theta(y).

    With scales = e^{-(u_i + u_{m+j})} (entrywise, flattened) this is the
    function obtained by precomposing f with the inverse conjugation by
    g_u followed by translation by h, cut off by theta.
    """
    scales = np.asarray(scales, dtype=float).ravel()
    shift = np.asarray(shift, dtype=float).ravel()
    if np.any(scales > 1.0 + 1e-15):
        raise InvalidArgumentError("scales must be contracting (<= 1)")

    def func(X):
        return f(X * scales + shift) * theta(X)

    return GridFunction(func, theta.N, theta.extent)
