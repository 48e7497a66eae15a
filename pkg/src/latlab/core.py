"""Matrix and group layer on G = SL_k(R).

Group elements are plain ``numpy`` arrays of shape ``(k, k)``; the
constructors here validate the determinant so downstream code can assume
unimodularity. Coordinates on the horospherical subgroup H are ``m x n``
arrays ``Y`` with ``u_Y = [[I_m, Y], [0, I_n]]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DecompositionError, InvalidArgumentError, SupportError

DET_TOL = 1e-9

# Sign of the exponent in Delta(h0) = |det Ad(h0) on Lie(H~)|**HAAR_EXPONENT.
# Pinned by mc_haar_check: the opposite sign fails the product formula by
# hundreds of standard errors for bumps centred away from e.
HAAR_EXPONENT = -1


@dataclass(frozen=True)
class Dims:
    m: int
    n: int

    def __post_init__(self):
        if int(self.m) != self.m or int(self.n) != self.n or self.m < 1 or self.n < 1:
            raise InvalidArgumentError(f"need integers m, n >= 1, got m={self.m}, n={self.n}")

    @property
    def k(self) -> int:
        return self.m + self.n

    @property
    def mn(self) -> int:
        return self.m * self.n


@dataclass(frozen=True)
class ConeVector:
    """A point of the open cone: positive entries, first m sum to the last n."""

    dims: Dims
    t: tuple

    def __post_init__(self):
        t = tuple(float(x) for x in self.t)
        object.__setattr__(self, "t", t)
        if len(t) != self.dims.k:
            raise InvalidArgumentError(f"cone vector needs {self.dims.k} entries, got {len(t)}")
        if not all(np.isfinite(t)):
            raise InvalidArgumentError("cone vector entries must be finite")
        if min(t) <= 0:
            raise InvalidArgumentError(f"cone vector entries must be > 0, got {t}")
        m = self.dims.m
        gap = abs(sum(t[:m]) - sum(t[m:]))
        if gap > 1e-12 * sum(abs(x) for x in t):
            raise InvalidArgumentError(f"unbalanced cone vector {t} (imbalance {gap:.3g})")

    @classmethod
    def along_ray(cls, dims: Dims, direction, floor: float) -> "ConeVector":
        """Scale ``direction`` so that the smallest entry equals ``floor``."""
        d = np.asarray(direction, dtype=float)
        return cls(dims, tuple(d * (floor / d.min())))

    def as_array(self) -> np.ndarray:
        return np.array(self.t)

    @property
    def floor(self) -> float:
        return min(self.t)


def check_group_element(g, tol: float = DET_TOL) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise InvalidArgumentError(f"group element must be square, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise InvalidArgumentError("group element has non-finite entries")
    det = np.linalg.det(g)
    if abs(det - 1.0) > tol:
        raise InvalidArgumentError(f"determinant {det!r} is not 1")
    return g


def _check_Y(dims: Dims, Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 0 and dims.mn == 1:
        Y = Y.reshape(1, 1)
    if Y.shape != (dims.m, dims.n):
        raise InvalidArgumentError(f"Y must have shape {(dims.m, dims.n)}, got {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise InvalidArgumentError("Y has non-finite entries")
    return Y


def make_g_t(dims: Dims, t: float) -> np.ndarray:
    """Diagonal flow diag(e^{t/m} (m times), e^{-t/n} (n times)).

    The lower block carries e^{-t/n}; a positive exponent there would
    leave the determinant at e^{2t} instead of 1.
    """
    if not np.isfinite(t):
        raise InvalidArgumentError(f"flow time must be finite, got {t!r}")
    d = np.concatenate([np.full(dims.m, t / dims.m), np.full(dims.n, -t / dims.n)])
    return np.diag(np.exp(d))


def make_g_vt(dims: Dims, t: ConeVector) -> np.ndarray:
    if not isinstance(t, ConeVector):
        t = ConeVector(dims, tuple(t))
    if t.dims != dims:
        raise InvalidArgumentError(f"cone vector dims {t.dims} do not match {dims}")
    tt = t.as_array()
    return np.diag(np.exp(np.concatenate([tt[: dims.m], -tt[dims.m:]])))


def make_u_Y(dims: Dims, Y) -> np.ndarray:
    Y = _check_Y(dims, Y)
    u = np.eye(dims.k)
    u[: dims.m, dims.m:] = Y
    return u


def make_u_Y_batch(dims: Dims, Ys) -> np.ndarray:
    """Stack of u_Y for ``Ys`` of shape (P, m, n) (or (P, mn))."""
    Ys = np.asarray(Ys, dtype=float).reshape(-1, dims.m, dims.n)
    u = np.broadcast_to(np.eye(dims.k), (len(Ys), dims.k, dims.k)).copy()
    u[:, : dims.m, dims.m:] = Ys
    return u


def floor_vt(t: ConeVector) -> float:
    return t.floor


def split_vt(t: ConeVector) -> tuple[float, ConeVector]:
    """Split g_vt = g_s g_u with s = floor(t)/2 and u still in the cone."""
    dims = t.dims
    s = t.floor / 2.0
    shift = np.concatenate([np.full(dims.m, s / dims.m), np.full(dims.n, s / dims.n)])
    return s, ConeVector(dims, tuple(t.as_array() - shift))


def conj_phi(t: ConeVector, Y, inverse: bool = False) -> np.ndarray:
    """Coordinates of g_t u_Y g_t^{-1} (or of g_t^{-1} u_Y g_t when ``inverse``)."""
    dims = t.dims
    Y = _check_Y(dims, Y)
    tt = t.as_array()
    rates = tt[: dims.m, None] + tt[None, dims.m:]
    return Y * np.exp(-rates if inverse else rates)


def dist_G(g, h) -> float:
    """Right-invariant distance surrogate max(|g h^-1 - I|_F, |h g^-1 - I|_F)."""
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    eye = np.eye(len(g))
    a = np.linalg.norm(g @ np.linalg.inv(h) - eye)
    b = np.linalg.norm(h @ np.linalg.inv(g) - eye)
    return float(max(a, b))


def dist_to_identity_batch(gs) -> np.ndarray:
    """dist_G(g, e) for a stack of matrices of shape (P, k, k)."""
    gs = np.asarray(gs, dtype=float)
    eye = np.eye(gs.shape[-1])
    a = np.linalg.norm(gs - eye, axis=(-2, -1))
    b = np.linalg.norm(np.linalg.inv(gs) - eye, axis=(-2, -1))
    return np.maximum(a, b)


class TripleDecomposition(NamedTuple):
    h_minus: np.ndarray
    h_zero: np.ndarray
    h: np.ndarray
    condition: float

    def product(self) -> np.ndarray:
        return self.h_minus @ self.h_zero @ self.h


def decompose_local(g, dims: Dims) -> TripleDecomposition:
    """Block LDU factorisation g = h_minus h_zero h.

    With g = [[A, B], [C, D]]: h_minus has lower block C A^-1,
    h_zero = diag(A, D - C A^-1 B) and h = u_Y with Y = A^-1 B.
    """
    g = np.asarray(g, dtype=float)
    m, k = dims.m, dims.k
    if g.shape != (k, k):
        raise InvalidArgumentError(f"expected a {k}x{k} matrix, got {g.shape}")
    A, B = g[:m, :m], g[:m, m:]
    C, D = g[m:, :m], g[m:, m:]
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > 1e12:
        raise DecompositionError(f"top-left {m}x{m} block is singular (condition {cond:.3g})")
    Ainv = np.linalg.inv(A)
    h_minus = np.eye(k)
    h_minus[m:, :m] = C @ Ainv
    h_zero = np.zeros((k, k))
    h_zero[:m, :m] = A
    h_zero[m:, m:] = D - C @ Ainv @ B
    h = np.eye(k)
    h[:m, m:] = Ainv @ B
    return TripleDecomposition(h_minus, h_zero, h, cond)


def modular_delta(h_zero, dims: Dims, exponent: int = HAAR_EXPONENT) -> float:
    """Modular function of H~ = H^- H^0 evaluated at a block-diagonal h0.

    Ad(h0) acts on the lower-left block by C -> D C A^-1 and trivially (in
    determinant) on Lie(H^0), so the Jacobian is det(A)^-n det(D)^m.
    """
    h_zero = np.asarray(h_zero, dtype=float)
    m = dims.m
    if h_zero.shape != (dims.k, dims.k):
        raise InvalidArgumentError(f"expected a {dims.k}x{dims.k} matrix")
    off = max(np.abs(h_zero[:m, m:]).max(), np.abs(h_zero[m:, :m]).max())
    if off > 1e-12 * max(1.0, np.abs(h_zero).max()):
        raise InvalidArgumentError("h_zero is not block-diagonal")
    A, D = h_zero[:m, :m], h_zero[m:, m:]
    jac = np.linalg.det(np.kron(np.linalg.inv(A).T, D))
    return float(abs(jac) ** exponent)


# ---------------------------------------------------------------------------
# Monte Carlo check of the Haar product formula (m = n = 1).


@dataclass(frozen=True)
class EntryBump:
    """Product of 1-D bumps in the entries a, b, c of g = [[a, b], [c, d]].

    On SL_2(R) near the identity (a, b, c) are coordinates, so this is a
    compactly supported function on G.
    """

    center: tuple = ((1.0, 0.0), (0.0, 1.0))
    width: float = 0.1
    scale: float = 1.0

    def __call__(self, gs) -> np.ndarray:
        gs = np.asarray(gs, dtype=float).reshape(-1, 2, 2)
        c = np.asarray(self.center, dtype=float)
        out = np.full(len(gs), float(self.scale))
        for i, j in ((0, 0), (0, 1), (1, 0)):
            out *= _bump1((gs[:, i, j] - c[i, j]) / self.width)
        return out

    def box(self):
        c = np.asarray(self.center, dtype=float)
        w = self.width
        return [(c[i, j] - w, c[i, j] + w) for i, j in ((0, 0), (0, 1), (1, 0))]


def _bump1(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


@dataclass
class HaarCheckReport:
    lhs: float
    lhs_se: float
    rhs: float
    rhs_se: float
    rhs_alt: float
    rhs_alt_se: float
    exponent: int
    z_score: float
    z_score_alt: float
    scalar: float
    samples: int
    seed: int

    @property
    def passed(self) -> bool:
        return self.z_score <= 3.0

    @property
    def relative_discrepancy(self) -> float:
        if self.lhs == 0 and self.rhs == 0:
            return 0.0
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), abs(self.rhs))


def _mean_se(values, volume):
    n = len(values)
    return volume * float(values.mean()), volume * float(values.std(ddof=1)) / np.sqrt(n)


def mc_haar_check(phi: EntryBump, samples: int, seed: int,
                  exponent: int = HAAR_EXPONENT) -> HaarCheckReport:
    """Estimate both sides of the Haar product formula on SL_2(R).

    Left side: Haar measure da db dc / |a| in entry coordinates. Right
    side: Lebesgue in the lower unipotent coordinate and in Y, Haar dtau
    on h0 = diag(e^tau, e^-tau), weighted by the modular function. The two
    estimators use independent samples and independent coordinates.
    """
    if samples < 2:
        raise InvalidArgumentError("need at least two samples")
    rng = np.random.default_rng(seed)
    (a_lo, a_hi), (b_lo, b_hi), (c_lo, c_hi) = phi.box()
    if a_lo <= 0:
        raise SupportError("support of phi reaches a <= 0, where the decomposition fails")

    # Left side in entry coordinates.
    a = rng.uniform(a_lo, a_hi, samples)
    b = rng.uniform(b_lo, b_hi, samples)
    c = rng.uniform(c_lo, c_hi, samples)
    g = np.empty((samples, 2, 2))
    g[:, 0, 0], g[:, 0, 1], g[:, 1, 0] = a, b, c
    g[:, 1, 1] = (1.0 + b * c) / a
    vol = (a_hi - a_lo) * (b_hi - b_lo) * (c_hi - c_lo)
    lhs, lhs_se = _mean_se(phi(g) / np.abs(a), vol)

    # Right side in (tau, x, y): g = [[1,0],[x,1]] diag(e^tau, e^-tau) [[1,y],[0,1]].
    corners_a = np.array([a_lo, a_hi])
    tau_lo, tau_hi = np.log(corners_a)
    y_vals = np.array([b_lo, b_hi])[:, None] / corners_a[None, :]
    x_vals = np.array([c_lo, c_hi])[:, None] / corners_a[None, :]
    y_lo, y_hi = y_vals.min(), y_vals.max()
    x_lo, x_hi = x_vals.min(), x_vals.max()
    tau = rng.uniform(tau_lo, tau_hi, samples)
    x = rng.uniform(x_lo, x_hi, samples)
    y = rng.uniform(y_lo, y_hi, samples)
    ea = np.exp(tau)
    h = np.empty((samples, 2, 2))
    h[:, 0, 0] = ea
    h[:, 0, 1] = ea * y
    h[:, 1, 0] = x * ea
    h[:, 1, 1] = x * ea * y + 1.0 / ea
    vol_r = (tau_hi - tau_lo) * (x_hi - x_lo) * (y_hi - y_lo)
    vals = phi(h)
    # |det Ad(h0)| on Lie(H~) is e^{-2 tau} for m = n = 1.
    jac = np.exp(-2.0 * tau)
    rhs, rhs_se = _mean_se(vals * jac ** exponent, vol_r)
    alt, alt_se = _mean_se(vals * jac ** (-exponent), vol_r)

    def z(u, su, v, sv):
        se = np.hypot(su, sv)
        if se == 0:
            return 0.0 if u == v else np.inf
        return abs(u - v) / se

    return HaarCheckReport(
        lhs=lhs, lhs_se=lhs_se, rhs=rhs, rhs_se=rhs_se, rhs_alt=alt, rhs_alt_se=alt_se,
        exponent=exponent, z_score=z(lhs, lhs_se, rhs, rhs_se),
        z_score_alt=z(lhs, lhs_se, alt, alt_se),
        scalar=lhs / rhs if rhs != 0 else float("nan"), samples=samples, seed=seed,
    )
