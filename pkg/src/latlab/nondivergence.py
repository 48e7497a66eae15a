"""Quantitative nondivergence experiments.

Monte Carlo measurement of how much of a ball B is mapped by an affine
family of matrices x -> phi(x) to lattices phi(x) Z^k with a vector
shorter than eps, together with checks of the (C, alpha)-good property
and of the hypothesis that every integer multivector is pushed above rho
somewhere on B.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ConeVector, Dims, make_g_vt
from .errors import DegenerateFunctionError, HypothesisError, InvalidArgumentError
from .exterior import integer_points, wedge_matrix
from .lattice import Lattice, lambda1_batch

SLOPE_TOLERANCE = 0.15


@dataclass(frozen=True)
class Ball:
    """Sup-norm ball in R^d."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.radius > 0:
            raise InvalidArgumentError(f"ball radius must be positive, got {self.radius!r}")

    @property
    def d(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return (2 * self.radius) ** self.d

    def sample(self, rng: np.random.Generator, count: int) -> np.ndarray:
        c = np.asarray(self.center)
        return c + self.radius * rng.uniform(-1.0, 1.0, size=(count, self.d))

    def grid(self, per_axis: int, midpoints: bool = False) -> np.ndarray:
        c = np.asarray(self.center)
        if midpoints:
            axis = -1 + (np.arange(per_axis) + 0.5) * 2.0 / per_axis
        else:
            axis = np.linspace(-1.0, 1.0, per_axis)
        pts = np.stack(np.meshgrid(*([axis] * self.d), indexing="ij"), axis=-1)
        return c + self.radius * pts.reshape(-1, self.d)


@dataclass(frozen=True, eq=False)
class AffineLatticeMap:
    """phi(x) = base + sum_i x_i directions[i], a k x k matrix for each x in R^d."""

    base: np.ndarray
    directions: tuple

    def __post_init__(self):
        base = np.asarray(self.base, dtype=float)
        dirs = tuple(np.asarray(D, dtype=float) for D in self.directions)
        if any(D.shape != base.shape for D in dirs):
            raise InvalidArgumentError("direction matrices must match the base shape")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "directions", dirs)

    @property
    def d(self) -> int:
        return len(self.directions)

    @property
    def k(self) -> int:
        return self.base.shape[0]

    def __call__(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[-1] != self.d:
            raise InvalidArgumentError(f"expected points in R^{self.d}")
        D = np.stack(self.directions) if self.d else np.zeros((0,) + self.base.shape)
        return self.base + np.einsum("pi,ijk->pjk", X, D)

    @classmethod
    def horospherical(cls, dims: Dims, left, right=None) -> "AffineLatticeMap":
        """Y -> left u_Y right, with Y in M_{m,n} flattened row-major."""
        left = np.asarray(left, dtype=float)
        right = np.eye(dims.k) if right is None else np.asarray(right, dtype=float)
        dirs = []
        for i in range(dims.m):
            for j in range(dims.n):
                E = np.zeros((dims.k, dims.k))
                E[i, dims.m + j] = 1.0
                dirs.append(left @ E @ right)
        return cls(left @ right, tuple(dirs))


def nondivergence_fractions(phi: AffineLatticeMap, B: Ball, eps_values: Sequence[float],
                            samples: int, seed: int):
    """Monte Carlo fractions of x in B with lambda_1(phi(x) Z^k) < eps, one per eps.

    All eps share the same samples, so the fractions are monotone in eps.
    Returns (fractions, standard errors).
    """
    if samples <= 0:
        raise InvalidArgumentError("samples must be positive")
    eps_values = np.asarray(eps_values, dtype=float)
    if np.any(eps_values <= 0):
        raise InvalidArgumentError("eps must be positive")
    rng = np.random.default_rng(seed)
    X = B.sample(rng, samples)
    lam = lambda1_batch(phi(X))
    frac = np.array([np.mean(lam < e) for e in eps_values])
    se = np.sqrt(frac * (1 - frac) / samples)
    return frac, se


def nondivergence_fraction(phi: AffineLatticeMap, B: Ball, eps: float, samples: int,
                           seed: int) -> tuple[float, float]:
    frac, se = nondivergence_fractions(phi, B, [eps], samples, seed)
    return float(frac[0]), float(se[0])


# ---------------------------------------------------------------------------
# (C, alpha)-good functions


@dataclass
class GoodnessReport:
    C: float
    alpha: float
    worst_ratio: float  # max of measured / bound
    worst_excess: float  # max of measured - bound, in units of lambda(B')
    worst_ball: tuple
    slack: float
    balls_checked: int

    @property
    def passed(self) -> bool:
        return self.worst_excess <= self.slack


def is_C_alpha_good(f: Callable, B: Ball, C: float, alpha: float, subball_samples: int,
                    seed: int, grid_per_axis: int | None = None,
                    eps_fractions=None) -> GoodnessReport:
    """Check lambda(|f| < eps on B') <= C (eps / sup_B' |f|)^alpha lambda(B') empirically.

    ``f`` maps an array of points (P, d) to (P,). B itself is always one of
    the sub-balls. Measures come from a midpoint grid with n points per
    axis, so an excess of up to 4d/n (boundary cells) is tolerated.
    """
    if not (C > 0 and alpha > 0):
        raise InvalidArgumentError("C and alpha must be positive")
    d = B.d
    n = grid_per_axis or (4000 if d == 1 else max(8, int(round(40000 ** (1 / d)))))
    if eps_fractions is None:
        eps_fractions = np.geomspace(1e-2, 1.0, 13)
    eps_fractions = np.asarray(eps_fractions, dtype=float)
    rng = np.random.default_rng(seed)
    balls = [B]
    for _ in range(subball_samples):
        rad = B.radius * rng.uniform(0.05, 1.0)
        off = (B.radius - rad) * rng.uniform(-1, 1, size=d)
        balls.append(Ball(tuple(np.asarray(B.center) + off), rad))
    worst_ratio, worst_excess, worst_ball = -np.inf, -np.inf, None
    for ball in balls:
        vals = np.abs(np.asarray(f(ball.grid(n, midpoints=True)), dtype=float))
        sup = vals.max()
        if sup == 0:
            raise DegenerateFunctionError(f"f vanishes on the sub-ball {ball}")
        eps = eps_fractions * sup
        frac = np.array([np.mean(vals < e) for e in eps])
        bound = C * eps_fractions ** alpha
        i = int(np.argmax(frac - bound))
        worst_ratio = max(worst_ratio, float(np.max(frac / bound)))
        if frac[i] - bound[i] > worst_excess:
            worst_excess = float(frac[i] - bound[i])
            worst_ball = (ball.center, ball.radius, float(eps[i]))
    return GoodnessReport(C, alpha, worst_ratio, worst_excess, worst_ball,
                          slack=4.0 * d / n, balls_checked=len(balls))


# ---------------------------------------------------------------------------
# Hypothesis on multivectors


@dataclass
class RhoCertificate:
    rho: float  # min over enumerated w of sup_x |phi(x) w|
    degree: int
    argmin: np.ndarray
    max_norm: float
    threshold: float  # every w with |w| > max_norm has sup above this

    @property
    def certified(self) -> bool:
        return self.rho <= self.threshold


def certify_rho(mats: np.ndarray, max_norm: float = 3.0) -> RhoCertificate:
    """min over j and integer w != 0 (|w| <= max_norm) of max over the grid of |wedge^j M w|.

    ``mats`` is phi evaluated on a grid of B, shape (P, k, k).
    """
    k = mats.shape[-1]
    best = None
    threshold = np.inf
    for j in range(1, k):
        M = wedge_matrix(mats, j)
        W = integer_points(M.shape[-1], max_norm)
        sups = np.max(np.linalg.norm(np.einsum("pab,wb->pwa", M, W), axis=-1), axis=0)
        # max_x |M(x) u|^2 >= mean_x |M(x) u|^2 >= lambda_min(mean M^T M) for unit u
        gram = np.einsum("pab,pac->bc", M, M) / len(M)
        threshold = min(threshold, float(np.sqrt(max(np.linalg.eigvalsh(gram)[0], 0.0)) * max_norm))
        i = int(np.argmin(sups))
        if best is None or sups[i] < best[0]:
            best = (float(sups[i]), j, W[i])
    return RhoCertificate(best[0], best[1], best[2], max_norm, threshold)


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = y > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


@dataclass
class NondivergenceReport:
    eps_values: list
    fractions: list
    standard_errors: list
    fitted_slope: float
    rho: float
    exponent: float
    C_emp: float
    certificate: RhoCertificate
    samples: int
    seed: int
    slope_tolerance: float = SLOPE_TOLERANCE

    @property
    def bounds(self) -> list:
        return [self.C_emp * (e / self.rho) ** self.exponent for e in self.eps_values]

    @property
    def dominated(self) -> list:
        return [f <= b * (1 + 1e-12) for f, b in zip(self.fractions, self.bounds)]

    @property
    def passed(self) -> bool:
        return (np.isfinite(self.fitted_slope)
                and self.fitted_slope >= self.exponent - self.slope_tolerance
                and all(self.dominated))


def check_theorem_3_1(phi: AffineLatticeMap, B: Ball, rho: float, eps_ladder, samples: int,
                      seed: int, C: float | None = None, max_norm: float = 3.0,
                      grid_per_axis: int = 65) -> NondivergenceReport:
    """Measure the outside-K_eps fraction on a ladder and compare with C (eps/rho)^{1/(d(k-1))}.

    Without ``C`` the smallest constant dominating every measured point is
    reported.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if not 0 < rho <= 1:
        raise InvalidArgumentError(f"rho must lie in (0, 1], got {rho}")
    if any(e <= 0 or e > rho for e in eps_ladder):
        raise InvalidArgumentError("every eps in the ladder must satisfy 0 < eps <= rho")
    if any(b <= a for a, b in zip(eps_ladder, eps_ladder[1:])):
        raise InvalidArgumentError("eps ladder must be strictly increasing")
    cert = certify_rho(phi(B.grid(grid_per_axis)), max_norm)
    if cert.rho < rho:
        raise HypothesisError(
            f"integer {cert.degree}-vector {cert.argmin} stays below rho={rho} on B "
            f"(sup {cert.rho:.6g})")
    if not cert.certified and cert.threshold < rho:
        raise HypothesisError(f"truncation at |w| <= {max_norm} does not certify rho={rho}")
    expo = 1.0 / (phi.d * (phi.k - 1))
    frac, se = nondivergence_fractions(phi, B, eps_ladder, samples, seed)
    scaled = np.asarray(eps_ladder) / rho
    C_emp = float(np.max(frac / scaled ** expo)) if C is None else float(C)
    return NondivergenceReport(eps_ladder, frac.tolist(), se.tolist(),
                               loglog_slope(eps_ladder, frac), rho, expo, C_emp, cert,
                               samples, seed)


@dataclass
class Cor34Row:
    base_index: int
    floor_t: float
    t: tuple
    eps: float
    fraction: float
    stderr: float


@dataclass
class Cor34Report:
    exponent: float
    rows: list
    C_emp: dict  # (base_index, floor_t) -> constant
    certificates: dict
    samples: int
    seed: int
    uniformity_tolerance: float = 1.1

    @property
    def C_global(self) -> float:
        return max(self.C_emp.values())

    def sweep(self, base_index: int = 0) -> list:
        return [self.C_emp[key] for key in sorted(self.C_emp) if key[0] == base_index]

    @property
    def successive_ratios(self) -> list:
        out = []
        for b in sorted({key[0] for key in self.C_emp}):
            s = self.sweep(b)
            out.extend(y / x for x, y in zip(s, s[1:]))
        return out

    @property
    def spread(self) -> float:
        """Largest max/min ratio of C_emp along the sweep, over base points."""
        return max(max(self.sweep(b)) / min(self.sweep(b))
                   for b in sorted({key[0] for key in self.C_emp}))

    @property
    def passed(self) -> bool:
        dominated = all(r.fraction <= self.C_global * r.eps ** self.exponent * (1 + 1e-12)
                        for r in self.rows)
        return dominated and all(r <= self.uniformity_tolerance for r in self.successive_ratios)


def check_cor_3_4(dims: Dims, ball_radius: float, base_points: Sequence[Lattice],
                  t_list: Sequence[ConeVector], eps_ladder, samples: int, seed: int,
                  max_norm: float = 3.0, grid_per_axis: int = 65) -> Cor34Report:
    """Fraction of Y in the ball with g_t u_Y z outside K_eps, over base points and cone vectors.

    Every (z, t) pair reuses the same Y samples. Each pair must satisfy
    the multivector hypothesis with rho = 1 on the ball.
    """
    eps_ladder = [float(e) for e in eps_ladder]
    if any(not 0 < e < 1 for e in eps_ladder):
        raise InvalidArgumentError("eps values must lie in (0, 1)")
    if samples <= 0:
        raise InvalidArgumentError("samples must be positive")
    expo = 1.0 / (dims.mn * (dims.k - 1))
    B = Ball((0.0,) * dims.mn, ball_radius)
    rows, C_emp, certs = [], {}, {}
    for bi, z in enumerate(base_points):
        for t in t_list:
            phi = AffineLatticeMap.horospherical(dims, make_g_vt(dims, t), z.basis)
            cert = certify_rho(phi(B.grid(grid_per_axis)), max_norm)
            certs[(bi, t.floor)] = cert
            if cert.rho < 1.0:
                raise HypothesisError(
                    f"floor(t)={t.floor:g} is below the threshold: integer "
                    f"{cert.degree}-vector {cert.argmin} has sup {cert.rho:.4g} < 1")
            frac, se = nondivergence_fractions(phi, B, eps_ladder, samples, seed)
            C_emp[(bi, t.floor)] = float(np.max(frac / np.asarray(eps_ladder) ** expo))
            rows.extend(Cor34Row(bi, t.floor, t.t, e, float(f), float(s))
                        for e, f, s in zip(eps_ladder, frac, se))
    return Cor34Report(expo, rows, C_emp, certs, samples, seed)
