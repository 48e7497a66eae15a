"""``latlab``: experiment runner over the library modules.

Exit codes: 0 success, 1 a check failed, 2 usage or invalid input,
3 hypothesis, budget, accuracy or insufficient-data error.
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from . import __version__
from .bumps import BumpFunction
from .config import ExperimentConfig, load_config, parse_config, read_basis_file
from .equidistribution import (CERTIFY_RTOL, TestFunction, base_points, decay_fit,
                               equidist_point, gamma_tilde, horospherical_dimension)
from .errors import InvalidArgumentError, LatlabError
from .exterior import fit_growth, random_unit_multivectors
from .lattice import Lattice, indicator_ball, shortest_vector, smoothed_ball
from .nondivergence import AffineLatticeMap, Ball, check_cor_3_4, check_theorem_3_1
from .parallel import parallel_map
from .report import fmt, write_csv

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_ERROR = 0, 1, 2, 3


def _say(*parts):
    print(*parts, flush=True)


# ---------------------------------------------------------------------------
# lambda1


def cmd_lambda1(cfg: ExperimentConfig) -> int:
    if "basis_file" in cfg.params:
        B = read_basis_file(cfg.params["basis_file"])
    else:
        try:
            B = np.array(cfg.require("basis"), dtype=float)
        except ValueError as exc:
            raise InvalidArgumentError(f"malformed basis: {exc}") from None
    if B.ndim != 2:
        raise InvalidArgumentError("basis must be a k x k array")
    L = Lattice(B)
    res = shortest_vector(L)
    ladder = cfg.ladder("eps_ladder") if "eps_ladder" in cfg.params else [0.1, 0.3, 0.5, 1.0]
    _say(f"lambda1 = {fmt(res.lambda1)}")
    _say(f"shortest vector = {fmt(res.vector)} (coefficients {fmt(res.coeffs)})")
    rows = []
    for e in ladder:
        if not e > 0:
            raise InvalidArgumentError("eps values must be positive")
        inside = bool(res.lambda1 >= e)
        _say(f"eps = {fmt(e)}: {'in' if inside else 'not in'} K_eps")
        rows.append(dict(eps=e, lambda1=res.lambda1, in_K_eps=inside,
                         vector=res.vector, coeffs=res.coeffs))
    write_csv(cfg.out, ["eps", "lambda1", "in_K_eps", "vector", "coeffs"], rows, {
        "eps": "Mahler threshold", "lambda1": "first minimum",
        "in_K_eps": "membership in the Mahler set K_eps",
        "vector": "a shortest nonzero lattice vector", "coeffs": "its integer coordinates"})
    return EXIT_OK


# ---------------------------------------------------------------------------
# nondiv


def _nondiv_theorem(cfg: ExperimentConfig) -> int:
    dims = cfg.dims
    left = np.array(cfg.require("left"), dtype=float)
    if left.shape != (dims.k, dims.k):
        raise InvalidArgumentError(f"left must be {dims.k} x {dims.k}")
    right = np.array(cfg.get("right", np.eye(dims.k).tolist()), dtype=float)
    phi = AffineLatticeMap.horospherical(dims, left, right)
    B = Ball(tuple(cfg.require("ball_center")), cfg.positive_float("ball_radius"))
    rep = check_theorem_3_1(phi, B, cfg.positive_float("rho"), cfg.ladder("eps_ladder"),
                            cfg.positive_int("samples"), cfg.seed,
                            max_norm=cfg.positive_float("max_norm", 3.0),
                            grid_per_axis=cfg.positive_int("grid_per_axis", 65))
    rows = [dict(eps=e, fraction=f, stderr=s, bound=b, dominated=d)
            for e, f, s, b, d in zip(rep.eps_values, rep.fractions, rep.standard_errors,
                                     rep.bounds, rep.dominated)]
    write_csv(cfg.out, ["eps", "fraction", "stderr", "bound", "dominated"], rows, {
        "eps": "Mahler threshold", "fraction": "measure of x in B with phi(x)Z^k outside K_eps",
        "stderr": "binomial standard error",
        "bound": "C_emp (eps/rho)^(1/(d(k-1))) nondivergence bound",
        "dominated": "fraction <= bound"})
    _say(f"certified rho = {fmt(rep.certificate.rho)} (truncation |w| <= {fmt(rep.certificate.max_norm)})")
    _say(f"theoretical exponent 1/(d(k-1)) = {fmt(rep.exponent)}")
    _say(f"fitted log-log slope = {fmt(rep.fitted_slope)}")
    _say(f"C_emp = {fmt(rep.C_emp)}")
    _say(f"passed = {rep.passed}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def _nondiv_corollary(cfg: ExperimentConfig) -> int:
    dims = cfg.dims
    ts = [t for _, t in cfg.cone_vectors()]
    zs = base_points(dims, cfg.positive_int("base_points", 1))
    rep = check_cor_3_4(dims, cfg.positive_float("ball_radius"), zs, ts, cfg.ladder("eps_ladder"),
                        cfg.positive_int("samples"), cfg.seed,
                        max_norm=cfg.positive_float("max_norm", 3.0),
                        grid_per_axis=cfg.positive_int("grid_per_axis", 65))
    rows = [dict(base_index=r.base_index, floor_t=r.floor_t, t=r.t, eps=r.eps,
                 fraction=r.fraction, stderr=r.stderr,
                 C_emp=rep.C_emp[(r.base_index, r.floor_t)]) for r in rep.rows]
    write_csv(cfg.out, ["base_index", "floor_t", "t", "eps", "fraction", "stderr", "C_emp"], rows, {
        "base_index": "index into the base-point list", "floor_t": "floor(t) = min t_i",
        "t": "cone vector", "eps": "Mahler threshold",
        "fraction": "measure of Y in the ball with g_t u_Y z outside K_eps",
        "stderr": "binomial standard error",
        "C_emp": "smallest C with fraction <= C eps^(1/(mn(k-1))) at this (z, t)"})
    for b in sorted({key[0] for key in rep.C_emp}):
        sweep = " ".join(fmt(c) for c in rep.sweep(b))
        _say(f"base point {b}: C_emp along the sweep = {sweep}")
    _say(f"exponent 1/(mn(k-1)) = {fmt(rep.exponent)}")
    _say(f"max successive ratio = {fmt(max(rep.successive_ratios, default=1.0))}")
    _say(f"spread = {fmt(rep.spread)}")
    _say(f"passed = {rep.passed}")
    return EXIT_OK if rep.passed else EXIT_FAIL


def cmd_nondiv(cfg: ExperimentConfig) -> int:
    mode = cfg.get("mode", "theorem")
    if mode == "theorem":
        return _nondiv_theorem(cfg)
    if mode == "corollary":
        return _nondiv_corollary(cfg)
    raise InvalidArgumentError(f"unknown nondiv mode {mode!r}")


# ---------------------------------------------------------------------------
# equidist


def _make_psi(cfg: ExperimentConfig) -> TestFunction:
    kind = cfg.get("psi", "smoothed_disc")
    radius = cfg.positive_float("psi_radius", 1.0)
    if kind == "smoothed_disc":
        return TestFunction.siegel(smoothed_ball(radius, cfg.positive_float("psi_width", 0.05)))
    if kind == "disc":
        return TestFunction.siegel(indicator_ball(radius))
    if kind == "constant":
        return TestFunction.constant(float(cfg.get("psi_value", 1.0)))
    raise InvalidArgumentError(f"unknown psi {kind!r}")


def _equidist_task(args):
    f, psi, t, z, method, q, qmax, nodes = args
    return equidist_point(f, psi, t, z, method=method, quad_points_per_axis=q,
                          max_points_per_axis=qmax, nodes=nodes)


def cmd_equidist(cfg: ExperimentConfig) -> int:
    dims = cfg.dims
    f = BumpFunction(dims.mn, cfg.positive_float("bump_radius", 0.3))
    psi = _make_psi(cfg)
    idx = int(cfg.get("base_point", 0))
    if idx < 0:
        raise InvalidArgumentError("base_point must be a non-negative index")
    z = base_points(dims, idx + 1)[idx]
    method = cfg.get("method", "unfolded")
    q = cfg.positive_int("quad_points_per_axis", 16)
    qmax = cfg.get("max_points_per_axis", 2 ** 10)
    nodes = cfg.positive_int("nodes", 16)
    pairs = cfg.cone_vectors()
    tasks = [(f, psi, t, z, method, q, qmax, nodes) for _, t in pairs]
    points = parallel_map(_equidist_task, tasks)

    noise = {"midpoint": CERTIFY_RTOL, "unfolded": 1e-10, "mc": CERTIFY_RTOL}
    rows = []
    for (ray, t), p in zip(pairs, points):
        floor_noise = noise[p.method] * max(abs(p.target), 1.0)
        rows.append(dict(m=dims.m, n=dims.n, ray=ray, floor_t=p.floor_t, I_value=p.value,
                         target=p.target, error=p.error, quad_refinement=p.refinement,
                         seed=cfg.seed, method=p.method, below_noise=p.error <= floor_noise))
    cols = ["m", "n", "ray", "floor_t", "I_value", "target", "error", "quad_refinement", "seed",
            "method", "below_noise"]
    write_csv(cfg.out, cols, rows, {
        "ray": "direction of t in the cone", "floor_t": "floor(t) = min t_i",
        "I_value": "I_{f,psi}(g_t, z)", "target": "integral of f times Haar mean of psi",
        "error": "|I - target|", "quad_refinement": "final points per axis or radial nodes",
        "below_noise": "error below the quadrature noise floor"})

    gamma = float(cfg.get("gamma", 1.0))
    ell = int(cfg.get("ell", 1))
    _say(f"target = {fmt(points[0].target)}")
    _say(f"gamma_tilde(gamma={fmt(gamma)}, ell={ell}) = {fmt(gamma_tilde(gamma, ell, dims))} "
         f"with N = {horospherical_dimension(dims)} (gamma, ell are placeholders)")
    if all(r["below_noise"] for r in rows):
        _say("all errors below the quadrature noise floor; no rate to fit")
        return EXIT_OK
    ok = True
    for ray in dict.fromkeys(r["ray"] for r in rows):
        pts = [(r["floor_t"], r["error"]) for r in rows if r["ray"] == ray]
        fit = decay_fit(pts)
        _say(f"ray {fmt(ray)}: gamma_hat = {fmt(fit.gamma_hat)}, C_hat = {fmt(fit.C_hat)}, "
             f"log-residual = {fmt(fit.residual)}")
        ok &= fit.gamma_hat > 0
    _say(f"passed = {ok}")
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# conesweep


def cmd_conesweep(cfg: ExperimentConfig) -> int:
    """Growth of sup-norms of g_t u_Y w along rays, with the fitted (b, alpha)."""
    dims = cfg.dims
    rays = [tuple(float(x) for x in r) for r in cfg.require("rays")]
    floors = cfg.ladder("floors")
    degrees = [int(j) for j in cfg.get("degrees", list(range(1, dims.k)))]
    if any(not 1 <= j < dims.k for j in degrees):
        raise InvalidArgumentError(f"degrees must lie in 1..{dims.k - 1}")
    ws = random_unit_multivectors(dims.k, degrees, cfg.positive_int("count", 200), cfg.seed)
    fit = fit_growth(dims, rays, floors, ws, ball_radius=cfg.positive_float("ball_radius", 1.0),
                     grid_per_axis=cfg.positive_int("grid_per_axis", 9))
    min_slope = float(cfg.get("min_slope", 0.5))
    rows = []
    for i, w in enumerate(ws):
        for r, ray in enumerate(rays):
            for s, fl in enumerate(floors):
                rows.append(dict(w_index=i, degree=w.degree, ray=ray, floor_t=fl,
                                 log_sup=fit.log_ratios[i, r, s],
                                 log_bound=math.log(fit.b) + fit.alpha * fl,
                                 slope=fit.slopes[i, r]))
    write_csv(cfg.out, ["w_index", "degree", "ray", "floor_t", "log_sup", "log_bound", "slope"],
              rows, {"log_sup": "log of sup over the ball of |g_t u_Y w| / |w|",
                     "log_bound": "log(b) + alpha floor(t)",
                     "slope": "fitted slope for this (w, ray)"})
    passed = fit.alpha >= min_slope and fit.bound_holds
    _say(f"alpha = {fmt(fit.alpha)}, b = {fmt(fit.b)}")
    _say(f"bound holds at every sweep point = {fit.bound_holds}")
    _say(f"passed = {passed}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------------------


def cmd_selftest(cfg: ExperimentConfig, fault: str | None = None) -> int:
    from .selftest import run_selftest
    results = run_selftest(cfg.seed, fault=fault)
    width = max(len(r.name) for r in results)
    for r in results:
        _say(f"{r.name:<{width}}  {'PASS' if r.passed else 'FAIL'}  {r.detail}")
    write_csv(cfg.out, ["check", "passed", "value"],
              [dict(check=r.name, passed=r.passed, value=r.value) for r in results])
    failed = sum(not r.passed for r in results)
    _say(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_FAIL


COMMANDS = {"lambda1": cmd_lambda1, "nondiv": cmd_nondiv, "equidist": cmd_equidist,
            "conesweep": cmd_conesweep}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="latlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"latlab {__version__}")
    p.add_argument("command", choices=[*COMMANDS, "selftest"])
    p.add_argument("--config", help="TOML experiment configuration")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--out", help="CSV output path (overrides the configured one)")
    p.add_argument("--inject-fault", dest="inject_fault", choices=["det"],
                   help=argparse.SUPPRESS)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.config is not None:
            cfg = load_config(args.config, args.command)
        elif args.command == "selftest":
            cfg = parse_config("", "selftest")
        else:
            raise InvalidArgumentError(f"{args.command} needs --config")
        if args.seed is not None:
            if args.seed < 0:
                raise InvalidArgumentError("seed must be non-negative")
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        if args.command == "selftest":
            return cmd_selftest(cfg, args.inject_fault)
        return COMMANDS[args.command](cfg)
    except InvalidArgumentError as exc:
        print(f"latlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LatlabError as exc:
        print(f"latlab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
