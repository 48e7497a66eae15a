"""Lattice dynamics laboratory: diagonal flows on SL_k(R)/SL_k(Z), nondivergence and equidistribution checks."""

__version__ = "0.1.0"

from .core import (ConeVector, Dims, conj_phi, decompose_local, dist_G, floor_vt, make_g_t,
                   make_g_vt, make_u_Y, mc_haar_check, modular_delta, split_vt)
from .errors import (AccuracyError, BudgetError, DecompositionError, DegenerateFunctionError,
                     HypothesisError, InsufficientDataError, InvalidArgumentError, LatlabError,
                     PreconditionError)
from .lattice import (Lattice, in_K_eps, injectivity_radius_check, lll_reduce, shortest_vector,
                      siegel_mean, siegel_transform)

__all__ = [
    "AccuracyError", "BudgetError", "ConeVector", "DecompositionError", "DegenerateFunctionError",
    "Dims", "HypothesisError", "InsufficientDataError", "InvalidArgumentError", "Lattice",
    "LatlabError", "PreconditionError", "conj_phi", "decompose_local", "dist_G", "floor_vt",
    "in_K_eps", "injectivity_radius_check", "lll_reduce", "make_g_t", "make_g_vt", "make_u_Y",
    "mc_haar_check", "modular_delta", "shortest_vector", "siegel_mean", "siegel_transform",
    "split_vt",
]
