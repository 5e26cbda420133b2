"""Online primal-dual algorithms for non-linear and non-convex costs.

Modules: ``core`` (instance types), ``smoothness`` (parameters and
verifiers), ``multilinear`` (extension and gradients), ``greedy`` (general
resource-cost minimisation), ``covering`` (online fractional covering),
``costlib`` (cost families), ``apps`` (applications), ``oracle``
(brute-force baselines) and ``cli``.
"""
from .core import GeneralInstance, InputError, NumericError, Request, SetCostFunction, SizeError, Strategy
from .smoothness import SmoothnessParams, compute_poly_params

__all__ = [
    "GeneralInstance",
    "InputError",
    "NumericError",
    "Request",
    "SetCostFunction",
    "SizeError",
    "SmoothnessParams",
    "Strategy",
    "compute_poly_params",
]
__version__ = "0.1.0"
