"""loopmoments: exact and PCE-approximated moments of probabilistic loops.

The package parses a small probabilistic-loop DSL, classifies programs
(prob-solvable, exactly rewritable, PCE-required), rewrites trigonometric
and exponential updates into polynomial form, propagates moments through
an affine recurrence with matrix powering, expands non-polynomial updates
in orthonormal polynomial chaos bases, and cross-checks everything against
a reproducible Monte Carlo simulator.
"""

from . import cli, distributions, dsl, engine, mixed_moments, pce, quadrature, simulate, transform
from .distributions import (
    beta,
    gamma,
    normal,
    trunc_gamma,
    trunc_normal,
    uniform,
)
from .dsl import ClassificationReport, Program, classify, parse_file, parse_program, pretty_print
from .engine import MomentRecurrence, MomentTable, moment_closure, moments_at
from .errors import LoopMomentsError
from .pce import PceEstimate, error_bound, expand, orthonormal_basis
from .simulate import simulate as run_simulation
from .transform import SubstitutionReport, pce_substitute_all, rewrite_all

__all__ = [
    "ClassificationReport",
    "LoopMomentsError",
    "MomentRecurrence",
    "MomentTable",
    "PceEstimate",
    "Program",
    "SubstitutionReport",
    "beta",
    "classify",
    "cli",
    "distributions",
    "dsl",
    "engine",
    "error_bound",
    "expand",
    "gamma",
    "mixed_moments",
    "moment_closure",
    "moments_at",
    "normal",
    "orthonormal_basis",
    "parse_file",
    "parse_program",
    "pce",
    "pce_substitute_all",
    "pretty_print",
    "quadrature",
    "rewrite_all",
    "run_simulation",
    "simulate",
    "transform",
    "trunc_gamma",
    "trunc_normal",
    "uniform",
]

__version__ = "1.0.0"
