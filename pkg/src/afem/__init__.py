"""Adaptive finite element methods with residual error estimators.

The loop SOLVE -> ESTIMATE -> MARK -> REFINE on conforming triangulations
refined by newest-vertex bisection, for linear, convection-diffusion,
semilinear and eigenvalue model problems.
"""
from .driver import AfemConfig, AfemTrace, IterationRecord, fit_rate, run
from .estimator import Indicators, indicators
from .marking import dorfler_mark
from .mesh import Triangulation, load_initial, refine, uniform_refine
from .problems import ProblemSpec, catalog, problem_ids

__all__ = [
    "AfemConfig", "AfemTrace", "IterationRecord", "fit_rate", "run", "Indicators",
    "indicators", "dorfler_mark", "Triangulation", "load_initial", "refine",
    "uniform_refine", "ProblemSpec", "catalog", "problem_ids",
]
__version__ = "0.1.0"
