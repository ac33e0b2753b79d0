"""Multivariate fractal interpolation functions and the alpha-fractal operator on L^q.

Modules
-------
net        product nets on boxes and the affine cell maps
expr       expression language for configs
funcstore  grid functions, scaling functions, base operators, CSV storage
measure    invariant measures: cylinder quadrature and the chaos game
rb         Read-Bajraktarevic operators and their fixed points
analysis   numerical checks of the operator bounds, Schauder experiment
config     run configuration files
cli        ``fractal-lq`` command line
"""

from .net import Net, build_net
from .funcstore import BaseOperator, GridFunction, ScalingFunction, discretize
from .measure import ProbabilityVector, Quadrature, lq_norm
from .rb import FractalConfig, fractal_operator, inverse_fractal_operator, make_config

__all__ = [
    "BaseOperator",
    "FractalConfig",
    "GridFunction",
    "Net",
    "ProbabilityVector",
    "Quadrature",
    "ScalingFunction",
    "build_net",
    "discretize",
    "fractal_operator",
    "inverse_fractal_operator",
    "lq_norm",
    "make_config",
]

__version__ = "0.1.0"
