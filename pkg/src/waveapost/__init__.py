"""1D finite-element wave solver with leapfrog local time-stepping (LTS)
and a fully computable a posteriori error-estimation pipeline.

Layout:
    timegrid        uniform primal/staggered time grids, time basis, differences
    mesh            dyadic-compatible 1D meshes, coarse/fine classification
    fespace         P1 spaces, assembly, projectors, elliptic/LTS operators, norms
    stepper         leapfrog-LTS integrator on time-varying spaces
    estimators      error indicators, total bounds, BR estimator
    reconstructions time-reconstruction identity suite
    runs, cli       experiment driver and command-line front end
"""

from .errors import ConfigError, DataError, IncompatibleMeshError, NumericalAbort
from .timegrid import TimeGrid
from .mesh import Mesh1D, CoarseFineSplit
from .fespace import FeSpace, DiscreteField, SpaceFamily
from .stepper import WaveState, Trajectory
from .estimators import IndicatorSample, EstimateReport

__all__ = [
    "ConfigError", "DataError", "IncompatibleMeshError", "NumericalAbort",
    "TimeGrid", "Mesh1D", "CoarseFineSplit",
    "FeSpace", "DiscreteField", "SpaceFamily",
    "WaveState", "Trajectory",
    "IndicatorSample", "EstimateReport",
]
