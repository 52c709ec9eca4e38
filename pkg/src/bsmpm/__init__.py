"""B-spline material point method with an F-bar projection for
near-incompressibility."""

__version__ = "0.1.0"

from .constitutive import ElasticParams, J2Params
from .errors import ConfigurationError, NumericalFatalError, OutOfDomainError
from .fbar import Projection
from .scenes import SCENE_BUILDERS, SceneConfig, build_state
from .solver import SimState, TimeControls, run, step

__all__ = [
    "ConfigurationError",
    "ElasticParams",
    "J2Params",
    "NumericalFatalError",
    "OutOfDomainError",
    "Projection",
    "SCENE_BUILDERS",
    "SceneConfig",
    "SimState",
    "TimeControls",
    "build_state",
    "run",
    "step",
]
