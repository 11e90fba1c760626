"""Robust in-motion initial alignment of a strapdown IMU aided by a DVL.

The alignment DCM between the initial body and navigation frames is found
from pairs of integrated observation and reference vectors. DVL outliers are
suppressed by a Huber-weighted Kalman filter that fits the observation
vector to its closed-form time model and hands the reconstructed vector to
the attitude solver.
"""
from .exceptions import (
    AlignmentError,
    ConfigError,
    NumericalError,
    StreamError,
    UnderdeterminedError,
)
from .kinematics import EARTH_RATE, GeoParams
from .pipeline import AlignerConfig, AlignmentEngine, AlignmentTrace, DvlAidedAligner, run
from .robust import RobustApparentVelocityFilter

__version__ = "0.1.0"

__all__ = [
    "AlignerConfig",
    "AlignmentEngine",
    "AlignmentError",
    "AlignmentTrace",
    "ConfigError",
    "DvlAidedAligner",
    "EARTH_RATE",
    "GeoParams",
    "NumericalError",
    "RobustApparentVelocityFilter",
    "StreamError",
    "UnderdeterminedError",
    "run",
]
