"""Closed-form model of the reference and observation vectors.

Both vectors are a constant 3x4 coefficient matrix times the basis
``[cos(w t), sin(w t), t, 1]`` where ``w`` is the Earth rate.
"""
from __future__ import annotations

import numpy as np

from .kinematics import GeoParams


def gamma(t, earth_rate: float) -> np.ndarray:
    """Basis vector at time ``t``; a 1-D ``t`` gives shape (n, 4)."""
    t = np.asarray(t, dtype=float)
    wt = earth_rate * t
    return np.stack([np.cos(wt), np.sin(wt), t, np.ones_like(t)], axis=-1)


def phi_matrix(geo: GeoParams) -> np.ndarray:
    """Coefficients of the reference vector, rows = ENU-at-start axes."""
    g, w = geo.gravity, geo.earth_rate
    c, s = np.cos(geo.latitude), np.sin(geo.latitude)
    return np.array(
        [
            [g * c / w, 0.0, 0.0, -g * c / w],
            [0.0, g * c * s / w, -g * c * s, 0.0],
            [0.0, -g * c * c / w, -g * s * s, 0.0],
        ]
    )


def xi_matrix(C_n0_b0, geo: GeoParams) -> np.ndarray:
    """Coefficients of the observation vector for a given alignment DCM."""
    return np.asarray(C_n0_b0) @ phi_matrix(geo)


def evaluate(coeff, t, earth_rate: float) -> np.ndarray:
    """``coeff @ gamma(t)``; returns (3,) for scalar ``t`` or (n, 3)."""
    return gamma(t, earth_rate) @ np.asarray(coeff).T
