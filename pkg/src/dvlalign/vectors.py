"""Observation and reference vectors accumulated at DVL epochs.

The observation vector is built in the initial body frame from DVL
velocity and IMU increments; the reference vector is the integral of gravity
in the initial navigation frame. For the true alignment DCM ``C_n0_b0`` the
two satisfy ``beta = C_n0_b0 @ alpha``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .kinematics import GeoParams, earth_rate_n, gravity_n, skew

_ZERO = np.zeros(3)


@dataclass(frozen=True)
class DvlSample:
    v_b_meas: np.ndarray
    epoch: int


@dataclass(frozen=True)
class VectorPair:
    """Accumulators at epoch ``M``.

    Attributes
    ----------
    beta : ndarray
        Observation vector (m/s), initial-body frame.
    alpha : ndarray
        Reference vector (m/s), initial-nav frame.
    beta_prime : ndarray
        Running integral of the Coriolis and specific-force terms.
    v_b0 : ndarray
        Body velocity used as the integration constant (first DVL sample).
    M : int
        Epoch index.
    """

    beta: np.ndarray
    alpha: np.ndarray
    beta_prime: np.ndarray
    v_b0: np.ndarray
    M: int = 0

    @classmethod
    def initial(cls, v_b0) -> "VectorPair":
        return cls(_ZERO.copy(), _ZERO.copy(), _ZERO.copy(), np.asarray(v_b0, dtype=float), 0)


def update_beta_prime(pair: VectorPair, C_b_b0_prev, C_n_b0_prev, dv_n, dv_b) -> VectorPair:
    """Advance the running integral by one DVL interval.

    ``C_b_b0_prev`` and ``C_n_b0_prev`` are the body and navigation frames at
    the start of the interval, both resolved into the initial body frame.
    ``dv_n`` is the Coriolis increment (nav frame at interval start) and
    ``dv_b`` the specific-force increment (body frame at interval start).
    """
    bp = pair.beta_prime + np.asarray(C_n_b0_prev) @ dv_n - np.asarray(C_b_b0_prev) @ dv_b
    return replace(pair, beta_prime=bp, M=pair.M + 1)


def compute_beta(pair: VectorPair, C_b_b0, dvl: DvlSample) -> np.ndarray:
    return np.asarray(C_b_b0) @ dvl.v_b_meas - pair.v_b0 + pair.beta_prime


def alpha_increment(C_n_n0_prev, geo: GeoParams, dt_d: float) -> np.ndarray:
    W = skew(earth_rate_n(geo))
    return np.asarray(C_n_n0_prev) @ ((dt_d * np.eye(3) + 0.5 * dt_d**2 * W) @ gravity_n(geo))


def update_alpha(pair: VectorPair, C_n_n0_prev, geo: GeoParams, dt_d: float) -> VectorPair:
    return replace(pair, alpha=pair.alpha + alpha_increment(C_n_n0_prev, geo, dt_d))
