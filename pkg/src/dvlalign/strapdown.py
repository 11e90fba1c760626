"""Attitude propagation of the body and navigation frames against inertial space.

Two DCMs are propagated from the start of alignment: ``C_b_b0`` (current
body frame to the body frame frozen at start-up) driven by the gyros, and
``C_n_n0`` (current ENU frame to the ENU frame frozen at start-up) driven by
Earth rotation. Velocity increments over one DVL interval are produced with
a two-sample sculling correction.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .kinematics import GeoParams, dcm_from_rotvec, earth_rate_n, orthonormalize, skew

REORTHO_EVERY = 1000


def _interval_ratio(dt_s: float, dt_d: float) -> int:
    D = int(round(dt_d / dt_s))
    if D < 1 or abs(D * dt_s - dt_d) > 1e-9 * max(1.0, dt_d):
        raise ValueError(f"DVL interval {dt_d} is not an integer multiple of {dt_s}")
    return D


@dataclass(frozen=True)
class RotationState:
    C_b_b0: np.ndarray
    C_n_n0: np.ndarray
    k: int = 0
    dt_s: float = 0.005
    dt_d: float = 1.0

    def __post_init__(self):
        _interval_ratio(self.dt_s, self.dt_d)

    @property
    def D(self) -> int:
        return _interval_ratio(self.dt_s, self.dt_d)

    @classmethod
    def initial(cls, dt_s: float, dt_d: float) -> "RotationState":
        return cls(np.eye(3), np.eye(3), 0, dt_s, dt_d)


@dataclass(frozen=True)
class ImuIncrements:
    """Angle and velocity increments of the two halves of one update interval.

    Fields may hold single vectors (3,) or stacks (n, 3).
    """

    dtheta1: np.ndarray
    dtheta2: np.ndarray
    dv1: np.ndarray
    dv2: np.ndarray


def update_body_dcm(state: RotationState, gyro_samples) -> RotationState:
    """Advance ``C_b_b0`` by the summed rotation vector of the given gyro samples.

    ``gyro_samples`` must contain either one sample (per-IMU-step update) or
    exactly ``D`` samples (one DVL interval).
    """
    w = np.atleast_2d(np.asarray(gyro_samples, dtype=float))
    if w.shape[-1] != 3 or len(w) not in (1, state.D):
        raise ValueError(f"expected 1 or {state.D} gyro samples, got {len(w)}")
    theta = w.sum(axis=0) * state.dt_s
    C = state.C_b_b0 @ dcm_from_rotvec(theta)
    k = state.k + len(w)
    if k // REORTHO_EVERY != state.k // REORTHO_EVERY:
        C = orthonormalize(C)
    return replace(state, C_b_b0=C, k=k)


def update_nav_dcm(state: RotationState, geo: GeoParams, dt: float | None = None) -> RotationState:
    """Advance ``C_n_n0`` by Earth rotation over ``dt`` (default: one DVL interval).

    Transport rate is neglected, so the navigation frame turns at the Earth
    rate only.
    """
    dt = state.dt_d if dt is None else dt
    C = state.C_n_n0 @ dcm_from_rotvec(earth_rate_n(geo) * dt)
    return replace(state, C_n_n0=C)


def coning_rotation_vector(dtheta1, dtheta2) -> np.ndarray:
    """Two-sample rotation vector over a pair of angle increments."""
    dtheta1 = np.asarray(dtheta1, dtype=float)
    dtheta2 = np.asarray(dtheta2, dtype=float)
    return dtheta1 + dtheta2 + (2.0 / 3.0) * np.cross(dtheta1, dtheta2)


def two_sample_increment(inc: ImuIncrements) -> np.ndarray:
    """Specific-force velocity increment resolved in the body frame at the interval start."""
    dth = inc.dtheta1 + inc.dtheta2
    dv = inc.dv1 + inc.dv2
    return (
        dv
        + 0.5 * np.cross(dth, dv)
        + (2.0 / 3.0) * (np.cross(inc.dtheta1, inc.dv2) + np.cross(inc.dv1, inc.dtheta2))
    )


def coriolis_increment(v_n_k, v_n_k1, geo: GeoParams, dt_d: float) -> np.ndarray:
    """Integral of ``[w_ie x] v_n`` over one DVL interval, in the nav frame at its start.

    Velocity is taken as linear between the two epochs and the nav frame
    rotation to first order in ``dt_d``.
    """
    w = earth_rate_n(geo)
    W = skew(w)
    I = np.eye(3)
    A = 0.5 * dt_d * I + dt_d**2 / 6.0 * W
    B = 0.5 * dt_d * I + dt_d**2 / 3.0 * W
    return A @ (W @ np.asarray(v_n_k, dtype=float)) + B @ (W @ np.asarray(v_n_k1, dtype=float))


class StrapdownIntegrator:
    """Streaming integrator for gyro and accelerometer samples.

    Samples are interpreted as interval averages: the row stamped ``t``
    holds the mean angular rate (rad/s) and specific force (m/s^2) over
    ``(t - dt_s, t]``. Samples are processed in pairs with the two-sample
    coning and sculling corrections.

    Parameters
    ----------
    dt_s : float
        IMU sampling interval in seconds.
    dt_d : float
        DVL sampling interval; must be an even multiple of ``dt_s``.
    geo : GeoParams
        Latitude, gravity and Earth rate.
    """

    def __init__(self, dt_s: float, dt_d: float, geo: GeoParams):
        self.state = RotationState.initial(dt_s, dt_d)
        if self.state.D % 2:
            warnings.warn("odd IMU samples per DVL interval; the last sample of "
                          "each interval is integrated on its own", stacklevel=2)
        self.geo = geo
        self._pending_g: list[np.ndarray] = []
        self._pending_a: list[np.ndarray] = []
        self._n_pending = 0
        self._n_updates = 0
        # rotation from current body frame to the body frame at interval start
        self._C_b_bk = np.eye(3)
        self._dv_b = np.zeros(3)
        self._samples_in_interval = 0
        self._C_b_b0_start = np.eye(3)
        self._C_n_n0_start = np.eye(3)

    @property
    def dt_s(self) -> float:
        return self.state.dt_s

    @property
    def dt_d(self) -> float:
        return self.state.dt_d

    @property
    def C_b_b0(self) -> np.ndarray:
        """Body attitude after the latest pushed sample.

        An unpaired trailing sample is applied provisionally, without
        consuming it.
        """
        self._flush(final=False)
        if self._n_pending:
            return self.state.C_b_b0 @ dcm_from_rotvec(self._pending_g[0][0] * self.dt_s)
        return self.state.C_b_b0

    @property
    def samples_in_interval(self) -> int:
        return self._samples_in_interval

    def C_n_n0_at(self, samples_into_interval: int | None = None) -> np.ndarray:
        """Nav-frame DCM inside the current interval (Earth rate is constant)."""
        n = self._samples_in_interval if samples_into_interval is None else samples_into_interval
        if n == 0:
            return self._C_n_n0_start
        return self._C_n_n0_start @ dcm_from_rotvec(earth_rate_n(self.geo) * n * self.dt_s)

    def push(self, gyro, accel) -> None:
        self.push_block(np.reshape(gyro, (1, 3)), np.reshape(accel, (1, 3)))

    def push_block(self, gyro, accel) -> None:
        gyro = np.asarray(gyro, dtype=float).reshape(-1, 3)
        accel = np.asarray(accel, dtype=float).reshape(-1, 3)
        if gyro.shape != accel.shape:
            raise ValueError("gyro and accel blocks differ in shape")
        self._pending_g.append(gyro)
        self._pending_a.append(accel)
        self._n_pending += len(gyro)
        self._samples_in_interval += len(gyro)

    def _integrate(self, rotvecs: np.ndarray, dvs: np.ndarray) -> None:
        R = dcm_from_rotvec(rotvecs)
        C_rel = self._C_b_bk
        C = self.state.C_b_b0
        dv_b = self._dv_b
        n = self._n_updates
        for Ri, dvi in zip(R, dvs):
            dv_b = dv_b + C_rel @ dvi
            C_rel = C_rel @ Ri
            C = C @ Ri
            n += 1
            if n % REORTHO_EVERY == 0:
                C = orthonormalize(C)
                C_rel = orthonormalize(C_rel)
        self._n_updates = n
        self._C_b_bk = C_rel
        self._dv_b = dv_b
        self.state = replace(self.state, C_b_b0=C, k=self.state.k + 2 * len(rotvecs))

    def _flush(self, final: bool) -> None:
        if not self._n_pending:
            return
        g_raw = np.concatenate(self._pending_g)
        a_raw = np.concatenate(self._pending_a)
        g, a = g_raw * self.dt_s, a_raw * self.dt_s
        m = 2 * (len(g) // 2)
        if m:
            inc = ImuIncrements(g[0:m:2], g[1:m:2], a[0:m:2], a[1:m:2])
            self._integrate(coning_rotation_vector(inc.dtheta1, inc.dtheta2),
                            two_sample_increment(inc))
        g, a, g_raw, a_raw = g[m:], a[m:], g_raw[m:], a_raw[m:]
        if final and len(g):
            warnings.warn("odd sample count in DVL interval; integrating the last "
                          "sample without pairing", stacklevel=3)
            dth, dv = g[0], a[0]
            self._integrate(dth[None], (dv + 0.5 * np.cross(dth, dv))[None])
            self.state = replace(self.state, k=self.state.k - 1)
            g_raw, a_raw = g_raw[1:], a_raw[1:]
        self._pending_g = [g_raw] if len(g_raw) else []
        self._pending_a = [a_raw] if len(a_raw) else []
        self._n_pending = len(g_raw)

    def close_interval(self):
        """Finish the current DVL interval.

        Returns
        -------
        C_b_b0_start, C_n_n0_start : ndarray
            DCMs at the start of the interval.
        dv_b : ndarray
            Specific-force velocity increment over the interval, resolved in
            the body frame at its start.
        n_samples : int
            Number of IMU samples consumed.
        """
        self._flush(final=True)
        out = (self._C_b_b0_start, self._C_n_n0_start, self._dv_b, self._samples_in_interval)
        self.state = update_nav_dcm(self.state, self.geo,
                                    self._samples_in_interval * self.dt_s)
        self._C_b_b0_start = self.state.C_b_b0
        self._C_n_n0_start = self.state.C_n_n0
        self._C_b_bk = np.eye(3)
        self._dv_b = np.zeros(3)
        self._samples_in_interval = 0
        return out
