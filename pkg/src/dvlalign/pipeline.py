"""End-to-end in-motion alignment from IMU and DVL streams.

Per DVL epoch the engine builds the observation vector, advances the
reference vector, runs the robust coefficient filter, accumulates the
attitude-profile matrix from either the raw or the reconstructed
observation vector, and re-solves the alignment quaternion.

Comparison schemes: 1 and 3 use the raw observation vector, 2 and 4 the
reconstructed one. Schemes 1 and 2 are meant for DVL data with outliers,
3 and 4 for clean data; the engine itself only distinguishes raw from
reconstructed.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .attitude import (
    KMatrix,
    accumulate,
    current_attitude,
    euler_from_dcm,
    solve,
    wrap_angle,
)
from .exceptions import ConfigError, StreamError, UnderdeterminedError
from .kinematics import EARTH_RATE, GeoParams, dcm_from_rotvec, earth_rate_n
from .robust import HUBER_95, INNOVATION_SCALES, RobustApparentVelocityFilter
from .strapdown import StrapdownIntegrator, _interval_ratio, coriolis_increment
from .vectors import DvlSample, VectorPair, compute_beta, update_alpha, update_beta_prime

log = logging.getLogger(__name__)

SCHEMES = ("raw", "reconstructed")
SCHEME_KIND = {1: "raw", 2: "reconstructed", 3: "raw", 4: "reconstructed"}
SCHEME_OUTLIERS = {1: True, 2: True, 3: False, 4: False}


def scheme_kind(scheme) -> str:
    if scheme in SCHEMES:
        return scheme
    try:
        return SCHEME_KIND[int(scheme)]
    except (KeyError, ValueError, TypeError):
        raise ConfigError(f"unknown scheme {scheme!r}") from None


@dataclass(frozen=True)
class AlignerConfig:
    geo: GeoParams = field(default_factory=lambda: GeoParams.from_degrees(32.057313))
    dt_s: float = 0.005
    dt_d: float = 1.0
    scheme: str = "reconstructed"
    huber_threshold: float = HUBER_95
    meas_var: float = 0.1**2
    process_var: float = 1e-3**2
    initial_var: float = 1e5**2
    innovation_scale: str = "innovation"
    burn_in: int = 0
    max_reweight_iter: int = 1
    v0_guard: bool = False
    v0_guard_n: int = 5

    def __post_init__(self):
        try:
            D = _interval_ratio(self.dt_s, self.dt_d)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if D % 2:
            raise ConfigError(f"IMU samples per DVL interval must be even, got {D}")
        object.__setattr__(self, "scheme", scheme_kind(self.scheme))
        if self.innovation_scale not in INNOVATION_SCALES:
            raise ConfigError(f"innovation_scale must be one of {INNOVATION_SCALES}")
        if self.v0_guard_n < 1:
            raise ConfigError("v0_guard_n must be at least 1")

    @property
    def D(self) -> int:
        return _interval_ratio(self.dt_s, self.dt_d)

    def make_filter(self) -> RobustApparentVelocityFilter:
        return RobustApparentVelocityFilter(
            earth_rate=self.geo.earth_rate, huber_threshold=self.huber_threshold,
            meas_var=self.meas_var, process_var=self.process_var,
            initial_var=self.initial_var, innovation_scale=self.innovation_scale,
            burn_in=self.burn_in, max_reweight_iter=self.max_reweight_iter)


@dataclass(frozen=True)
class EpochRecord:
    t: float
    M: int
    beta_raw: np.ndarray
    beta_rec: np.ndarray
    alpha: np.ndarray
    weights: np.ndarray
    zeta: np.ndarray
    q: np.ndarray  # nan while underdetermined
    C_n0_b0: np.ndarray
    C_b_n: np.ndarray
    euler: tuple
    underdetermined: bool
    euler_error: tuple | None = None


class AlignmentTrace(list):
    """List of :class:`EpochRecord` with column accessors."""

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self])

    @property
    def t(self):
        return self.column("t")

    @property
    def euler(self):
        return self.column("euler")

    @property
    def errors(self):
        if not self or self[0].euler_error is None:
            return None
        return self.column("euler_error")

    def at(self, t: float, tol: float = 1e-6) -> EpochRecord:
        for r in self:
            if abs(r.t - t) <= tol:
                return r
        raise KeyError(f"no epoch at t={t}")


class AlignmentEngine:
    """Sequential alignment state machine.

    Feed IMU rows with :meth:`process_imu` (or :meth:`process_imu_block`) and
    DVL rows with :meth:`process_dvl`, in time order. The first DVL sample
    marks the start of alignment and fixes the initial body frame.
    """

    def __init__(self, config: AlignerConfig, initial_velocity=None):
        self.config = config
        self.geo = config.geo
        self.imu = StrapdownIntegrator(config.dt_s, config.dt_d, config.geo)
        self.filter = config.make_filter()
        self.K = KMatrix.zero()
        self.C_n0_b0 = np.eye(3)
        self.solved = False
        self.pair: VectorPair | None = None
        self._v0_override = None if initial_velocity is None else np.asarray(initial_velocity, float)
        self._t0: float | None = None
        self._t_imu: float | None = None
        self._t_dvl: float | None = None
        self._v_prev = None

    @property
    def started(self) -> bool:
        return self._t0 is not None

    def _check_imu_time(self, t: np.ndarray) -> None:
        if not self.started:
            raise StreamError("IMU data before the first DVL sample")
        expect = self._t_imu + self.config.dt_s * np.arange(1, len(t) + 1)
        if np.any(np.abs(t - expect) > 1e-6 * self.config.dt_s + 1e-9):
            if np.any(np.diff(np.concatenate(([self._t_imu], t))) <= 0):
                raise StreamError("out-of-order IMU timestamp")
            raise StreamError("IMU timestamps do not match the configured rate")

    def process_imu(self, t: float, gyro, accel) -> None:
        self.process_imu_block(np.array([t]), np.reshape(gyro, (1, 3)), np.reshape(accel, (1, 3)))

    def process_imu_block(self, t, gyro, accel) -> None:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_imu_time(t)
        self.imu.push_block(gyro, accel)
        self._t_imu = float(t[-1])

    def process_dvl(self, t: float, v_b) -> EpochRecord | None:
        v_b = np.asarray(v_b, dtype=float)
        if not self.started:
            self._t0 = self._t_imu = self._t_dvl = float(t)
            v0 = v_b if self._v0_override is None else self._v0_override
            self.pair = VectorPair.initial(v0)
            self._v_prev = v_b
            return None
        if t <= self._t_dvl:
            raise StreamError("out-of-order DVL timestamp")
        if abs(t - self._t_dvl - self.config.dt_d) > 1e-6:
            raise StreamError(f"DVL epoch spacing {t - self._t_dvl} != {self.config.dt_d}")
        if self.imu.samples_in_interval != self.config.D:
            raise StreamError(f"expected {self.config.D} IMU samples before DVL epoch at "
                              f"t={t}, got {self.imu.samples_in_interval}")
        geo, dt_d = self.geo, self.config.dt_d
        C_b_b0_prev, C_n_n0_prev, dv_b, _ = self.imu.close_interval()
        C_b_b0 = self.imu.state.C_b_b0
        C_n_n0 = self.imu.state.C_n_n0

        # Coriolis term uses the latest attitude estimate (identity before the first solve)
        v_n_k = current_attitude(self.C_n0_b0, C_n_n0_prev, C_b_b0_prev) @ self._v_prev
        v_n_k1 = current_attitude(self.C_n0_b0, C_n_n0, C_b_b0) @ v_b
        dv_n = coriolis_increment(v_n_k, v_n_k1, geo, dt_d)
        pair = update_beta_prime(self.pair, C_b_b0_prev, self.C_n0_b0 @ C_n_n0_prev, dv_n, dv_b)
        beta_raw = compute_beta(pair, C_b_b0, DvlSample(v_b, pair.M))
        pair = update_alpha(pair, C_n_n0_prev, geo, dt_d)
        self.pair = VectorPair(beta_raw, pair.alpha, pair.beta_prime, pair.v_b0, pair.M)

        t_rel = t - self._t0
        beta_rec = self.filter.update(t_rel, beta_raw)
        beta_used = beta_rec if self.config.scheme == "reconstructed" else beta_raw
        self.K = accumulate(self.K, beta_used, pair.alpha)
        try:
            sol = solve(self.K)
            self.C_n0_b0 = sol.C_n0_b0
            q = sol.q
            self.solved = True
            under = False
        except UnderdeterminedError:
            q = np.full(4, np.nan)
            under = True
        self._t_dvl = float(t)
        self._v_prev = v_b
        C_b_n = current_attitude(self.C_n0_b0, C_n_n0, C_b_b0)
        return EpochRecord(
            t=float(t), M=pair.M, beta_raw=beta_raw, beta_rec=np.asarray(beta_rec),
            alpha=pair.alpha, weights=self.filter._hist["weights"][-1],
            zeta=self.filter._hist["zeta"][-1], q=q, C_n0_b0=self.C_n0_b0.copy(),
            C_b_n=C_b_n, euler=euler_from_dcm(C_b_n), underdetermined=under)

    def current_attitude(self) -> np.ndarray:
        """Body-to-nav DCM at the latest IMU sample."""
        n = self.imu.samples_in_interval
        return current_attitude(self.C_n0_b0, self.imu.C_n_n0_at(n), self.imu.C_b_b0)


def _as_stream(data, ncols, name):
    if hasattr(data, "t"):
        cols = [np.asarray(data.t)[:, None]]
        if ncols == 7:
            cols += [np.asarray(data.gyro), np.asarray(data.accel)]
        else:
            cols += [np.asarray(data.v_b)]
        data = np.hstack(cols)
    arr = check_array(data, dtype=float, ensure_min_samples=0)
    if arr.shape[0] == 0:
        raise StreamError(f"{name} stream is empty")
    if arr.shape[1] != ncols:
        raise StreamError(f"{name} stream must have {ncols} columns, got {arr.shape[1]}")
    return arr


def _truth_lookup(truth):
    """Map truth (t, C_b_n) or (t, euler[pitch, roll, yaw]) to a time -> euler function."""
    if truth is None:
        return None
    t = np.asarray(truth.t if hasattr(truth, "t") else truth[0], dtype=float)
    eul = np.asarray(truth.euler if hasattr(truth, "euler") else truth[1], dtype=float)
    if eul.ndim == 3:
        eul = np.array([euler_from_dcm(C) for C in eul])

    def lookup(tq):
        i = int(np.argmin(np.abs(t - tq)))
        if abs(t[i] - tq) > 1e-6:
            return None
        return eul[i]

    return lookup


def run(config: AlignerConfig, imu, dvl, truth=None) -> AlignmentTrace:
    """Align over complete IMU and DVL streams.

    Parameters
    ----------
    imu : array (n, 7) ``[t, wx, wy, wz, fx, fy, fz]`` or an object with
        ``t``, ``gyro`` and ``accel`` attributes.
    dvl : array (m, 4) ``[t, vx, vy, vz]`` or an object with ``t`` and ``v_b``.
    truth : optional ``(t, euler)`` or ``(t, C_b_n)``, or an object with
        ``t`` and ``euler``; when given, per-epoch pitch/roll/yaw errors
        (estimate minus truth, rad) are attached to the records.
    """
    imu = _as_stream(imu, 7, "IMU")
    dvl = _as_stream(dvl, 4, "DVL")
    if len(imu) > 1 and np.max(np.abs(np.diff(imu[:, 0]) - config.dt_s)) > 1e-6 * config.dt_s + 1e-9:
        raise StreamError("IMU sampling interval does not match configuration")
    if len(dvl) > 1 and np.max(np.abs(np.diff(dvl[:, 0]) - config.dt_d)) > 1e-6:
        raise StreamError("DVL sampling interval does not match configuration")
    v0 = None
    if config.v0_guard:
        v0 = np.median(dvl[: config.v0_guard_n, 1:], axis=0)
    engine = AlignmentEngine(config, initial_velocity=v0)
    lookup = _truth_lookup(truth)
    trace = AlignmentTrace()
    t_imu = imu[:, 0]
    engine.process_dvl(dvl[0, 0], dvl[0, 1:])
    start = int(np.searchsorted(t_imu, dvl[0, 0] + 0.5 * config.dt_s))
    for row in dvl[1:]:
        stop = int(np.searchsorted(t_imu, row[0] + 0.5 * config.dt_s))
        if stop > start:
            blk = imu[start:stop]
            engine.process_imu_block(blk[:, 0], blk[:, 1:4], blk[:, 4:7])
        start = stop
        rec = engine.process_dvl(row[0], row[1:])
        if lookup is not None:
            ref = lookup(rec.t)
            if ref is not None:
                err = wrap_angle(np.asarray(rec.euler) - ref)
                rec = replace(rec, euler_error=tuple(float(e) for e in err))
        trace.append(rec)
    trace.coef = engine.filter.coef_
    return trace


class DvlAidedAligner(BaseEstimator):
    """Robust in-motion alignment as an estimator.

    ``fit(imu, dvl)`` estimates the constant rotation between the initial
    navigation and body frames; ``predict(imu)`` propagates it over an IMU
    stream starting at the same instant and returns pitch, roll and yaw.

    Parameters
    ----------
    latitude_deg : float
    gravity : float or None
        Defaults to normal gravity at the latitude.
    earth_rate : float
    imu_rate, dvl_rate : float
        Sampling rates in Hz.
    scheme : {"reconstructed", "raw"} or 1..4
    huber_threshold, meas_var, process_var, initial_var, innovation_scale, burn_in,
    max_reweight_iter : robust-filter settings, see
        :class:`~dvlalign.robust.RobustApparentVelocityFilter`.
    v0_guard : bool
        Use the median of the first ``v0_guard_n`` DVL samples as the
        initial body velocity instead of the first sample.
    """

    def __init__(self, latitude_deg=32.057313, gravity=None, earth_rate=EARTH_RATE,
                 imu_rate=200.0, dvl_rate=1.0, scheme="reconstructed",
                 huber_threshold=HUBER_95, meas_var=0.1**2, process_var=1e-3**2,
                 initial_var=1e5**2, innovation_scale="innovation", burn_in=0,
                 max_reweight_iter=1, v0_guard=False, v0_guard_n=5):
        self.latitude_deg = latitude_deg
        self.gravity = gravity
        self.earth_rate = earth_rate
        self.imu_rate = imu_rate
        self.dvl_rate = dvl_rate
        self.scheme = scheme
        self.huber_threshold = huber_threshold
        self.meas_var = meas_var
        self.process_var = process_var
        self.initial_var = initial_var
        self.innovation_scale = innovation_scale
        self.burn_in = burn_in
        self.max_reweight_iter = max_reweight_iter
        self.v0_guard = v0_guard
        self.v0_guard_n = v0_guard_n

    def make_config(self) -> AlignerConfig:
        geo = GeoParams(np.radians(self.latitude_deg), self.gravity, self.earth_rate)
        return AlignerConfig(
            geo=geo, dt_s=1.0 / self.imu_rate, dt_d=1.0 / self.dvl_rate, scheme=self.scheme,
            huber_threshold=self.huber_threshold, meas_var=self.meas_var,
            process_var=self.process_var, initial_var=self.initial_var,
            innovation_scale=self.innovation_scale, burn_in=self.burn_in,
            max_reweight_iter=self.max_reweight_iter, v0_guard=self.v0_guard,
            v0_guard_n=self.v0_guard_n)

    def fit(self, imu, dvl, truth=None):
        config = self.make_config()
        self.trace_ = run(config, imu, dvl, truth)
        last = self.trace_[-1]
        if last.underdetermined and not np.isfinite(last.q).all():
            raise UnderdeterminedError("alignment did not produce an attitude")
        self.config_ = config
        self.quaternion_ = last.q
        self.attitude_ = last.C_n0_b0
        self.euler_ = np.array(last.euler)
        self.coef_ = self.trace_.coef
        return self

    def predict(self, imu) -> np.ndarray:
        """Pitch, roll and yaw (rad) after each IMU row of a stream starting at alignment start."""
        check_is_fitted(self, "attitude_")
        imu = _as_stream(imu, 7, "IMU")
        cfg = self.config_
        w_ie = earth_rate_n(cfg.geo)
        C = np.eye(3)
        out = np.empty((len(imu), 3))
        R = dcm_from_rotvec(imu[:, 1:4] * cfg.dt_s)
        C_b0_n0 = self.attitude_.T
        for i in range(len(imu)):
            C = C @ R[i]
            C_n_n0 = dcm_from_rotvec(w_ie * (i + 1) * cfg.dt_s)
            out[i] = euler_from_dcm(C_n_n0.T @ C_b0_n0 @ C)
        return out
