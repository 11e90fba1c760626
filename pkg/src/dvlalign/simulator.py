"""Synthetic S-turn trajectories with IMU and DVL measurements.

The trajectory is analytic: yaw rate follows a half-sine lobe per segment,
pitch and roll oscillate sinusoidally, and the vehicle moves horizontally
along its heading. Everything is generated on a local tangent plane with a
constant latitude (no transport rate).

IMU rows are interval averages over ``(t - dt, t]`` of the body-frame
angular rate ``C_n^b w_ie^n + w_nb^b`` and specific force
``C_n^b (dv^n/dt + 2 w_ie^n x v^n - g^n)``, evaluated with 4-point
Gauss-Legendre quadrature. Multiplied by ``dt`` they are the raw angle and
velocity increments a strapdown integrator expects.

White-noise discretization: a gyro angle random walk ``N`` (rad/sqrt(s))
gives per-sample rate noise ``N / sqrt(dt)``; an accelerometer density ``n``
((m/s^2)/sqrt(Hz)) gives per-sample noise ``n / sqrt(dt)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.transform import Rotation

from .kinematics import GeoParams, earth_rate_n, gravity_n

DEG = np.pi / 180.0
DEG_PER_HOUR = DEG / 3600.0
MICRO_G = 9.80665e-6

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(4)


@dataclass(frozen=True)
class Segment:
    duration: float
    yaw_rate: float  # peak of the half-sine lobe, rad/s
    speed: float  # m/s reached at the end of the segment

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("segment duration must be positive")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")


@dataclass(frozen=True)
class TrajectoryProfile:
    """Piecewise S-turn profile.

    Speed changes from the previous segment's speed to the segment's own
    speed with a half-cosine ramp; ``initial_speed`` is the speed at t = 0.
    """

    segments: tuple[Segment, ...]
    initial_speed: float = 5.0
    initial_yaw: float = 30.0 * DEG
    pitch_amplitude: float = 2.0 * DEG
    pitch_period: float = 8.0
    roll_amplitude: float = 2.0 * DEG
    roll_period: float = 10.0
    latitude: float = 32.057313 * DEG
    longitude: float = 118.786365 * DEG

    def __post_init__(self):
        if not self.segments:
            raise ValueError("profile needs at least one segment")
        if self.initial_speed < 0:
            raise ValueError("speed must be non-negative")

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    @classmethod
    def s_turn(cls, duration=600.0, half_period=50.0, yaw_rate=3.0 * DEG, speed=5.0,
               **kwargs) -> "TrajectoryProfile":
        n = int(np.ceil(duration / half_period))
        segs = []
        left = duration
        for i in range(n):
            d = min(half_period, left)
            segs.append(Segment(d, yaw_rate if i % 2 == 0 else -yaw_rate, speed))
            left -= d
        return cls(tuple(segs), initial_speed=speed, **kwargs)


@dataclass(frozen=True)
class ImuErrorModel:
    gyro_bias: float = 0.02 * DEG_PER_HOUR  # rad/s on each axis
    gyro_arw: float = 0.005 * DEG / 60.0  # rad/sqrt(s)
    accel_bias: float = 50.0 * MICRO_G  # m/s^2 on each axis
    accel_noise: float = 50.0 * MICRO_G  # (m/s^2)/sqrt(Hz)
    seed: int = 0

    def __post_init__(self):
        for name in ("gyro_bias", "gyro_arw", "accel_bias", "accel_noise"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    @classmethod
    def perfect(cls) -> "ImuErrorModel":
        return cls(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class DvlErrorModel:
    noise_std: float = 0.1
    outlier_std: float = 30.0
    outlier_prob: float = 0.02
    seed: int = 0
    # the first sample is the integration constant of every observation vector;
    # by default it is left error-free so that each later epoch carries one
    # independent mixture draw
    corrupt_first: bool = False

    def __post_init__(self):
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise ValueError("outlier_prob must lie in [0, 1]")
        if self.noise_std < 0 or self.outlier_std < 0:
            raise ValueError("standard deviations must be non-negative")

    @classmethod
    def perfect(cls) -> "DvlErrorModel":
        return cls(0.0, 0.0, 0.0)


class ProfileModel:
    """Vectorized analytic evaluation of a :class:`TrajectoryProfile`."""

    def __init__(self, profile: TrajectoryProfile):
        self.profile = profile
        d = np.array([s.duration for s in profile.segments])
        self._t0 = np.concatenate(([0.0], np.cumsum(d)[:-1]))
        self._d = d
        self._rate = np.array([s.yaw_rate for s in profile.segments])
        self._v1 = np.array([s.speed for s in profile.segments])
        self._v0 = np.concatenate(([profile.initial_speed], self._v1[:-1]))
        # yaw accumulated at segment starts; each lobe adds 2 * rate * d / pi
        self._yaw0 = profile.initial_yaw + np.concatenate(
            ([0.0], np.cumsum(2.0 * self._rate * d / np.pi)[:-1]))

    def _seg(self, t):
        t = np.asarray(t, dtype=float)
        i = np.clip(np.searchsorted(self._t0, t, side="right") - 1, 0, len(self._d) - 1)
        tau = np.clip(t - self._t0[i], 0.0, self._d[i])
        return i, tau

    def yaw(self, t):
        """Yaw angle, its first and second derivatives."""
        i, tau = self._seg(t)
        d, r = self._d[i], self._rate[i]
        a = np.pi / d
        psi = self._yaw0[i] + r * (1.0 - np.cos(a * tau)) / a
        return psi, r * np.sin(a * tau), r * a * np.cos(a * tau)

    def speed(self, t):
        """Speed and its derivative."""
        i, tau = self._seg(t)
        d, v0, v1 = self._d[i], self._v0[i], self._v1[i]
        a = np.pi / d
        return (v0 + 0.5 * (v1 - v0) * (1.0 - np.cos(a * tau)),
                0.5 * (v1 - v0) * a * np.sin(a * tau))

    def pitch_roll(self, t):
        """Pitch, roll and their first derivatives."""
        p = self.profile
        t = np.asarray(t, dtype=float)
        wp, wr = 2 * np.pi / p.pitch_period, 2 * np.pi / p.roll_period
        return (p.pitch_amplitude * np.sin(wp * t), p.roll_amplitude * np.sin(wr * t),
                p.pitch_amplitude * wp * np.cos(wp * t), p.roll_amplitude * wr * np.cos(wr * t))

    def euler(self, t):
        pitch, roll, _, _ = self.pitch_roll(t)
        yaw, _, _ = self.yaw(t)
        return pitch, roll, yaw

    def C_b_n(self, t) -> np.ndarray:
        pitch, roll, yaw = self.euler(t)
        # Rz(yaw) Rx(pitch) Ry(roll) == intrinsic z-x-y
        ang = np.stack([np.atleast_1d(yaw), np.atleast_1d(pitch), np.atleast_1d(roll)], axis=-1)
        C = Rotation.from_euler("ZXY", ang).as_matrix()
        return C if np.ndim(t) else C[0]

    def v_n(self, t) -> np.ndarray:
        s, _ = self.speed(t)
        psi, _, _ = self.yaw(t)
        return np.stack([-s * np.sin(psi), s * np.cos(psi), np.zeros_like(psi)], axis=-1)

    def a_n(self, t) -> np.ndarray:
        s, sd = self.speed(t)
        psi, psid, _ = self.yaw(t)
        fwd = np.stack([-np.sin(psi), np.cos(psi), np.zeros_like(psi)], axis=-1)
        lat = np.stack([-np.cos(psi), -np.sin(psi), np.zeros_like(psi)], axis=-1)
        return np.asarray(sd)[..., None] * fwd + (np.asarray(s) * psid)[..., None] * lat

    def omega_nb_b(self, t) -> np.ndarray:
        """Body rate relative to the nav frame, from the Euler-angle rates."""
        pitch, roll, pd, rd = self.pitch_roll(t)
        _, yd, _ = self.yaw(t)
        cp, sp, cr, sr = np.cos(pitch), np.sin(pitch), np.cos(roll), np.sin(roll)
        # Ry(roll)^T [pd, 0, 0] + Ry(roll)^T Rx(pitch)^T [0, 0, yd] + [0, rd, 0]
        wx = cr * pd - sr * cp * yd
        wy = rd + sp * yd
        wz = sr * pd + cr * cp * yd
        return np.stack([wx, wy, wz], axis=-1)


@dataclass
class Truth:
    t: np.ndarray
    C_b_n: np.ndarray
    v_n: np.ndarray
    a_n: np.ndarray
    position: np.ndarray  # local east, north, up (m)
    euler: np.ndarray  # pitch, roll, yaw (rad)


def gen_truth(profile: TrajectoryProfile, dt: float, duration: float | None = None) -> Truth:
    """Truth sampled at ``t = 0, dt, 2 dt, ...`` up to ``duration``."""
    model = ProfileModel(profile)
    T = profile.duration if duration is None else duration
    n = int(round(T / dt))
    t = np.arange(n + 1) * dt
    v = model.v_n(t)
    pos = np.zeros_like(v)
    # trapezoid on the analytic velocity, fine enough for a plot track
    pos[1:] = np.cumsum(0.5 * (v[1:] + v[:-1]) * dt, axis=0)
    pitch, roll, yaw = model.euler(t)
    return Truth(t, model.C_b_n(t), v, model.a_n(t), pos, np.stack([pitch, roll, yaw], axis=-1))


def _C_n_n0(t, geo: GeoParams) -> np.ndarray:
    return Rotation.from_rotvec(np.outer(np.atleast_1d(t), earth_rate_n(geo))).as_matrix()


def C_b_b0_truth(model: ProfileModel, t, geo: GeoParams) -> np.ndarray:
    """Body attitude relative to the body frame frozen at t = 0."""
    C_n0_b0 = model.C_b_n(0.0).T
    return C_n0_b0 @ _C_n_n0(t, geo) @ model.C_b_n(np.atleast_1d(t))


@dataclass
class ImuData:
    t: np.ndarray
    gyro: np.ndarray
    accel: np.ndarray


@dataclass
class DvlData:
    t: np.ndarray
    v_b: np.ndarray
    error: np.ndarray
    spike: np.ndarray  # bool per epoch


def synthesize_imu(profile: TrajectoryProfile, err: ImuErrorModel, geo: GeoParams, dt: float,
                   duration: float | None = None, chunk: int = 20000) -> ImuData:
    """Gyro and accelerometer rows at ``t = dt, 2 dt, ...``; see module docstring."""
    model = ProfileModel(profile)
    T = profile.duration if duration is None else duration
    n = int(round(T / dt))
    t_end = np.arange(1, n + 1) * dt
    w_ie = earth_rate_n(geo)
    g_n = gravity_n(geo)
    gyro = np.empty((n, 3))
    accel = np.empty((n, 3))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        t0 = t_end[lo:hi] - dt
        w_sum = np.zeros((hi - lo, 3))
        f_sum = np.zeros((hi - lo, 3))
        for x, wgt in zip(_GL_NODES, _GL_WEIGHTS):
            tau = t0 + 0.5 * dt * (x + 1.0)
            C_n_b = np.swapaxes(model.C_b_n(tau), -1, -2)
            f_n = model.a_n(tau) + 2.0 * np.cross(w_ie, model.v_n(tau)) - g_n
            w_sum += 0.5 * wgt * (C_n_b @ w_ie + model.omega_nb_b(tau))
            f_sum += 0.5 * wgt * np.einsum("nij,nj->ni", C_n_b, f_n)
        gyro[lo:hi] = w_sum
        accel[lo:hi] = f_sum
    ss = np.random.SeedSequence(err.seed)
    rg_gyro, rg_acc = (np.random.default_rng(s) for s in ss.spawn(2))
    gyro += err.gyro_bias + err.gyro_arw / np.sqrt(dt) * rg_gyro.standard_normal((n, 3))
    accel += err.accel_bias + err.accel_noise / np.sqrt(dt) * rg_acc.standard_normal((n, 3))
    return ImuData(t_end, gyro, accel)


def synthesize_dvl(profile: TrajectoryProfile, err: DvlErrorModel, dt_d: float,
                   duration: float | None = None) -> DvlData:
    """Body-frame velocity at ``t = 0, dt_d, ...`` (``duration / dt_d`` rows) with mixture noise.

    Outlier flags, clean noise and outlier noise come from independent
    streams of the same seed, so a run with ``outlier_prob = 0`` shares its
    clean noise with the contaminated run.
    """
    model = ProfileModel(profile)
    T = profile.duration if duration is None else duration
    n = int(round(T / dt_d))
    t = np.arange(n) * dt_d
    v_b = np.einsum("nji,nj->ni", model.C_b_n(t), model.v_n(t))
    ss = np.random.SeedSequence(err.seed)
    rg_flag, rg_clean, rg_out = (np.random.default_rng(s) for s in ss.spawn(3))
    u = rg_flag.random(n)
    clean = err.noise_std * rg_clean.standard_normal((n, 3))
    big = err.outlier_std * rg_out.standard_normal((n, 3))
    spike = u < err.outlier_prob
    e = np.where(spike[:, None], big, clean)
    if not err.corrupt_first and n:
        spike[0] = False
        e[0] = 0.0
    return DvlData(t, v_b + e, e, spike)
