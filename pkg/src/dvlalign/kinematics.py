"""Rotation and Earth-model primitives shared by the alignment modules.

Conventions
-----------
* Navigation frame is East-North-Up (ENU).
* Quaternions are Hamilton, scalar first ``(w, x, y, z)``; ``dcm_from_quat(q)``
  is the matrix ``R`` with ``R v = q v q*``.
* DCMs map vectors from the subscript frame to the superscript frame, e.g.
  ``C_b_n @ v_b = v_n``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

EARTH_RATE = 7.292115e-5  # rad/s, WGS-84
DCM_TOL = 1e-6

# Somigliana normal gravity, WGS-84
_GE = 9.7803253359
_K = 0.00193185265241
_E2 = 0.00669437999013


def normal_gravity(latitude: float) -> float:
    """Normal gravity magnitude on the ellipsoid surface, m/s^2."""
    s2 = np.sin(latitude) ** 2
    return float(_GE * (1.0 + _K * s2) / np.sqrt(1.0 - _E2 * s2))


@dataclass(frozen=True)
class GeoParams:
    """Latitude (rad), gravity magnitude (m/s^2) and Earth rate (rad/s).

    ``gravity`` defaults to the normal gravity at ``latitude``.
    """

    latitude: float
    gravity: float | None = field(default=None)
    earth_rate: float = EARTH_RATE

    def __post_init__(self):
        if self.gravity is None:
            object.__setattr__(self, "gravity", normal_gravity(self.latitude))
        if not np.isfinite(self.latitude) or abs(self.latitude) > np.pi / 2:
            raise ValueError(f"latitude out of range: {self.latitude!r}")
        if not self.gravity > 0:
            raise ValueError(f"gravity must be positive, got {self.gravity!r}")
        if not self.earth_rate > 0:
            raise ValueError(f"earth_rate must be positive, got {self.earth_rate!r}")

    @classmethod
    def from_degrees(cls, latitude_deg: float, **kwargs) -> "GeoParams":
        return cls(np.radians(latitude_deg), **kwargs)


def skew(v) -> np.ndarray:
    """Cross-product matrix: ``skew(v) @ u == np.cross(v, u)``.

    Accepts a single vector of shape (3,) or a stack of shape (n, 3).
    """
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3))
    out[..., 0, 1] = -v[..., 2]
    out[..., 0, 2] = v[..., 1]
    out[..., 1, 0] = v[..., 2]
    out[..., 1, 2] = -v[..., 0]
    out[..., 2, 0] = -v[..., 1]
    out[..., 2, 1] = v[..., 0]
    return out


def dcm_from_rotvec(theta) -> np.ndarray:
    """Rodrigues formula for a rotation vector (or a stack of them).

    Below a norm of 1e-8 the trigonometric ratios are replaced by their
    second-order series.
    """
    theta = np.asarray(theta, dtype=float)
    n2 = np.einsum("...i,...i->...", theta, theta)
    n = np.sqrt(n2)
    small = n < 1e-8
    safe_n = np.where(small, 1.0, n)
    k1 = np.where(small, 1.0 - n2 / 6.0, np.sin(safe_n) / safe_n)
    k2 = np.where(small, 0.5 - n2 / 24.0, (1.0 - np.cos(safe_n)) / safe_n**2)
    S = skew(theta)
    S2 = S @ S
    return np.eye(3) + k1[..., None, None] * S + k2[..., None, None] * S2


def is_dcm(C, tol: float = DCM_TOL) -> bool:
    C = np.asarray(C, dtype=float)
    if C.shape != (3, 3) or not np.all(np.isfinite(C)):
        return False
    return bool(
        np.max(np.abs(C.T @ C - np.eye(3))) < tol and abs(np.linalg.det(C) - 1.0) < tol
    )


def orthonormalize(C) -> np.ndarray:
    """Nearest rotation matrix in the Frobenius sense."""
    U, _, Vt = np.linalg.svd(np.asarray(C, dtype=float))
    R = U @ Vt
    if np.linalg.det(R) < 0:
        U[:, -1] *= -1
        R = U @ Vt
    return R


def canonical_quat(q) -> np.ndarray:
    """Unit quaternion with non-negative scalar part."""
    q = np.asarray(q, dtype=float)
    q = q / np.linalg.norm(q)
    return -q if q[0] < 0 else q


def quat_multiply(p, q) -> np.ndarray:
    pw, pv = p[0], np.asarray(p[1:])
    qw, qv = q[0], np.asarray(q[1:])
    return np.concatenate(
        ([pw * qw - pv @ qv], pw * qv + qw * pv + np.cross(pv, qv))
    )


def dcm_from_quat(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_from_dcm(C) -> np.ndarray:
    """Shepperd's method; returns the canonical (w >= 0) unit quaternion.

    Raises
    ------
    ValueError
        If ``C`` is not a proper orthonormal matrix.
    """
    C = np.asarray(C, dtype=float)
    if not is_dcm(C):
        raise ValueError("input is not a valid direction cosine matrix")
    tr = np.trace(C)
    cands = np.array([tr, C[0, 0], C[1, 1], C[2, 2]])
    i = int(np.argmax(cands))
    if i == 0:
        w = 0.5 * np.sqrt(1.0 + tr)
        q = [w, (C[2, 1] - C[1, 2]) / (4 * w), (C[0, 2] - C[2, 0]) / (4 * w),
             (C[1, 0] - C[0, 1]) / (4 * w)]
    elif i == 1:
        x = 0.5 * np.sqrt(1.0 + 2 * C[0, 0] - tr)
        q = [(C[2, 1] - C[1, 2]) / (4 * x), x, (C[0, 1] + C[1, 0]) / (4 * x),
             (C[0, 2] + C[2, 0]) / (4 * x)]
    elif i == 2:
        y = 0.5 * np.sqrt(1.0 + 2 * C[1, 1] - tr)
        q = [(C[0, 2] - C[2, 0]) / (4 * y), (C[0, 1] + C[1, 0]) / (4 * y), y,
             (C[1, 2] + C[2, 1]) / (4 * y)]
    else:
        z = 0.5 * np.sqrt(1.0 + 2 * C[2, 2] - tr)
        q = [(C[1, 0] - C[0, 1]) / (4 * z), (C[0, 2] + C[2, 0]) / (4 * z),
             (C[1, 2] + C[2, 1]) / (4 * z), z]
    return canonical_quat(q)


def earth_rate_n(geo: GeoParams) -> np.ndarray:
    """Earth rotation rate resolved in ENU axes."""
    L = geo.latitude
    return np.array([0.0, geo.earth_rate * np.cos(L), geo.earth_rate * np.sin(L)])


def gravity_n(geo: GeoParams) -> np.ndarray:
    """Gravity vector resolved in ENU axes."""
    return np.array([0.0, 0.0, -geo.gravity])
