"""Attitude determination from accumulated vector pairs.

The optimal quaternion ``q`` with ``beta = R(q) @ alpha`` minimizes
``q^T K q`` over unit quaternions, where ``K`` sums
``(L(beta) - Rt(alpha))^T (L(beta) - Rt(alpha))`` over all pairs. ``L`` and
``Rt`` are the left and right multiplication matrices of the pure
quaternions built from the two vectors.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .exceptions import NumericalError, UnderdeterminedError
from .kinematics import canonical_quat, dcm_from_quat, skew

GIMBAL_MARGIN = 1e-6


class GimbalLockWarning(RuntimeWarning):
    pass


def quat_left_matrix(v) -> np.ndarray:
    """Matrix of ``q -> (0, v) * q``."""
    v = np.asarray(v, dtype=float)
    M = np.zeros((4, 4))
    M[0, 1:] = -v
    M[1:, 0] = v
    M[1:, 1:] = skew(v)
    return M


def quat_right_matrix(v) -> np.ndarray:
    """Matrix of ``q -> q * (0, v)``."""
    v = np.asarray(v, dtype=float)
    M = np.zeros((4, 4))
    M[0, 1:] = -v
    M[1:, 0] = v
    M[1:, 1:] = -skew(v)
    return M


@dataclass(frozen=True)
class KMatrix:
    K: np.ndarray
    count: int = 0

    @classmethod
    def zero(cls) -> "KMatrix":
        return cls(np.zeros((4, 4)), 0)


def accumulate(K: KMatrix, beta, alpha) -> KMatrix:
    A = quat_left_matrix(beta) - quat_right_matrix(alpha)
    Kn = K.K + A.T @ A
    return KMatrix(0.5 * (Kn + Kn.T), K.count + 1)


def jacobi_eigh(A, tol: float = 1e-13, max_sweeps: int = 100):
    """Eigen-decomposition of a small symmetric matrix by cyclic Jacobi rotations.

    Sweeps stop once every off-diagonal entry is below ``tol * ||A||_inf``.

    Returns
    -------
    w : ndarray
        Eigenvalues in ascending order.
    V : ndarray
        Orthonormal eigenvectors as columns, matching ``w``.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    thresh = tol * max(np.max(np.sum(np.abs(A), axis=1)), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.abs(A - np.diag(np.diag(A)))
        if off.max() < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < np.finfo(float).tiny:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                J = np.eye(n)
                J[p, p] = J[q, q] = c
                J[p, q] = s
                J[q, p] = -s
                A = J.T @ A @ J
                A[p, q] = A[q, p] = 0.0
                V = V @ J
    else:
        off = np.abs(A - np.diag(np.diag(A)))
        if off.max() >= thresh:
            raise NumericalError("Jacobi iteration did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


@dataclass(frozen=True)
class AttitudeSolution:
    q: np.ndarray
    C_n0_b0: np.ndarray
    min_eigenvalue: float
    eigen_gap: float


def solve(K: KMatrix, gap_tol: float = 1e-9) -> AttitudeSolution:
    """Quaternion ``q_n0_b0`` as the eigenvector of the smallest eigenvalue of ``K``.

    Raises
    ------
    UnderdeterminedError
        With fewer than two pairs, or when the two smallest eigenvalues are
        within ``gap_tol * trace(K)`` of each other.
    """
    if K.count < 2:
        raise UnderdeterminedError(f"need at least 2 vector pairs, have {K.count}")
    w, V = jacobi_eigh(K.K)
    scale = max(np.trace(K.K), np.finfo(float).tiny)
    gap = w[1] - w[0]
    if gap <= gap_tol * scale:
        raise UnderdeterminedError("vector pairs are (nearly) collinear")
    q = canonical_quat(V[:, 0])
    return AttitudeSolution(q, dcm_from_quat(q), float(w[0]), float(gap))


def current_attitude(C_n0_b0, C_n_n0, C_b_b0) -> np.ndarray:
    """Body-to-nav DCM at the current time from the alignment DCM and the two propagated DCMs."""
    return np.asarray(C_n_n0).T @ np.asarray(C_n0_b0).T @ np.asarray(C_b_b0)


def dcm_from_euler(pitch: float, roll: float, yaw: float) -> np.ndarray:
    """Body (right-forward-up) to ENU DCM, ``Rz(yaw) @ Rx(pitch) @ Ry(roll)``.

    Yaw is positive counter-clockwise about Up, zero when the body forward
    axis points North.
    """
    cp, sp = np.cos(pitch), np.sin(pitch)
    cr, sr = np.cos(roll), np.sin(roll)
    cy, sy = np.cos(yaw), np.sin(yaw)
    Rz = np.array([[cy, -sy, 0.0], [sy, cy, 0.0], [0.0, 0.0, 1.0]])
    Rx = np.array([[1.0, 0.0, 0.0], [0.0, cp, -sp], [0.0, sp, cp]])
    Ry = np.array([[cr, 0.0, sr], [0.0, 1.0, 0.0], [-sr, 0.0, cr]])
    return Rz @ Rx @ Ry


def euler_from_dcm(C):
    """Inverse of :func:`dcm_from_euler`: ``(pitch, roll, yaw)`` in radians.

    Warns with :class:`GimbalLockWarning` when pitch is within 1e-6 rad of
    +-90 degrees, where roll and yaw are not separable.
    """
    C = np.asarray(C, dtype=float)
    pitch = float(np.arcsin(np.clip(C[2, 1], -1.0, 1.0)))
    if abs(pitch) > np.pi / 2 - GIMBAL_MARGIN:
        warnings.warn("pitch at +-90 deg; roll/yaw split is arbitrary", GimbalLockWarning,
                      stacklevel=2)
    roll = float(np.arctan2(-C[2, 0], C[2, 2]))
    yaw = float(np.arctan2(-C[0, 1], C[1, 1]))
    if yaw <= -np.pi:
        yaw += 2 * np.pi
    return pitch, roll, yaw


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    a = np.asarray(a, dtype=float)
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return np.where(w == -np.pi, np.pi, w)
