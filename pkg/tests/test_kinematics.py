import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dvlalign.kinematics import (
    EARTH_RATE,
    GeoParams,
    canonical_quat,
    dcm_from_quat,
    dcm_from_rotvec,
    earth_rate_n,
    gravity_n,
    is_dcm,
    normal_gravity,
    orthonormalize,
    quat_from_dcm,
    quat_multiply,
    skew,
)

finite = st.floats(-10, 10, allow_nan=False)
vec3 = arrays(float, 3, elements=finite)
rotvec = arrays(float, 3, elements=st.floats(-np.pi / np.sqrt(3), np.pi / np.sqrt(3)))


def quat_exp(theta):
    """Rotation matrix via the quaternion exponential, as an independent oracle."""
    a = np.linalg.norm(theta)
    if a == 0:
        return np.eye(3)
    w = np.cos(a / 2)
    x, y, z = np.sin(a / 2) * theta / a
    # R v = q (0, v) q*, column by column
    R = np.empty((3, 3))
    q = np.array([w, x, y, z])
    qc = q * [1, -1, -1, -1]
    for i, e in enumerate(np.eye(3)):
        R[:, i] = quat_multiply(quat_multiply(q, np.r_[0.0, e]), qc)[1:]
    return R


class TestSkew:
    def test_zero(self):
        assert np.array_equal(skew([0, 0, 0]), np.zeros((3, 3)))

    def test_unit_cross(self):
        assert np.allclose(skew([0, 0, 1]) @ [1, 0, 0], [0, 1, 0])

    def test_self_cross_vanishes(self):
        v = np.array([1.0, 2.0, 3.0])
        assert np.allclose(skew(v) @ v, 0.0)

    @given(vec3, vec3)
    def test_matches_cross_product(self, v, u):
        S = skew(v)
        assert np.allclose(S @ u, np.cross(v, u), atol=1e-12)
        assert np.array_equal(S.T, -S)

    def test_batched(self, rng):
        v = rng.standard_normal((5, 3))
        S = skew(v)
        assert S.shape == (5, 3, 3)
        for i in range(5):
            assert np.array_equal(S[i], skew(v[i]))


class TestRodrigues:
    def test_zero_is_identity(self):
        assert np.array_equal(dcm_from_rotvec([0, 0, 0]), np.eye(3))

    def test_quarter_turn_about_z(self):
        expect = np.array([[0, -1, 0], [1, 0, 0], [0, 0, 1]], float)
        assert np.allclose(dcm_from_rotvec([0, 0, np.pi / 2]), expect, atol=1e-15)

    def test_quaternion_exponential_oracle(self):
        theta = np.array([0.3, -0.2, 0.1])
        assert np.max(np.abs(dcm_from_rotvec(theta) - quat_exp(theta))) < 1e-12

    @given(rotvec)
    def test_agrees_with_oracle(self, theta):
        assert np.max(np.abs(dcm_from_rotvec(theta) - quat_exp(theta))) < 1e-12

    def test_small_angle_branch_is_continuous(self):
        axis = np.array([1.0, -2.0, 0.5]) / np.linalg.norm([1.0, -2.0, 0.5])
        for angle in (0.999e-8, 1.001e-8):
            th = angle * axis
            S = skew(th)
            assert np.max(np.abs(dcm_from_rotvec(th) - (np.eye(3) + S + 0.5 * S @ S))) < 1e-16

    @given(rotvec)
    def test_orthonormal_and_inverse(self, theta):
        C = dcm_from_rotvec(theta)
        assert np.max(np.abs(C.T @ C - np.eye(3))) < 1e-9
        assert abs(np.linalg.det(C) - 1) < 1e-9
        assert np.max(np.abs(C @ dcm_from_rotvec(-theta) - np.eye(3))) < 1e-12

    def test_batched_matches_single(self, rng):
        th = rng.standard_normal((4, 3))
        out = dcm_from_rotvec(th)
        for i in range(4):
            assert np.array_equal(out[i], dcm_from_rotvec(th[i]))


class TestQuaternion:
    def test_identity(self):
        assert np.array_equal(quat_from_dcm(np.eye(3)), [1, 0, 0, 0])

    def test_half_turn_about_z(self):
        C = np.diag([-1.0, -1.0, 1.0])
        assert np.allclose(quat_from_dcm(C), [0, 0, 0, 1], atol=1e-15)

    def test_round_trip_seeded(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(1000):
            axis = rng.standard_normal(3)
            angle = rng.uniform(0, np.pi)
            C = dcm_from_rotvec(angle * axis / np.linalg.norm(axis))
            q = quat_from_dcm(C)
            assert q[0] >= 0
            assert abs(np.linalg.norm(q) - 1) < 1e-9
            worst = max(worst, np.max(np.abs(dcm_from_quat(q) - C)))
        assert worst < 1e-12

    def test_rejects_non_orthonormal(self):
        with pytest.raises(ValueError):
            quat_from_dcm(np.diag([1.0, 1.0, 1.1]))
        with pytest.raises(ValueError):
            quat_from_dcm(np.diag([1.0, 1.0, -1.0]))

    @given(rotvec, rotvec)
    def test_product_composes_rotations(self, a, b):
        qa, qb = quat_from_dcm(dcm_from_rotvec(a)), quat_from_dcm(dcm_from_rotvec(b))
        C = dcm_from_quat(quat_multiply(qa, qb))
        assert np.allclose(C, dcm_from_rotvec(a) @ dcm_from_rotvec(b), atol=1e-12)

    def test_sign_canonicalization(self):
        q = np.array([-0.5, 0.5, -0.5, 0.5])
        assert np.array_equal(canonical_quat(q), -q)
        assert np.allclose(dcm_from_quat(q), dcm_from_quat(-q))


class TestDcmHelpers:
    def test_is_dcm(self):
        assert is_dcm(np.eye(3))
        assert not is_dcm(2 * np.eye(3))
        assert not is_dcm(np.full((3, 3), np.nan))

    def test_orthonormalize_recovers_rotation(self, rng):
        C = dcm_from_rotvec([0.4, 0.1, -0.7])
        noisy = C + 1e-6 * rng.standard_normal((3, 3))
        R = orthonormalize(noisy)
        assert np.max(np.abs(R.T @ R - np.eye(3))) < 1e-14
        assert np.max(np.abs(R - C)) < 1e-5


class TestEarthModel:
    def test_pole_and_equator(self):
        assert np.allclose(earth_rate_n(GeoParams(np.pi / 2)), [0, 0, EARTH_RATE], atol=1e-20)
        assert np.allclose(earth_rate_n(GeoParams(0.0)), [0, EARTH_RATE, 0])

    def test_site_latitude(self):
        L = np.radians(32.057313)
        w = earth_rate_n(GeoParams(L))
        assert np.array_equal(w, [0.0, EARTH_RATE * np.cos(L), EARTH_RATE * np.sin(L)])

    def test_gravity_vector(self):
        g = gravity_n(GeoParams(0.3, gravity=9.8))
        assert np.array_equal(g, [0.0, 0.0, -9.8])
        assert np.linalg.norm(g) == 9.8

    def test_normal_gravity_values(self):
        assert normal_gravity(0.0) == pytest.approx(9.7803253359, abs=1e-10)
        assert normal_gravity(np.pi / 2) == pytest.approx(9.8321849378, abs=1e-8)
        assert GeoParams(0.5).gravity == normal_gravity(0.5)

    @pytest.mark.parametrize("kw", [dict(latitude=2.0), dict(latitude=0.1, gravity=-1.0),
                                    dict(latitude=0.1, earth_rate=0.0)])
    def test_invalid_params(self, kw):
        with pytest.raises(ValueError):
            GeoParams(**kw)
