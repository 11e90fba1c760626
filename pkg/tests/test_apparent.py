import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.integrate import quad_vec

from dvlalign.apparent import evaluate, gamma, phi_matrix, xi_matrix
from dvlalign.kinematics import EARTH_RATE, GeoParams, dcm_from_rotvec, earth_rate_n, gravity_n
from dvlalign.robust import RobustApparentVelocityFilter
from dvlalign.strapdown import RotationState, update_nav_dcm
from dvlalign.vectors import alpha_increment
from simdata import dataset, vector_chain

GEO = GeoParams.from_degrees(32.057313)
rotvec = arrays(float, 3, elements=st.floats(-1.8, 1.8))


def true_alpha(t, geo=GEO):
    w, g = earth_rate_n(geo), gravity_n(geo)
    val, _ = quad_vec(lambda s: dcm_from_rotvec(w * s) @ g, 0.0, t, epsabs=1e-10)
    return val


class TestGamma:
    def test_origin(self):
        assert np.array_equal(gamma(0.0, EARTH_RATE), [1.0, 0.0, 0.0, 1.0])

    def test_quarter_period(self):
        t = np.pi / (2 * EARTH_RATE)
        assert np.allclose(gamma(t, EARTH_RATE), [0.0, 1.0, t, 1.0], rtol=0, atol=1e-12)

    def test_200s(self):
        wt = 7.292115e-5 * 200
        assert np.allclose(wt, 0.01458423)
        assert np.array_equal(gamma(200.0, 7.292115e-5), [np.cos(wt), np.sin(wt), 200.0, 1.0])

    def test_vectorized_unit_circle(self):
        G = gamma(np.linspace(0, 1e5, 50), EARTH_RATE)
        assert G.shape == (50, 4)
        assert np.max(np.abs(G[:, 0] ** 2 + G[:, 1] ** 2 - 1)) < 1e-12


class TestPhi:
    def test_equator(self):
        geo = GeoParams(0.0, gravity=9.8)
        a = 9.8 / geo.earth_rate
        expect = [[a, 0, 0, -a], [0, 0, 0, 0], [0, -a, 0, 0]]
        assert np.allclose(phi_matrix(geo), expect, rtol=1e-15, atol=1e-12)

    def test_vanishes_at_start(self):
        for lat in (-1.2, 0.0, 0.3, GEO.latitude, np.pi / 2):
            assert np.array_equal(phi_matrix(GeoParams(lat)) @ gamma(0.0, EARTH_RATE),
                                  np.zeros(3))

    def test_gravity_sign_consistent(self):
        # early on the reference vector is g^n t
        t = 1e-3
        a = evaluate(phi_matrix(GEO), t, GEO.earth_rate)
        assert np.allclose(a / t, gravity_n(GEO), rtol=0, atol=1e-4)

    def test_matches_recursion_600s(self):
        s = RotationState.initial(0.005, 1.0)
        a = np.zeros(3)
        Phi = phi_matrix(GEO)
        worst = 0.0
        for M in range(1, 601):
            a = a + alpha_increment(s.C_n_n0, GEO, 1.0)
            s = update_nav_dcm(s, GEO)
            worst = max(worst, np.max(np.abs(a - evaluate(Phi, float(M), GEO.earth_rate))))
        assert worst < 1e-3

    def test_model_validity_against_quadrature(self):
        Phi = phi_matrix(GEO)
        for t in (10.0, 60.0, 200.0, 450.0, 600.0):
            ref = true_alpha(t)
            rel = np.linalg.norm(evaluate(Phi, t, GEO.earth_rate) - ref) / np.linalg.norm(ref)
            assert rel < 1e-3


class TestEvaluate:
    def test_origin_sums_outer_columns(self, rng):
        X = rng.standard_normal((3, 4))
        assert np.array_equal(evaluate(X, 0.0, EARTH_RATE), X[:, 0] + X[:, 3])

    @given(rotvec, st.floats(0, 600))
    def test_rotation_equivariance(self, th, t):
        C = dcm_from_rotvec(th)
        lhs = evaluate(xi_matrix(C, GEO), t, GEO.earth_rate)
        rhs = C @ evaluate(phi_matrix(GEO), t, GEO.earth_rate)
        assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-9)

    def test_batched(self):
        t = np.array([0.0, 10.0, 100.0])
        out = evaluate(phi_matrix(GEO), t, GEO.earth_rate)
        assert out.shape == (3, 3)
        for i, ti in enumerate(t):
            assert np.allclose(out[i], evaluate(phi_matrix(GEO), ti, GEO.earth_rate),
                               rtol=1e-15, atol=1e-12)


def _fit_clean(process_var):
    ds = dataset(0, 200.0, noisy_imu=False, noisy_dvl=False)
    beta, _, _ = vector_chain(ds, 200)
    t = np.arange(1, 201, dtype=float)
    f = RobustApparentVelocityFilter(earth_rate=ds.geo.earth_rate, meas_var=0.01,
                                     process_var=process_var, initial_var=1e10).fit(t, beta)
    return f, t, beta


@pytest.mark.xfail(strict=True, reason="random-walk coefficients lag: 5.14e-3 at epoch 101")
def test_running_reconstruction_after_100_epochs_default_q():
    f, _, beta = _fit_clean(1e-6)
    assert np.max(np.linalg.norm(f.reconstructed_[100:] - beta[100:], axis=1)) < 5e-3


def test_running_reconstruction_converges():
    f, _, beta = _fit_clean(1e-6)
    err = np.linalg.norm(f.reconstructed_ - beta, axis=1)
    assert err[100:].max() < 6e-3
    assert err[-1] < 2e-3
    assert np.all(np.diff(err[100:]) < 0)


def test_constant_coefficients_reproduce_clean_observations():
    f, t, beta = _fit_clean(0.0)
    assert np.max(np.linalg.norm(f.predict(t[100:]) - beta[100:], axis=1)) < 5e-3
