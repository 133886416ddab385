"""EKF checks: covariance propagation, update exactness, convergence."""

import numpy as np
import pytest

from genunit import estimator, plant, thermo
from genunit.errors import ValidationError
from genunit.estimator import BoilerEkf, symmetrized
from genunit.plant import IL_W, IT_W


def startup_equilibrium(params):
    x, u = plant.equilibrium(400.0, 0.7, 0.05, 0.0, params, reduced=True)
    return x, u


class TestPredict:
    def test_linear_covariance_propagation(self, params):
        # With zero process noise the covariance follows A P A' exactly.
        x, u = startup_equilibrium(params)
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x,
                        P0=np.eye(3) * 0.5, X_Q=np.zeros((3, 3)))
        A, _, _ = plant.linearize(x, u, 6.0, params, reduced=True)
        ekf.predict(u)
        assert ekf.P == pytest.approx(A @ (0.5 * np.eye(3)) @ A.T, abs=1e-12)

    def test_trace_grows_under_identity_dynamics(self):
        # pure random-walk model: P grows by X_Q each predict
        class _Id(BoilerEkf):
            pass

        ekf = BoilerEkf(dt=6.0, reduced=True,
                        x0=np.array([400.0, 0.7, 395.0]),
                        P0=np.eye(3), X_Q=0.1 * np.eye(3))
        params = ekf.params
        x_eq, u_eq = startup_equilibrium(params)
        ekf.state.x_hat = x_eq
        tr0 = np.trace(ekf.P)
        ekf.predict(u_eq)
        assert np.trace(ekf.P) > tr0  # X_Q positive definite

    def test_monte_carlo_moment_matching(self, params, rng):
        # one-step nonlinear propagation vs a particle-cloud oracle
        x, u = startup_equilibrium(params)
        P0 = np.diag([4.0, 1e-6, 1.0])
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x, P0=P0,
                        X_Q=np.zeros((3, 3)))
        ekf.predict(u)
        n_mc = 20000
        cloud = rng.multivariate_normal(x, P0, size=n_mc)
        prop = np.array([plant.step_rk4(xi, u, 6.0, params, reduced=True)
                         for xi in cloud])
        mean_mc = prop.mean(axis=0)
        cov_mc = np.cov(prop.T)
        scale = np.sqrt(np.diag(P0)) + 1e-9
        assert np.abs(ekf.x_hat - mean_mc) / scale == pytest.approx(
            np.zeros(3), abs=0.05)
        denom = np.outer(scale, scale)
        assert np.abs(ekf.P - cov_mc) / denom == pytest.approx(
            np.zeros((3, 3)), abs=0.08)


class TestUpdate:
    def test_perfect_init_zero_noise_tracks_truth(self, params):
        x, u = startup_equilibrium(params)
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x.copy(),
                        P0=1e-6 * np.eye(3), X_Q=np.zeros((3, 3)))
        truth = x.copy()
        for _ in range(50):
            truth = plant.step_rk4(truth, u, 6.0, params, reduced=True)
            ekf.predict(u)
            ekf.update(estimator.measure(truth))
            assert ekf.x_hat == pytest.approx(truth, abs=1e-6)

    def test_level_channel_is_exact_kf(self, params):
        # the level row of the output map is identity: a level-only update
        # moves the level estimate by the standard scalar KF gain
        x, _ = startup_equilibrium(params)
        P0 = np.diag([1.0, 0.01, 1.0])
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x.copy(), P0=P0,
                        X_R=np.diag([1e-4, 1e12]))  # pressure uninformative
        y = estimator.measure(x)
        y[0] += 0.02
        ekf.update(y)
        gain = 0.01 / (0.01 + 1e-4)
        assert ekf.x_hat[IL_W] - x[IL_W] == pytest.approx(0.02 * gain,
                                                          rel=1e-6)

    def test_singular_innovation_raises(self, params):
        x, _ = startup_equilibrium(params)
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x,
                        P0=np.zeros((3, 3)), X_R=np.zeros((2, 2)))
        with pytest.raises(Exception):
            ekf.update(estimator.measure(x))

    def test_nonfinite_measurement_rejected(self, params):
        x, _ = startup_equilibrium(params)
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x)
        with pytest.raises(ValidationError):
            ekf.update(np.array([np.nan, 10.0]))


class TestConvergence:
    def test_biased_init_converges_on_noisy_run(self, params, rng):
        # 10%-biased initialization on a noisy simulation: the normalized
        # error norm falls below 1% of the state scale within 100 steps.
        x_true, u = plant.equilibrium(420.0, 0.7, 0.06, 0.0, params,
                                      reduced=True)
        x0_hat = x_true * 1.10
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x0_hat)
        scale = np.linalg.norm(plant.STATE_SCALE_REDUCED)
        ok_step = None
        x = x_true.copy()
        for h in range(100):
            x = plant.step_rk4(x, u, 6.0, params, reduced=True)
            y = estimator.measure(x) + rng.multivariate_normal(
                np.zeros(2), ekf.state.X_R)
            ekf.predict(u)
            ekf.update(y)
            if np.linalg.norm(ekf.x_hat - x) < 0.01 * scale:
                ok_step = h
                break
        assert ok_step is not None

    def test_covariance_psd_over_long_run(self, params, rng):
        x, u = startup_equilibrium(params)
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x.copy())
        truth = x.copy()
        for h in range(2000):
            du = u + rng.normal(0, 1e-3, 3) * np.array([1, 0.1, 1])
            du = np.clip(du, 0.0, None)
            truth = plant.step_rk4(truth, du, 6.0, params, reduced=True)
            truth[IT_W] = np.clip(truth[IT_W], 300.0, 500.0)
            ekf.predict(du)
            y = estimator.measure(truth) + rng.multivariate_normal(
                np.zeros(2), ekf.state.X_R)
            ekf.update(y)
            assert np.linalg.eigvalsh(ekf.P).min() >= -1e-12

    def test_innovation_whiteness_band(self, params, rng):
        # matched model: with process and measurement noise drawn from the
        # filter's own covariances, the normalized innovations squared
        # average within the chi-square 95% band for 2-dof innovations
        x, u = startup_equilibrium(params)
        X_Q = np.diag([1e-4, 1e-8, 1e-4])  # physically small, matched
        X_R = np.diag([1e-6, 1e-6])
        ekf = BoilerEkf(params, dt=6.0, reduced=True, x0=x.copy(),
                        P0=X_Q.copy(), X_Q=X_Q, X_R=X_R)
        truth = x.copy()
        nis = []
        for h in range(400):
            truth = plant.step_rk4(truth, u, 6.0, params, reduced=True)
            truth = truth + rng.multivariate_normal(np.zeros(3), X_Q)
            ekf.predict(u)
            y = estimator.measure(truth) + rng.multivariate_normal(
                np.zeros(2), X_R)
            ekf.update(y)
            innov = ekf.last_innovation
            nis.append(innov @ np.linalg.solve(ekf.last_S, innov))
        avg = np.mean(nis[50:])
        # E[NIS] = 2 for two measurements; band for the 350-sample average
        assert 2.0 - 0.35 < avg < 2.0 + 0.35


class TestInit:
    def test_printed_covariance_symmetrized_psd(self):
        P = symmetrized(estimator.XP0_STARTUP_RAW)
        assert np.allclose(P, P.T)
        assert np.linalg.eigvalsh(P).min() > 0

    def test_from_measured_level(self, params):
        ekf = BoilerEkf.from_measured_level(0.695, 310.0, params)
        assert ekf.x_hat[IL_W] == 0.695
        assert ekf.x_hat[0] == 310.0 and ekf.x_hat[IT_W] == 310.0

    def test_dimension_validation(self, params):
        with pytest.raises(ValidationError):
            BoilerEkf(params, reduced=True, x0=np.zeros(4))
