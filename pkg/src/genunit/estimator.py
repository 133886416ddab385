"""Discrete-time Extended Kalman Filter for the boiler states.

Measurements are the water level [m] and the saturation pressure expressed
in bar; the output Jacobian row for pressure is the analytic saturation
slope. Prediction propagates the covariance through the linearized RK4 map;
the update uses the Joseph form, and the covariance is symmetrized after
every step. Works on both the full 4-state model and the reduced 3-state
startup model (same equations, different sampling time).
"""

from dataclasses import dataclass, field

import numpy as np

from . import plant, thermo
from .errors import NumericalError, ValidationError
from .plant import IL_W, IT_W

# Noise covariances used by the startup filter: process on the three states
# [K^2, m^2, K^2], measurement on (level [m^2], pressure [bar^2]).
XQ_STARTUP = np.diag([1e-2, 1e-2, 1e-2])
XR_DEFAULT = np.diag([1e-3, 1e-3])
# Initial covariance as printed (row-listed, mildly asymmetric); it is
# symmetrized before use.
XP0_STARTUP_RAW = np.array([[1.5, 1e-3, 0.15],
                            [1e-5, 1e-3, 1e-5],
                            [0.15, 1e-3, 0.15]])
# Production-filter defaults (the study reports no 4-state values): modest
# process noise on temperatures/level, sensor-grade measurement noise.
XQ_PRODUCTION = np.diag([1e-2, 1e-6, 1e-2, 1e-2])
XR_PRODUCTION = np.diag([1e-6, 4e-4])


def symmetrized(P):
    return 0.5 * (np.asarray(P, dtype=float) + np.asarray(P, dtype=float).T)


@dataclass
class EkfState:
    """Estimate, covariance, and the filter's noise configuration."""

    x_hat: np.ndarray
    P: np.ndarray
    X_Q: np.ndarray
    X_R: np.ndarray

    def __post_init__(self):
        self.x_hat = np.asarray(self.x_hat, dtype=float)
        self.P = symmetrized(self.P)
        self.X_Q = np.asarray(self.X_Q, dtype=float)
        self.X_R = np.asarray(self.X_R, dtype=float)
        n = len(self.x_hat)
        if self.P.shape != (n, n) or self.X_Q.shape != (n, n):
            raise ValidationError("covariance dimensions mismatch")
        eig = np.linalg.eigvalsh(self.P).min()
        if eig < -1e-9 * max(1.0, np.abs(self.P).max()):
            raise ValidationError("initial covariance must be PSD")


def measure(x):
    """Measurement map g(x): level [m] and pressure [bar]."""
    return np.array([x[IL_W], thermo.p_sat(x[IT_W]) / 1e5])


def measurement_jacobian(x, n):
    C = np.zeros((2, n))
    C[0, IL_W] = 1.0
    C[1, IT_W] = thermo.dp_sat_dT(x[IT_W]) / 1e5
    return C


class BoilerEkf:
    """EKF instance bound to one control loop (full or reduced model)."""

    def __init__(self, params=None, dt=6.0, reduced=True, x0=None, P0=None,
                 X_Q=None, X_R=None):
        self.params = params or plant.nominal_params()
        self.dt = dt
        self.reduced = reduced
        n = 3 if reduced else 4
        if x0 is None:
            raise ValidationError("EKF needs an initial estimate")
        if P0 is None:
            P0 = XP0_STARTUP_RAW if reduced else np.eye(4)
        if X_Q is None:
            X_Q = XQ_STARTUP if reduced else XQ_PRODUCTION
        if X_R is None:
            X_R = XR_DEFAULT if reduced else XR_PRODUCTION
        self.state = EkfState(x_hat=np.asarray(x0, dtype=float),
                              P=P0, X_Q=X_Q, X_R=X_R)
        if len(self.state.x_hat) != n:
            raise ValidationError(f"estimate must have {n} states")

    @classmethod
    def from_measured_level(cls, level, T_init, params=None, dt=6.0,
                            reduced=True, **kw):
        """Initialization used on the plant: the measured level plus a
        prescribed initial value for both tube and water temperatures."""
        if reduced:
            x0 = np.array([T_init, level, T_init])
        else:
            x0 = np.array([T_init, level, T_init, T_init])
        return cls(params=params, dt=dt, reduced=reduced, x0=x0, **kw)

    def _project(self):
        """Clip the estimate into the physical domain (saturation-property
        range for temperatures, positive level), so a transient divergence
        cannot push the model evaluation out of range."""
        x = self.state.x_hat
        n = len(x)
        for i in (IT_W, 0) + ((3,) if n == 4 else ()):
            x[i] = min(max(x[i], thermo.T_MIN + 0.5), thermo.T_MAX - 0.5)
        x[IL_W] = min(max(x[IL_W], 1e-3), 2.0)

    def predict(self, u):
        """Time update: x <- f_RK4(x, u); P <- A P A' + X_Q."""
        st = self.state
        self._project()
        A, _, _ = plant.linearize(st.x_hat, u, self.dt, self.params,
                                  reduced=self.reduced)
        st.x_hat = plant.step_rk4(st.x_hat, u, self.dt, self.params,
                                  reduced=self.reduced)
        self._project()
        st.P = symmetrized(A @ st.P @ A.T + st.X_Q)
        return st

    def update(self, y):
        """Measurement update (Joseph form) on [level, pressure_bar]."""
        st = self.state
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise ValidationError("measurement must be finite")
        self._project()
        n = len(st.x_hat)
        C = measurement_jacobian(st.x_hat, n)
        S = C @ st.P @ C.T + st.X_R
        try:
            K = np.linalg.solve(S.T, (st.P @ C.T).T).T
        except np.linalg.LinAlgError:
            raise NumericalError("singular innovation covariance") from None
        innov = y - measure(st.x_hat)
        st.x_hat = st.x_hat + K @ innov
        I_KC = np.eye(n) - K @ C
        st.P = symmetrized(I_KC @ st.P @ I_KC.T + K @ st.X_R @ K.T)
        self._project()
        self.last_innovation = innov
        self.last_S = S
        return st

    def step(self, u, y):
        """Predict with the applied input, then update with the measurement."""
        self.predict(u)
        return self.update(y)

    @property
    def x_hat(self):
        return self.state.x_hat

    @property
    def P(self):
        return self.state.P
