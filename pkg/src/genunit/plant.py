"""Continuous-time nonlinear models of the generation unit.

Fire-tube boiler (4 states: burner-tube temperature, water level, water
temperature, CHP-exhaust-tube temperature), the downstream steam header
(mass conservation + compressible Bernoulli balance), the static CHP maps,
the EN-12952-3 thermal-stress rate bound, classical RK4 discretization and
Jacobian linearization of the discrete map.

The plant parameters of the original installation are confidential; this
module ships a documented nominal set sized for a three-pass fire-tube
boiler at 10 bar nominal pressure and 0.35 kg/s maximum steam flow, so that
every quantitative test in the repository is self-consistent.

All operations are pure functions of (state, input, parameters) and are safe
to call concurrently.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from . import thermo
from .errors import ConstraintError, NumericalError, ValidationError

# State vector order (full model). The reduced startup model drops T_t_chp.
IT_GAS, IL_W, IT_W, IT_CHP = 0, 1, 2, 3
# Input vector order: feedwater, burner gas, steam outflow, u_ex * H_ex.
IQ_F, IQ_G, IQ_S, IV_EX = 0, 1, 2, 3


@dataclass(frozen=True)
class BoilerParams:
    """Physical and geometric constants of the boiler/header model.

    Tube masses are effective lumped values (they multiply the shared
    specific heat c_p). theta = (V_H, A_B, A_H, eta_B, beta) is the
    uncertain subset refined by identification.
    """

    M_t_gas: float = 240.0    # kg, burner-tube lumped mass
    M_t_chp: float = 120.0    # kg, CHP-exhaust-tube lumped mass
    c_p: float = 4186.0       # J/(kg K)
    c_v: float = 3800.0       # J/(kg K)
    beta: float = 15000.0     # W/K, metal->water heat transfer
    eta_B: float = 0.90       # burner efficiency
    eta_ex: float = 0.60      # exhaust-recovery rate
    c_LHV: float = 50.0e6     # J/kg, natural gas lower heating value
    rho_w: float = 900.0      # kg/m^3, liquid water (constant)
    r: float = 0.7            # m, shell radius
    L: float = 2.5            # m, shell length
    T_f: float = 333.0        # K, feedwater temperature
    V_H: float = 1.0          # m^3, steam-header (conduct) volume
    A_B: float = 8.0e-4       # m^2, boiler-exit conduit area
    A_H: float = 1.2e-3       # m^2, header conduit area

    def __post_init__(self):
        for name in ("M_t_gas", "M_t_chp", "c_p", "c_v", "beta", "c_LHV",
                     "rho_w", "r", "L", "T_f", "V_H", "A_B", "A_H"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"parameter {name} must be positive")
        for name in ("eta_B", "eta_ex"):
            v = getattr(self, name)
            if not (0.0 < v < 1.0):
                raise ValidationError(
                    f"efficiency {name}={v} must lie strictly in (0, 1)")

    def water_volume(self, l_w):
        """Water volume [m^3] from the linearized shell geometry."""
        return 2.0 * self.r * self.L * l_w

    @property
    def level_area(self):
        """dV_w/dl_w [m^2]."""
        return 2.0 * self.r * self.L


@dataclass(frozen=True)
class OperatingBounds:
    """Operating ranges of the boiler and CHP variables."""

    q_f_max: float = 0.35       # kg/s
    q_g_min: float = 0.0035     # kg/s (12.5% of max)
    q_g_max: float = 0.028      # kg/s
    q_s_min: float = 0.07       # kg/s, minimum steam in production
    q_s_max: float = 0.35       # kg/s
    p_min: float = 9.5e5        # Pa
    p_max: float = 10.5e5       # Pa
    l_nom: float = 0.7          # m
    l_min: float = 0.7 * 0.995  # m  (+-0.5% band)
    l_max: float = 0.7 * 1.005  # m
    P_e_min: float = 0.6e6      # W, CHP at 50%
    P_e_max: float = 1.2e6      # W


@dataclass(frozen=True)
class StressParams:
    """EN-12952-3 combined pressure/thermal stress parameters.

    beta_p = 0.51 and beta_T = 2 are the standard concentration factors.
    """

    beta_p: float = 0.51
    beta_T: float = 2.0
    E: float = 1.82e11        # Pa, Young's modulus
    nu: float = 0.3           # Poisson ratio
    alpha: float = 1.35e-5    # 1/K, thermal expansion
    rho_m: float = 7850.0     # kg/m^3
    k_m: float = 45.0         # W/(m K)
    c_p_m: float = 510.0      # J/(kg K)
    s: float = 0.016          # m, wall thickness
    d_in: float = 1.4         # m, internal diameter
    phi_f: float = 1.0        # shape factor
    sigma_max: float = 27.0e6 # Pa, allowable combined stress
    p0: float = 2339.3        # Pa, pressure at the start of pressurization

    def __post_init__(self):
        for name in ("E", "alpha", "rho_m", "k_m", "c_p_m", "s", "d_in",
                     "phi_f", "sigma_max"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"stress parameter {name} must be positive")
        if not (0.0 < self.nu < 0.5):
            raise ValidationError("Poisson ratio must lie in (0, 0.5)")


@dataclass(frozen=True)
class ChpStaticMap:
    """Identified affine input/output behaviour of the CHP.

    In production the pair (gas flow, exhaust enthalpy flow) is affine in the
    produced electric power; the starting modes burn constant gas with no
    recoverable exhaust.
    """

    P_int: float = 5.0e4      # W, power intercept of the gas map
    gamma_q: float = 1.8196e7 # W per kg/s, gas gain
    gamma_h: float = 0.95     # exhaust enthalpy per unit electric power
    q_g_cs: float = 0.010     # kg/s, cold-start gas flow
    q_g_hs: float = 0.006     # kg/s, hot-start gas flow
    P_e_min: float = 0.6e6    # W
    P_e_max: float = 1.2e6    # W

    def __post_init__(self):
        if self.gamma_q <= 0 or self.gamma_h <= 0:
            raise ValidationError("CHP map gains must be positive")


@dataclass(frozen=True)
class BoilerInput:
    """Manipulable inputs and measured disturbances of the boiler."""

    q_f: float = 0.0      # kg/s feedwater
    q_g_B: float = 0.0    # kg/s burner gas
    q_s_B: float = 0.0    # kg/s steam outflow
    u_ex: int = 0         # interlink valve state
    H_ex: float = 0.0     # W, CHP exhaust enthalpy flow

    def vector(self):
        return np.array([self.q_f, self.q_g_B, self.q_s_B,
                         self.u_ex * self.H_ex])


def nominal_params():
    return BoilerParams()


def nominal_bounds():
    return OperatingBounds()


def nominal_stress_params():
    return StressParams()


def nominal_chp_map():
    return ChpStaticMap()


# Per-state scales used for weight normalization and estimator error norms.
STATE_SCALE_FULL = np.array([600.0, 1.4, 480.0, 600.0])
STATE_SCALE_REDUCED = np.array([600.0, 1.4, 480.0])
# Input scales in plant order (q_f, q_g, q_s, v_ex).
INPUT_SCALE_FULL = np.array([0.35, 0.028, 0.35, 1.14e6])


def _dh_s_dT(T, h=1e-3):
    return (thermo.h_s(T + h) - thermo.h_s(T - h)) / (2.0 * h)


def _rhs_terms(x, u, p, reduced):
    """Common unpacking; returns (f tuple, water energy denominator)."""
    if reduced:
        T_tg, l_w, T_w = x[0], x[1], x[2]
        T_tchp = T_w
        v_ex = 0.0
    else:
        T_tg, l_w, T_w, T_tchp = x[0], x[1], x[2], x[3]
        v_ex = u[IV_EX]
    q_f, q_g, q_s = u[IQ_F], u[IQ_G], u[IQ_S]

    D = p.rho_w * p.water_volume(l_w) * p.c_v
    q_burner = p.eta_B * p.c_LHV * q_g
    heat_gas = p.beta * (T_tg - T_w)
    heat_chp = 0.0 if reduced else p.beta * (T_tchp - T_w)

    f_tg = (q_burner - heat_gas) / (p.M_t_gas * p.c_p)
    f_l = (q_f - q_s) / p.level_area
    f_w = (heat_gas + heat_chp + q_f * p.c_p * (p.T_f - T_w)
           - q_s * thermo.h_s(T_w)) / D
    if reduced:
        return (f_tg, f_l, f_w), D
    f_tchp = (p.eta_ex * v_ex - heat_chp) / (p.M_t_chp * p.c_p)
    return (f_tg, f_l, f_w, f_tchp), D


def boiler_rhs(x, u, p):
    """State rates of the 4-state boiler model.

    Parameters
    ----------
    x : array_like
        (T_t_gas, l_w, T_w, T_t_chp) in (K, m, K, K).
    u : array_like or BoilerInput
        (q_f, q_g_B, q_s_B, u_ex*H_ex).
    p : BoilerParams
    """
    if isinstance(u, BoilerInput):
        u = u.vector()
    f, _ = _rhs_terms(x, u, p, reduced=False)
    return np.array(f)


def boiler_rhs_reduced(x, u, p):
    """State rates of the 3-state startup model (valve closed)."""
    f, _ = _rhs_terms(x, u, p, reduced=True)
    return np.array(f)


def _jacobians(x, u, p, reduced):
    """Analytic Jacobians of the continuous-time right-hand side."""
    if reduced:
        T_tg, l_w, T_w = x[0], x[1], x[2]
        n, m = 3, 3
    else:
        T_tg, l_w, T_w, T_tchp = x
        n, m = 4, 4
    q_f, q_g, q_s = u[IQ_F], u[IQ_G], u[IQ_S]
    D = p.rho_w * p.water_volume(l_w) * p.c_v
    hs = thermo.h_s(T_w)
    dhs = _dh_s_dT(T_w)
    f, _ = _rhs_terms(x, u, p, reduced)

    Jx = np.zeros((n, n))
    Ju = np.zeros((n, m))
    cg = p.M_t_gas * p.c_p
    Jx[0, 0] = -p.beta / cg
    Jx[0, IT_W] = p.beta / cg
    Ju[0, IQ_G] = p.eta_B * p.c_LHV / cg

    Ju[1, IQ_F] = 1.0 / p.level_area
    Ju[1, IQ_S] = -1.0 / p.level_area

    n_heat = 1 if reduced else 2
    Jx[2, 0] = p.beta / D
    Jx[2, IT_W] = (-n_heat * p.beta - q_f * p.c_p - q_s * dhs) / D
    Jx[2, IL_W] = -f[2] / l_w
    Ju[2, IQ_F] = p.c_p * (p.T_f - T_w) / D
    Ju[2, IQ_S] = -hs / D
    if not reduced:
        Jx[2, IT_CHP] = p.beta / D
        cc = p.M_t_chp * p.c_p
        Jx[3, IT_CHP] = -p.beta / cc
        Jx[3, IT_W] = p.beta / cc
        Ju[3, IV_EX] = p.eta_ex / cc
    return Jx, Ju


def rk4_step_generic(f, x, u, dt, substeps=1):
    """Classical RK4 step of dx/dt = f(x, u) with zero-order-hold input."""
    x = np.asarray(x, dtype=float)
    h = dt / substeps
    for _ in range(substeps):
        k1 = f(x, u)
        k2 = f(x + 0.5 * h * k1, u)
        k3 = f(x + 0.5 * h * k2, u)
        k4 = f(x + h * k3, u)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def step_rk4(x, u, dt, p, substeps=1, reduced=False):
    """Classical fourth-order Runge-Kutta step of the boiler model.

    ``substeps`` splits dt for closed-loop truth integration (10 substeps
    per controller period replaces the adaptive stiff integrator of the
    original study; Richardson tests bound the substitution error).
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    if isinstance(u, BoilerInput):
        u = u.vector()
    rhs = boiler_rhs_reduced if reduced else boiler_rhs
    return rk4_step_generic(lambda xs, us: rhs(xs, us, p), x, u, dt, substeps)


def linearize(x, u, dt, p, reduced=False):
    """Jacobian linearization of the one-step RK4 map at (x, u).

    Returns (A, B, zeta) with zeta = f_RK4(x, u) - A x - B u, so the affine
    model x+ = A x + B u + zeta is exact at the linearization point. The
    Jacobians are propagated analytically through the four stages; accuracy
    is checked against central finite differences in the test suite.
    """
    if isinstance(u, BoilerInput):
        u = u.vector()
    x = np.asarray(x, dtype=float)
    rhs = boiler_rhs_reduced if reduced else boiler_rhs
    n = 3 if reduced else 4
    eye = np.eye(n)

    k1 = rhs(x, u, p)
    J1x, J1u = _jacobians(x, u, p, reduced)
    x2 = x + 0.5 * dt * k1
    k2 = rhs(x2, u, p)
    J2x_loc, J2u_loc = _jacobians(x2, u, p, reduced)
    A2 = J2x_loc @ (eye + 0.5 * dt * J1x)
    B2 = J2x_loc @ (0.5 * dt * J1u) + J2u_loc
    x3 = x + 0.5 * dt * k2
    k3 = rhs(x3, u, p)
    J3x_loc, J3u_loc = _jacobians(x3, u, p, reduced)
    A3 = J3x_loc @ (eye + 0.5 * dt * A2)
    B3 = J3x_loc @ (0.5 * dt * B2) + J3u_loc
    x4 = x + dt * k3
    k4 = rhs(x4, u, p)
    J4x_loc, J4u_loc = _jacobians(x4, u, p, reduced)
    A4 = J4x_loc @ (eye + dt * A3)
    B4 = J4x_loc @ (dt * B3) + J4u_loc

    A = eye + (dt / 6.0) * (J1x + 2.0 * A2 + 2.0 * A3 + A4)
    B = (dt / 6.0) * (J1u + 2.0 * B2 + 2.0 * B3 + B4)
    x_next = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    zeta = x_next - A @ x - B @ u[:B.shape[1]]
    return A, B, zeta


def equilibrium(T_w, l_w, q_s, v_ex, p, reduced=False):
    """Closed-form equilibrium (x*, u*) at water temperature T_w.

    Given steam draw q_s and exhaust term v_ex = u_ex*H_ex, mass balance
    fixes q_f = q_s, the CHP-tube balance fixes its temperature, and the
    water/burner-tube balances yield the burner gas flow. May return gas
    flows outside the operating bounds for extreme demands; callers check.
    """
    hs = thermo.h_s(T_w)
    q_f = q_s
    heat_from_chp = p.eta_ex * v_ex
    q_need = q_s * hs - q_f * p.c_p * (p.T_f - T_w) - heat_from_chp
    T_tg = T_w + q_need / p.beta
    q_g = q_need / (p.eta_B * p.c_LHV)
    if reduced:
        if v_ex != 0.0:
            raise ValidationError("reduced model has no exhaust input")
        x = np.array([T_tg, l_w, T_w])
        u = np.array([q_f, q_g, q_s])
    else:
        T_tchp = T_w + heat_from_chp / p.beta
        x = np.array([T_tg, l_w, T_w, T_tchp])
        u = np.array([q_f, q_g, q_s, v_ex])
    return x, u


def header_outflow(x, u_tilde, p):
    """Boiler steam outflow q_s_B [kg/s] from the header mass balance.

    ``u_tilde`` = (q_f, q_g_B, q_s_H) is the identification-model input.
    The header accumulation term couples q_s_B back into dT_w/dt affinely,
    so the fixed point is the closed-form solution of a linear scalar
    equation (exact, no iteration).
    """
    q_f, q_g, q_s_H = u_tilde
    T_w = x[IT_W]
    T_tg = x[IT_GAS]
    T_tchp = x[IT_CHP] if len(x) > 3 else T_w
    D = p.rho_w * p.water_volume(x[IL_W]) * p.c_v
    c0 = (p.beta * (T_tg - T_w) + p.beta * (T_tchp - T_w)
          + q_f * p.c_p * (p.T_f - T_w))
    k = p.V_H * thermo.drho_s_dT(T_w) / D
    return (k * c0 + q_s_H) / (1.0 + k * thermo.h_s(T_w))


def tilde_rhs(x, u_tilde, p):
    """Right-hand side of the header-adapted (identification) model."""
    q_s_B = header_outflow(x, u_tilde, p)
    u = np.array([u_tilde[0], u_tilde[1], q_s_B, 0.0])
    return boiler_rhs(x, u, p)


def header_pressure(x, q_s_B, q_s_H, p):
    """Header pressure [Pa] from the compressible Bernoulli balance.

    Solves 0.5*(q_B/(rho_B*A_B))^2 + h(p_B) = 0.5*(q_H/(rho_H*A_H))^2 + h(p_H)
    for p_H, with p_B = p_sat(T_w); the gravitational potential is omitted
    (negligible, constant). Raises NumericalError with the residual when no
    root exists in the supported pressure range.
    """
    if q_s_B < 0 or q_s_H < 0:
        raise ValidationError("flows must be nonnegative")
    p_B = thermo.p_sat(x[IT_W])
    rho_B = thermo.rho_s(x[IT_W])
    lhs = 0.5 * (q_s_B / (rho_B * p.A_B)) ** 2 + thermo.h_s(x[IT_W])

    def residual(p_H):
        T_H = thermo.T_sat(p_H)
        rho_H = thermo.rho_s(T_H)
        return lhs - 0.5 * (q_s_H / (rho_H * p.A_H)) ** 2 - thermo.h_s(T_H)

    r0 = residual(p_B)
    if r0 == 0.0:
        return p_B
    p_lo = thermo.p_sat(thermo.T_MIN) * (1 + 1e-9)
    p_hi = thermo.p_sat(thermo.T_MAX) * (1 - 1e-9)
    # Newton from the boiler pressure handles the common small-correction
    # case in a few evaluations; fall back to bracketing when it strays.
    p_n = p_B
    for _ in range(12):
        r = residual(p_n)
        if abs(r) < 1e-10 * (1.0 + abs(lhs)):
            return p_n
        h = max(1e-4 * p_n, 1.0)
        dr = (residual(min(p_n + h, p_hi)) - residual(max(p_n - h, p_lo))) \
            / (min(p_n + h, p_hi) - max(p_n - h, p_lo))
        if dr == 0.0:
            break
        p_next = p_n - r / dr
        if not (p_lo < p_next < p_hi):
            break
        p_n = p_next
    # Expand a bracket around the boiler pressure geometrically.
    step = max(0.05 * p_B, 10.0)
    a = b = p_B
    fa = fb = r0
    for _ in range(80):
        if fa * r0 < 0 or fb * r0 < 0:
            break
        step *= 2.0
        a = max(p_lo, p_B - step)
        b = min(p_hi, p_B + step)
        fa, fb = residual(a), residual(b)
        if a == p_lo and b == p_hi and fa * r0 >= 0 and fb * r0 >= 0:
            raise NumericalError(
                "no Bernoulli root in pressure range; residual at bounds "
                f"({fa:.6g}, {fb:.6g}) J/kg")
    lo, hi = (a, p_B) if fa * r0 < 0 else (p_B, b)
    return brentq(residual, lo, hi, xtol=1e-6, rtol=1e-12)


def chp_static(mode, P_e, m):
    """CHP static output pair (q_g_CHP, H_ex) for an operating mode.

    ON: affine map in the produced power (bounded); OFF: both zero;
    CS/HS: constant starting gas, no recoverable exhaust.
    """
    name = getattr(mode, "name", mode)
    if name == "ON":
        if not (m.P_e_min - 1e-9 <= P_e <= m.P_e_max + 1e-9):
            raise ConstraintError(
                f"CHP power {P_e:.6g} W outside [{m.P_e_min:.6g}, {m.P_e_max:.6g}]")
        return (P_e - m.P_int) / m.gamma_q, m.gamma_h * P_e
    if name == "OFF":
        return 0.0, 0.0
    if name == "CS":
        return m.q_g_cs, 0.0
    if name == "HS":
        return m.q_g_hs, 0.0
    raise ValidationError(f"unknown CHP mode {mode!r}")


def boiler_static_gas(q_s_B, u_ex, H_ex, gamma1, gamma2, gamma3):
    """Burner gas flow from the identified affine production map."""
    return gamma1 * q_s_B + gamma2 * u_ex * H_ex + gamma3


def static_gas_sweep(p, bounds=None, T_bar=None, n_qs=9, n_vex=4):
    """Steady-state sweep (q_s, u_ex*H_ex, q_g) used to fit the static map.

    Exported by the CLI as CSV for inspection; the affine fit of these rows
    yields (gamma1, gamma2, gamma3).
    """
    bounds = bounds or nominal_bounds()
    if T_bar is None:
        T_bar = thermo.T_sat(0.5 * (bounds.p_min + bounds.p_max))
    chp = nominal_chp_map()
    vex_max = chp.gamma_h * chp.P_e_max
    rows = []
    for q_s in np.linspace(bounds.q_s_min, bounds.q_s_max, n_qs):
        for v_ex in np.linspace(0.0, vex_max, n_vex):
            _, u = equilibrium(T_bar, bounds.l_nom, q_s, v_ex, p)
            rows.append((q_s, v_ex, u[IQ_G]))
    return np.array(rows)


def fit_static_gas(sweep):
    """Least-squares affine fit (gamma1, gamma2, gamma3) of a sweep."""
    sweep = np.asarray(sweep)
    A = np.column_stack([sweep[:, 0], sweep[:, 1], np.ones(len(sweep))])
    coef, *_ = np.linalg.lstsq(A, sweep[:, 2], rcond=None)
    return tuple(coef)


def max_temp_rate(sp, p):
    """Maximum wall-temperature rate [K/s] from the stress inequality.

    Clamped at zero (with a warning) when the pressurization term alone
    exhausts the allowable stress.
    """
    if p < sp.p0:
        raise ValidationError("pressure below initial pressure p0")
    pressure_term = sp.beta_p * (p - sp.p0) * (sp.d_in + sp.s) / (2.0 * sp.s)
    thermal_factor = (sp.beta_T * sp.E * sp.alpha / (1.0 - sp.nu)
                      * sp.c_p_m * sp.rho_m / sp.k_m * sp.s ** 2 * sp.phi_f)
    r = (sp.sigma_max - pressure_term) / thermal_factor
    if r < 0.0:
        warnings.warn("pressurization stress alone exceeds sigma_max; "
                      "temperature-rate bound clamped to zero")
        return 0.0
    return r


def rate_violations(states, tau, sp_by_state, p0=None):
    """Flag steps whose temperature rise exceeds the stress-rate bound.

    Parameters
    ----------
    states : (N, n) array
        State trajectory sampled every ``tau`` seconds.
    tau : float
        Sampling time [s].
    sp_by_state : dict[int, StressParams]
        Stress parameters per temperature-state index.
    p0 : float, optional
        Override for the initial pressure (defaults to each StressParams.p0).

    Returns
    -------
    list of (step, state_index) pairs where the bound is exceeded.
    """
    states = np.asarray(states)
    out = []
    for h in range(len(states) - 1):
        p_now = thermo.p_sat(min(max(states[h][IT_W], thermo.T_MIN),
                                 thermo.T_MAX))
        for j, sp in sp_by_state.items():
            if p0 is not None:
                sp = replace(sp, p0=p0)
            limit = max_temp_rate(sp, max(p_now, sp.p0))
            if (states[h + 1][j] - states[h][j]) / tau > limit + 1e-12:
                out.append((h, j))
    return out
