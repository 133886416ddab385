"""Saturation-line thermophysical properties of water/steam.

The boiler operates at saturated conditions, so only properties along the
liquid/vapor equilibrium line are needed: saturation pressure and its inverse,
saturated-steam specific enthalpy and density, and the density derivative
along the line. Pressure uses the industrial-formulation region-4 correlation;
vapor density and enthalpy use the standard auxiliary saturation-curve
correlations (critical-point scaled). A bundled reference table
(``data/sat_reference.csv``) provides independent values for oracle tests;
target agreement is 1%, sufficient here because control-loop gains dominate
property error.

Supported temperature range: [273.15, 600] K (cold start through 10-bar
operation with margin). All functions are pure and thread-safe.
"""

import math
from dataclasses import dataclass

T_MIN = 273.15  # K
T_MAX = 600.0   # K

T_CRIT = 647.096    # K
RHO_CRIT = 322.0    # kg/m^3

# Region-4 saturation-pressure correlation coefficients.
_N = (
    0.11670521452767e4, -0.72421316703206e6, -0.17073846940092e2,
    0.12020824702470e5, -0.32325550322333e7, 0.14915108613530e2,
    -0.48232657361591e4, 0.40511340542057e6, -0.23855557567849,
    0.65017534844798e3,
)

# Saturated-vapor density: ln(rho/rho_c) = sum c_i * (1 - T/Tc)^(e_i/6)
_RHO_C = (-2.03150240, -2.68302940, -5.38626492, -17.2991605,
          -44.7586581, -63.9201063)
_RHO_E = (2.0, 4.0, 8.0, 18.0, 37.0, 71.0)

# Auxiliary alpha equation for saturation enthalpies, theta = T/Tc:
# alpha/alpha0 = d_a + d1*theta^-19 + d2*theta + d3*theta^4.5
#                + d4*theta^5 + d5*theta^54.5;  h'' = alpha + (T/rho'') dp/dT
_ALPHA0 = 1000.0  # J/kg
_D_A = -1135.905627715
_D = (-5.65134998e-8, 2690.66631, 127.287297, -135.003439, 0.981825814)
_D_E = (-19.0, 1.0, 4.5, 5.0, 54.5)


class ThermoRangeError(ValueError):
    """Temperature or pressure outside the supported saturation range."""


def _check_T(T):
    if not (T_MIN <= T <= T_MAX):
        if T < T_MIN:
            raise ThermoRangeError(
                f"temperature {T!r} K below supported minimum {T_MIN} K")
        raise ThermoRangeError(
            f"temperature {T!r} K above supported maximum {T_MAX} K")


def p_sat(T):
    """Saturation pressure [Pa] at temperature ``T`` [K].

    Continuous and strictly increasing over the supported range.
    """
    _check_T(T)
    n = _N
    theta = T + n[8] / (T - n[9])
    a = theta * theta + n[0] * theta + n[1]
    b = n[2] * theta * theta + n[3] * theta + n[4]
    c = n[5] * theta * theta + n[6] * theta + n[7]
    x = 2.0 * c / (-b + math.sqrt(b * b - 4.0 * a * c))
    return 1e6 * x ** 4


def dp_sat_dT(T):
    """Derivative of the saturation pressure [Pa/K] at ``T`` [K]."""
    _check_T(T)
    n = _N
    theta = T + n[8] / (T - n[9])
    dtheta = 1.0 - n[8] / (T - n[9]) ** 2
    a = theta * theta + n[0] * theta + n[1]
    b = n[2] * theta * theta + n[3] * theta + n[4]
    c = n[5] * theta * theta + n[6] * theta + n[7]
    da = 2.0 * theta + n[0]
    db = 2.0 * n[2] * theta + n[3]
    dc = 2.0 * n[5] * theta + n[6]
    s = math.sqrt(b * b - 4.0 * a * c)
    q = -b + s
    dq = -db + (b * db - 2.0 * (da * c + a * dc)) / s
    x = 2.0 * c / q
    dx = (2.0 * dc * q - 2.0 * c * dq) / (q * q)
    return 1e6 * 4.0 * x ** 3 * dx * dtheta


def T_sat(p):
    """Saturation temperature [K] at pressure ``p`` [Pa].

    Exact algebraic inverse of :func:`p_sat`; round-trips within 1e-8
    relative.
    """
    p_lo, p_hi = p_sat(T_MIN), p_sat(T_MAX)
    if not (p_lo <= p <= p_hi):
        if p < p_lo:
            raise ThermoRangeError(
                f"pressure {p!r} Pa below supported minimum {p_lo:.6g} Pa")
        raise ThermoRangeError(
            f"pressure {p!r} Pa above supported maximum {p_hi:.6g} Pa")
    n = _N
    beta = (p / 1e6) ** 0.25
    e = beta * beta + n[2] * beta + n[5]
    f = n[0] * beta * beta + n[3] * beta + n[6]
    g = n[1] * beta * beta + n[4] * beta + n[7]
    d = 2.0 * g / (-f - math.sqrt(f * f - 4.0 * e * g))
    half = n[9] + d
    return 0.5 * (half - math.sqrt(half * half - 4.0 * (n[8] + n[9] * d)))


def rho_s(T):
    """Saturated-steam density [kg/m^3] at ``T`` [K]."""
    _check_T(T)
    tau = 1.0 - T / T_CRIT
    ln_ratio = sum(c * tau ** (e / 6.0) for c, e in zip(_RHO_C, _RHO_E))
    return RHO_CRIT * math.exp(ln_ratio)


def drho_s_dT(T):
    """Temperature derivative of saturated-steam density [kg/(m^3 K)].

    Positive throughout the range (vapor densifies along saturation).
    """
    _check_T(T)
    tau = 1.0 - T / T_CRIT
    dln = sum(c * (e / 6.0) * tau ** (e / 6.0 - 1.0)
              for c, e in zip(_RHO_C, _RHO_E)) * (-1.0 / T_CRIT)
    return rho_s(T) * dln


def h_s(T):
    """Saturated-steam specific enthalpy [J/kg] at ``T`` [K]."""
    _check_T(T)
    theta = T / T_CRIT
    alpha = _ALPHA0 * (_D_A + sum(d * theta ** e
                                  for d, e in zip(_D, _D_E)))
    return alpha + (T / rho_s(T)) * dp_sat_dT(T)


def h_s_of_p(p):
    """Saturated-steam specific enthalpy [J/kg] at pressure ``p`` [Pa]."""
    return h_s(T_sat(p))


def rho_s_of_p(p):
    """Saturated-steam density [kg/m^3] at pressure ``p`` [Pa]."""
    return rho_s(T_sat(p))


@dataclass(frozen=True)
class SatProps:
    """Saturation-line property bundle at one temperature.

    Attributes
    ----------
    T : float
        Temperature [K].
    p_sat : float
        Saturation pressure [Pa].
    h_s : float
        Saturated-steam specific enthalpy [J/kg].
    rho_s : float
        Saturated-steam density [kg/m^3].
    drho_dT : float
        Density derivative along the saturation line [kg/(m^3 K)].
    """

    T: float
    p_sat: float
    h_s: float
    rho_s: float
    drho_dT: float


def sat_props(T):
    """Evaluate all saturation properties at ``T`` [K]."""
    return SatProps(T=T, p_sat=p_sat(T), h_s=h_s(T),
                    rho_s=rho_s(T), drho_dT=drho_s_dT(T))
