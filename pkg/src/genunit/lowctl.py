"""Low-level boiler control for the production modes.

Tracking MPC around one fixed nominal linearization point: the decision
variables are the feedwater/burner-gas moves and the steam flow, which is a
degree of freedom steered to the demanded value by a dominant weight. State
boxes (water temperature from the pressure band, level band) are softened by
a quadratic slack so the QP stays feasible; input boxes are hard. A replan
trigger compares the measured disturbances against the scheduled nominal
values. The stand-by three-mode rule controller keeps the pressure limit
cycle alive at minimum consumption.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import plant, thermo
from .errors import ControllerFault, ValidationError
from .optim import QpProblem, Status, solve_qp
from .plant import IQ_F, IQ_G, IQ_S, IV_EX, IL_W, IT_W

TAU_L = 60.0  # s, low-level sampling time


@dataclass(frozen=True)
class NominalPoint:
    """Equilibrium used for the production-mode linearization.

    Deviation variables are defined against these values: dx = x - x_ss,
    du = u - u_ss (feedwater, burner gas), dq_s = q_s - q_s_ss,
    dv_ex = u_ex*H_ex - H_ex_ss.
    """

    x_ss: np.ndarray
    u_ss: np.ndarray          # (q_f, q_g)
    y_ss: np.ndarray          # (l_w, p_s)
    q_s_ss: float
    H_ex_ss: float

    def full_input(self):
        return np.array([self.u_ss[0], self.u_ss[1], self.q_s_ss,
                         self.H_ex_ss])


def nominal_point(params=None, bounds=None, chp_map=None, steam_frac=0.5,
                  exhaust_frac=0.5):
    """Nominal point at half steam capacity and half exhaust recovery."""
    params = params or plant.nominal_params()
    bounds = bounds or plant.nominal_bounds()
    chp_map = chp_map or plant.nominal_chp_map()
    q_s0 = steam_frac * bounds.q_s_max
    H_ex0 = exhaust_frac * chp_map.gamma_h * chp_map.P_e_max
    T_bar = thermo.T_sat(0.5 * (bounds.p_min + bounds.p_max))
    x_ss, u_full = plant.equilibrium(T_bar, bounds.l_nom, q_s0, H_ex0, params)
    resid = np.abs(plant.boiler_rhs(x_ss, u_full, params)).max()
    if resid > 1e-8:
        raise ValidationError(f"nominal point is not an equilibrium "
                              f"(residual {resid:.2e})")
    return NominalPoint(
        x_ss=x_ss, u_ss=np.array([u_full[IQ_F], u_full[IQ_G]]),
        y_ss=np.array([x_ss[IL_W], thermo.p_sat(x_ss[IT_W])]),
        q_s_ss=q_s0, H_ex_ss=H_ex0)


@dataclass(frozen=True)
class TrackingWeights:
    """Cost weights on normalized deviation channels.

    Normalization: outputs by the half-width of their operating bands,
    inputs and steam flow by their ranges; the steam-demand weight dominates
    the output/input weights by four orders of magnitude so demand is
    fulfilled whenever feasible.
    """

    w_y: np.ndarray = field(default_factory=lambda: np.array([1.0, 1.0]))
    w_u: np.ndarray = field(default_factory=lambda: np.array([0.01, 0.01]))
    w_qs: float = 1.0e4
    horizon: int = 4
    slack_weight: float = 1.0e6
    y_scale: np.ndarray = field(
        default_factory=lambda: np.array([0.0035, 0.5e5]))
    u_scale: np.ndarray = field(
        default_factory=lambda: np.array([0.35, 0.028]))
    qs_scale: float = 0.35

    def __post_init__(self):
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")
        if not (self.w_qs > max(self.w_y.max(), self.w_u.max())):
            raise ValidationError("steam-demand weight must dominate")

    @property
    def W_Q(self):
        return np.diag(self.w_y / self.y_scale ** 2)

    @property
    def W_R(self):
        return np.diag(self.w_u / self.u_scale ** 2)

    @property
    def W_Qs(self):
        return self.w_qs / self.qs_scale ** 2


def replan_trigger(H_ex, q_s_D, nominal, eps_H, eps_q):
    """True when a measured disturbance leaves the scheduled neighborhood.

    Closed boundary: a mismatch equal to the threshold already triggers.
    """
    if eps_H <= 0 or eps_q <= 0:
        raise ValidationError("replan thresholds must be positive")
    return (abs(H_ex - nominal.H_ex_ss) >= eps_H
            or abs(q_s_D - nominal.q_s_ss) >= eps_q)


class TrackingMpc:
    """Production-mode MPC around the fixed nominal point.

    Owns its warm start; one instance per control loop.
    """

    def __init__(self, params=None, bounds=None, nominal=None, weights=None,
                 dt=TAU_L):
        self.params = params or plant.nominal_params()
        self.bounds = bounds or plant.nominal_bounds()
        self.nominal = nominal or nominal_point(self.params, self.bounds)
        self.weights = weights or TrackingWeights()
        self.dt = dt
        A, B, _ = plant.linearize(self.nominal.x_ss,
                                  self.nominal.full_input(), dt, self.params)
        self.A = A
        self.B_u = B[:, [IQ_F, IQ_G]]
        self.B_q = B[:, [IQ_S]]
        self.B_ex = B[:, [IV_EX]]
        dpdT = thermo.dp_sat_dT(self.nominal.x_ss[IT_W])
        self.C = np.zeros((2, 4))
        self.C[0, IL_W] = 1.0
        self.C[1, IT_W] = dpdT
        self._warm = None
        # shifted box constraints
        b, ss = self.bounds, self.nominal
        self.du_lo = np.array([0.0 - ss.u_ss[0], b.q_g_min - ss.u_ss[1]])
        self.du_hi = np.array([b.q_f_max - ss.u_ss[0],
                               b.q_g_max - ss.u_ss[1]])
        self.dqs_lo = b.q_s_min - ss.q_s_ss
        self.dqs_hi = b.q_s_max - ss.q_s_ss
        T_lo = thermo.T_sat(b.p_min) - ss.x_ss[IT_W]
        T_hi = thermo.T_sat(b.p_max) - ss.x_ss[IT_W]
        l_lo = b.l_min - ss.x_ss[IL_W]
        l_hi = b.l_max - ss.x_ss[IL_W]
        self.state_boxes = [(IT_W, T_lo, T_hi), (IL_W, l_lo, l_hi)]

    def build_tracking_qp(self, dx0, dqs_demand, dv_ex):
        """Condensed QP over normalized (du moves, dq_s moves, box slacks).

        Decision variables are scaled by their operating ranges (states and
        outputs by band half-widths), which keeps the Hessian conditioned;
        the first move is unscaled before application. dqs_demand and dv_ex
        are forecasts over the horizon (length >= p+1).
        """
        p = self.weights.horizon
        w = self.weights
        dqs_demand = np.asarray(dqs_demand, dtype=float)
        dv_ex = np.asarray(dv_ex, dtype=float)
        if len(dqs_demand) < p + 1 or len(dv_ex) < p + 1:
            raise ValidationError("forecasts shorter than the horizon")
        n_u, n_q = 2 * (p + 1), p + 1
        n_s = 2  # one slack per softened state channel, shared over steps
        n = n_u + n_q + n_s
        idx_u = lambda j: slice(2 * j, 2 * j + 2)
        idx_q = lambda j: n_u + j
        idx_s = n_u + n_q

        # Prediction in physical state units, decision columns normalized:
        # x[j] = xconst[j] + Gu[j] @ z_norm
        B_u_n = self.B_u * w.u_scale[None, :]
        B_q_n = self.B_q.ravel() * w.qs_scale
        Gu = np.zeros((p + 2, 4, n))
        xconst = np.zeros((p + 2, 4))
        xconst[0] = dx0
        for j in range(p + 1):
            xconst[j + 1] = self.A @ xconst[j] + (self.B_ex
                                                  * dv_ex[j]).ravel()
            Gu[j + 1] = self.A @ Gu[j]
            Gu[j + 1][:, idx_u(j)] += B_u_n
            Gu[j + 1][:, idx_q(j)] += B_q_n

        H = np.zeros((n, n))
        c = np.zeros(n)
        W_y = np.diag(w.w_y)
        W_u = np.diag(w.w_u)
        Cn = np.diag(1.0 / w.y_scale) @ self.C  # normalized outputs
        for j in range(1, p + 2):
            Cy = Cn @ Gu[j]
            yconst = Cn @ xconst[j]
            H += 2.0 * Cy.T @ W_y @ Cy
            c += 2.0 * Cy.T @ W_y @ yconst
        # input reference from the static maps at the demand forecast
        du_ref = self._input_reference(dqs_demand, dv_ex)
        for j in range(p + 1):
            sl = idx_u(j)
            H[sl, sl] += 2.0 * W_u
            c[sl] += -2.0 * W_u @ (du_ref[j] / w.u_scale)
            qj = idx_q(j)
            H[qj, qj] += 2.0 * w.w_qs
            c[qj] += -2.0 * w.w_qs * (dqs_demand[j] / w.qs_scale)
        H[idx_s:, idx_s:] += 2.0 * w.slack_weight * np.eye(2)

        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        for j in range(p + 1):
            lb[idx_u(j)] = self.du_lo / w.u_scale
            ub[idx_u(j)] = self.du_hi / w.u_scale
            lb[idx_q(j)] = self.dqs_lo / w.qs_scale
            ub[idx_q(j)] = self.dqs_hi / w.qs_scale
        lb[idx_s:] = 0.0

        # Softened state boxes, rows normalized by the channel scale.
        box_scale = {IT_W: w.y_scale[1] / thermo.dp_sat_dT(
            self.nominal.x_ss[IT_W]), IL_W: w.y_scale[0]}
        rows, rhs = [], []
        for j in range(1, p + 2):
            for sk, (ix, lo, hi) in enumerate(self.state_boxes):
                s = box_scale[ix]
                row = Gu[j][ix] / s
                row[idx_s + sk] = -1.0
                rows.append(row.copy())
                rhs.append((hi - xconst[j][ix]) / s)
                row2 = -Gu[j][ix] / s
                row2[idx_s + sk] = -1.0
                rows.append(row2)
                rhs.append((xconst[j][ix] - lo) / s)
        qp = QpProblem(c=c, H=H, A_in=np.array(rows), b_in=np.array(rhs),
                       lb=lb, ub=ub)
        layout = {"n_u": n_u, "n_q": n_q, "p": p, "idx_s": idx_s}
        return qp, layout

    def _input_reference(self, dqs_demand, dv_ex):
        """Steady-input reference from the static gas map at the forecast."""
        ss = self.nominal
        refs = []
        g1, g2, g3 = self._static_gamma()
        for dq, dv in zip(dqs_demand, dv_ex):
            q_s = ss.q_s_ss + dq
            v_ex = ss.H_ex_ss + dv
            q_g_ref = g1 * q_s + g2 * v_ex + g3
            q_f_ref = q_s
            refs.append(np.array([q_f_ref - ss.u_ss[0],
                                  q_g_ref - ss.u_ss[1]]))
        return refs

    def _static_gamma(self):
        if not hasattr(self, "_gamma_cache"):
            sweep = plant.static_gas_sweep(self.params, self.bounds)
            self._gamma_cache = plant.fit_static_gas(sweep)
        return self._gamma_cache

    def mpc_step(self, x_hat, qs_demand, v_ex_forecast):
        """Solve the QP and return the applied absolute inputs.

        Returns (u_applied (q_f, q_g), q_s_applied, info). Raises
        ControllerFault when no usable solution exists.
        """
        ss = self.nominal
        dx0 = np.asarray(x_hat, dtype=float) - ss.x_ss
        dqs_demand = np.asarray(qs_demand, dtype=float) - ss.q_s_ss
        dv_ex = np.asarray(v_ex_forecast, dtype=float) - ss.H_ex_ss
        qp, layout = self.build_tracking_qp(dx0, dqs_demand, dv_ex)
        res = solve_qp(qp, warm_start=self._warm)
        if res.status not in (Status.OPTIMAL, Status.ITERATION_LIMIT) or \
                res.x is None:
            raise ControllerFault(f"tracking QP failed: {res.status}")
        if res.status is Status.ITERATION_LIMIT and \
                res.stats.get("feasibility", 1.0) > 1e-5:
            raise ControllerFault("tracking QP returned an infeasible point")
        self._warm = res
        du0 = res.x[0:2] * self.weights.u_scale
        dqs0 = res.x[layout["n_u"]] * self.weights.qs_scale
        u_applied = ss.u_ss + du0
        q_s_applied = ss.q_s_ss + dqs0
        info = {"du0": du0, "dqs0": dqs0, "objective": res.objective,
                "slack": res.x[layout["idx_s"]:layout["idx_s"] + 2],
                "status": res.status}
        return u_applied, q_s_applied, info


# ---------------------------------------------------------------------------
# Stand-by three-mode controller
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StandbyParams:
    """Three-mode rule controller configuration.

    The PI constants are the identified values (pressure in bar); commands
    are clamped into the burner range of this plant, so phase 1 rides its
    firing floor ("high heat impulse"), phase 2 holds a low steady value and
    phase 3 is the lowest firing (burner off). Phase thresholds carry a
    sampling margin so the 60 s loop keeps the cycle inside the band.
    """

    K_P: float = 2.77       # identified PI gain [kg/s per bar]
    K_I: float = 0.014      # identified integral gain [kg/s per bar-step]
    q_g0: float = 0.066     # identified PI offset [kg/s]
    p_pi: float = 9.7       # bar, PI reference
    p_min: float = 9.5      # bar, cycle lower threshold
    p_sp: float = 10.0      # bar, nominal level ending phase 1
    p_max: float = 10.5     # bar, cycle upper threshold
    margin: float = 0.3     # bar, sampling margin on 2->3 and 3->1 switches
    mode1_floor: float = 0.0045  # kg/s, impulse firing floor
    mode1_cap: float = 0.0065    # kg/s, impulse firing ceiling
    mode2_gas: float = 0.0035    # kg/s, low steady value (burner minimum)
    mode3_gas: float = 0.0       # kg/s, lowest firing mode
    q_s_bleed: float = 0.020     # kg/s, network-warming steam flow
    q_g_cap: float = 0.028       # kg/s, burner maximum


@dataclass
class StandbyState:
    """Phase, running integral and the step of the last 3->1 switch."""

    phase: int = 1
    integral: float = 0.0
    h_switch: int = 0

    def __post_init__(self):
        if self.phase not in (1, 2, 3):
            raise ValidationError("stand-by phase must be 1, 2 or 3")


def standby_pi_law(p_bar, integral, sp):
    """The identified PI fuel law (pre-clamp), pressure in bar."""
    err = p_bar - sp.p_pi
    return sp.q_g0 + sp.K_P * err + sp.K_I * (integral + err)


def standby_step(p_bar, st, sp=None, h=None):
    """One stand-by controller step at the low-level rate.

    Returns (q_g command, q_s bleed, new state). Phase cycle: 1 (impulse
    until the nominal level), 2 (low steady fuel until near the ceiling),
    3 (lowest firing until near the floor; the integral resets on 3->1).
    """
    sp = sp or StandbyParams()
    phase, integral, h_switch = st.phase, st.integral, st.h_switch
    if phase == 1 and p_bar >= sp.p_sp:
        phase = 2
    elif phase == 2 and p_bar >= sp.p_max - sp.margin:
        phase = 3
    elif phase == 3 and p_bar <= sp.p_min + sp.margin:
        phase = 1
        integral = 0.0
        h_switch = h if h is not None else 0
    if phase == 1:
        integral += p_bar - sp.p_pi
        q_g = min(max(standby_pi_law(p_bar, integral - (p_bar - sp.p_pi), sp),
                      sp.mode1_floor), sp.mode1_cap)
    elif phase == 2:
        q_g = sp.mode2_gas
    else:
        q_g = sp.mode3_gas
    return q_g, sp.q_s_bleed, StandbyState(phase=phase, integral=integral,
                                           h_switch=h_switch)


def simulate_standby(params=None, sp=None, x0=None, n_steps=120, dt=TAU_L,
                     substeps=10):
    """Closed-loop stand-by run on the nonlinear plant.

    Returns a dict with per-step records and limit-cycle statistics (mean
    gas and steam over the last full cycle, cycle period).
    """
    params = params or plant.nominal_params()
    sp = sp or StandbyParams()
    if x0 is None:
        T0 = thermo.T_sat(10.0e5)
        x0, _ = plant.equilibrium(T0, 0.7, sp.q_s_bleed, 0.0, params)
    x = np.asarray(x0, dtype=float)
    st = StandbyState()
    rec = {"t": [], "p_bar": [], "q_g": [], "q_s": [], "phase": [],
           "T_w": []}
    phase1_starts = []
    prev_phase = st.phase
    for h in range(n_steps):
        p_bar = thermo.p_sat(x[IT_W]) / 1e5
        q_g, q_s, st = standby_step(p_bar, st, sp, h)
        if st.phase == 1 and prev_phase == 3:
            phase1_starts.append(h)
        prev_phase = st.phase
        rec["t"].append(h * dt)
        rec["p_bar"].append(p_bar)
        rec["q_g"].append(q_g)
        rec["q_s"].append(q_s)
        rec["phase"].append(st.phase)
        rec["T_w"].append(x[IT_W])
        u = np.array([0.0 + q_s, q_g, q_s, 0.0])  # feed balances the bleed
        x = plant.step_rk4(x, u, dt, params, substeps=substeps)
    rec = {k: np.asarray(v) for k, v in rec.items()}
    stats = {}
    if len(phase1_starts) >= 2:
        a, b = phase1_starts[-2], phase1_starts[-1]
        stats["period_s"] = (b - a) * dt
        stats["q_g_mean"] = float(rec["q_g"][a:b].mean())
        stats["q_s_mean"] = float(rec["q_s"][a:b].mean())
        stats["p_min_cycle"] = float(rec["p_bar"][a:b].min())
        stats["p_max_cycle"] = float(rec["p_bar"][a:b].max())
    return rec, stats
