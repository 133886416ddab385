"""Multi-rate closed-loop simulation of the scheduled generation unit.

One engine run solves the unit commitment, then walks the horizon at the
fast plant rate: scheduled modes select the controller (startup MPC in the
start modes, tracking MPC in production, the three-mode rule controller in
stand-by, zero input when off), an EKF supplies the feedback state, the
truth model integrates at the fast sampling time, and a replan trigger may
re-invoke the scheduler when measured disturbances leave the scheduled
neighborhood. All randomness is drawn from one seeded generator, so a
scenario reproduces bit-identically.

Rates: high level 15 min, low level 60 s, startup/plant 6 s; each boundary
coincides with a fast step.
"""

import csv
import io
from dataclasses import dataclass, field, replace

import numpy as np

from . import estimator, hybrid, lowctl, plant, scheduler, startup, thermo
from .errors import ControllerFault, ValidationError
from .plant import IL_W, IQ_F, IQ_G, IQ_S, IT_CHP, IT_GAS, IT_W

TAU_H = 900.0
TAU_L = 60.0
TAU_S = 6.0


@dataclass
class Scenario:
    """Inputs, initial condition, rates and noise of one closed-loop run."""

    demand: scheduler.DemandProfile
    prices: scheduler.PriceProfile
    init_modes: dict = field(default_factory=lambda: {"CHP": "ON",
                                                      "FTB": "ON0"})
    init_clocks: dict = None
    x0: np.ndarray = None
    tau_h: float = TAU_H
    tau_l: float = TAU_L
    tau_s: float = TAU_S
    seed: int = 0
    measurement_noise: bool = True
    process_noise: bool = False
    eps_H: float = 0.25e6     # W, replan threshold on the exhaust term
    eps_q: float = 0.08       # kg/s, replan threshold on steam demand
    replan_updated_forecast: bool = True
    actual_demand: scheduler.DemandProfile = None  # realized (vs forecast)
    uc_gap: float = 1e-4
    controller: str = "mpc"   # or "pid" for the baseline comparison

    def __post_init__(self):
        ratio_hl = self.tau_h / self.tau_l
        ratio_ls = self.tau_l / self.tau_s
        if abs(ratio_hl - round(ratio_hl)) > 1e-9 or \
                abs(ratio_ls - round(ratio_ls)) > 1e-9:
            raise ValidationError("rates must nest: tau_h | tau_l | tau_s")
        if self.actual_demand is not None and \
                len(self.actual_demand) != len(self.demand):
            raise ValidationError("actual demand horizon mismatch")


@dataclass
class PidBaseline:
    """Decoupled PI loops: level <- feedwater (with steam-flow
    feedforward), pressure <- burner gas. Gains tuned once on the nominal
    model and frozen; the steam valve is slaved to the demanded flow.
    """

    Kp_l: float = 0.03     # kg/s per m
    Ki_l: float = 0.004    # kg/s per m per step
    Kp_p: float = 0.006    # kg/s per bar
    Ki_p: float = 0.0006   # kg/s per bar per step

    def __post_init__(self):
        self.int_l = 0.0
        self.int_p = 0.0

    def step(self, y, q_s_cmd, nominal, bounds):
        l_err = nominal.y_ss[0] - y[0]
        p_err = (nominal.y_ss[1] - y[1] * 1e5) / 1e5
        self.int_l += l_err
        self.int_p += p_err
        q_f = np.clip(q_s_cmd + self.Kp_l * l_err
                      + self.Ki_l * self.int_l, 0.0, bounds.q_f_max)
        q_g = np.clip(nominal.u_ss[1] + self.Kp_p * p_err
                      + self.Ki_p * self.int_p, bounds.q_g_min,
                      bounds.q_g_max)
        return np.array([q_f, q_g])


class Trajectory:
    """Fast-rate record of one run, exportable as CSV."""

    COLUMNS = ("t", "ftb_mode", "chp_mode", "rate_tag",
               "T_t_gas", "l_w", "T_w", "T_t_chp",
               "T_t_gas_hat", "l_w_hat", "T_w_hat", "T_t_chp_hat",
               "q_f", "q_g_B", "q_s_B", "v_ex", "P_e", "P_purch",
               "p_s_bar", "q_s_D", "slack_l", "slack_p", "cost_step",
               "replan", "fault")

    def __init__(self):
        self.rows = []
        self.events = []

    def add(self, **kw):
        self.rows.append([kw.get(c, "" if c in ("ftb_mode", "chp_mode",
                                                "rate_tag", "fault")
                                 else 0.0) for c in self.COLUMNS])

    def column(self, name):
        i = self.COLUMNS.index(name)
        return np.array([r[i] for r in self.rows])

    def states(self):
        idx = [self.COLUMNS.index(c) for c in
               ("T_t_gas", "l_w", "T_w", "T_t_chp")]
        return np.array([[r[i] for i in idx] for r in self.rows])

    def write_csv(self, path_or_file):
        own = not hasattr(path_or_file, "write")
        f = open(path_or_file, "w", newline="") if own else path_or_file
        try:
            w = csv.writer(f)
            w.writerow(self.COLUMNS)
            for row in self.rows:
                w.writerow([f"{v:.10g}" if isinstance(v, float) else v
                            for v in row])
        finally:
            if own:
                f.close()

    def to_csv_bytes(self):
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue().encode()


def run_hierarchy(sc, mld=None, params=None, bounds=None):
    """Execute one scenario; returns (Trajectory, Schedule, events)."""
    params = params or plant.nominal_params()
    bounds = bounds or plant.nominal_bounds()
    mld = mld or hybrid.compile_mld()
    chp_map = mld.meta["chp_map"]
    rng = np.random.default_rng(sc.seed)
    demand_real = sc.actual_demand or sc.demand

    sched = scheduler.solve_uc(mld, sc.demand, sc.prices,
                               init_modes=sc.init_modes,
                               init_clocks=sc.init_clocks, gap=sc.uc_gap)
    N_H = len(sched)
    per_l = int(round(sc.tau_h / sc.tau_l))
    per_s = int(round(sc.tau_l / sc.tau_s))

    npnt = lowctl.nominal_point(params, bounds, chp_map)
    if sc.x0 is None:
        if sc.init_modes["FTB"] in ("ON0", "ON1", "SB"):
            x = npnt.x_ss.copy()
        else:
            x = np.array([293.15, bounds.l_nom, 293.15, 293.15])
    else:
        x = np.asarray(sc.x0, dtype=float).copy()
    mpc = lowctl.TrackingMpc(params, bounds, npnt)
    pid = PidBaseline()
    ekf_prod = estimator.BoilerEkf(params, dt=sc.tau_l, reduced=False,
                                   x0=x.copy())
    sb_state = lowctl.StandbyState()
    sb_params = lowctl.StandbyParams()
    startup_ctl = None
    ekf_startup = None

    traj = Trajectory()
    events = []
    u_hold = np.zeros(4)
    fault = ""

    def measure_noisy(x_true, R):
        y = estimator.measure(x_true)
        if sc.measurement_noise:
            y = y + rng.multivariate_normal(np.zeros(2), R)
        return y

    k_h = 0
    steps_total = N_H * per_l * per_s
    for step in range(steps_total):
        t = step * sc.tau_s
        on_l = step % per_s == 0
        on_h = step % (per_s * per_l) == 0
        if on_h:
            k_h = step // (per_s * per_l)
        ftb_mode = sched.ftb_mode[k_h]
        chp_mode = sched.chp_mode[k_h]
        rate_tag = "H" if on_h else ("L" if on_l else "S")

        # CHP side: static maps at the scheduled power.
        P_e = sched.P_e[k_h]
        if chp_mode == "ON":
            _, H_ex = plant.chp_static("ON", P_e, chp_map)
        else:
            H_ex = 0.0
        u_ex = 1 if ftb_mode == "ON1" else 0
        v_ex = u_ex * H_ex
        q_s_D = float(demand_real.q_s[k_h])

        replan_flag = 0
        cost_step = 0.0
        try:
            if ftb_mode in ("CS", "HS"):
                if startup_ctl is None:
                    x_red = np.array([x[IT_GAS], x[IL_W], x[IT_W]])
                    cfg = startup.StartupConfig()
                    startup_ctl = startup.StartupController(
                        params, bounds, cfg, x0=x_red)
                    y0 = measure_noisy(x, estimator.XR_DEFAULT)
                    ekf_startup = estimator.BoilerEkf.from_measured_level(
                        y0[0], max(x[IT_W] - 5.0, 280.0), params,
                        dt=sc.tau_s, reduced=True)
                y = measure_noisy(x, ekf_startup.state.X_R)
                ekf_startup.update(y)
                u_red, _ = startup_ctl.step(ekf_startup.x_hat)
                ekf_startup.predict(u_red)
                u_hold = np.array([u_red[0], u_red[1], u_red[2], 0.0])
            elif ftb_mode in ("ON0", "ON1") and on_l:
                y = measure_noisy(x, ekf_prod.state.X_R)
                ekf_prod.update(y)
                # replan when realized disturbances leave the neighborhood
                # of the values assumed by the scheduler (demand forecast,
                # scheduled exhaust term)
                sched_ex = (chp_map.gamma_h * sched.P_e[k_h]
                            if sched.ftb_mode[k_h] == "ON1" else 0.0)
                sched_point = replace(
                    npnt, q_s_ss=float(sc.demand.q_s[k_h]),
                    H_ex_ss=float(sched_ex))
                if lowctl.replan_trigger(v_ex, q_s_D, sched_point,
                                         sc.eps_H, sc.eps_q):
                    replan_flag = 1
                    events.append(("replan", t, k_h))
                    fut = slice(k_h, N_H)
                    fc = demand_real if sc.replan_updated_forecast \
                        else sc.demand
                    new_dem = scheduler.DemandProfile(
                        P_e=fc.P_e[fut], q_s=fc.q_s[fut])
                    new_pr = scheduler.PriceProfile(
                        lam_gas=sc.prices.lam_gas[fut] if len(
                            sc.prices.lam_gas) > 1 else sc.prices.lam_gas,
                        lam_sell=sc.prices.lam_sell[fut] if len(
                            sc.prices.lam_sell) > 1 else sc.prices.lam_sell,
                        lam_buy=sc.prices.lam_buy[fut] if len(
                            sc.prices.lam_buy) > 1 else sc.prices.lam_buy)
                    tail = scheduler.solve_uc(
                        mld, new_dem, new_pr,
                        init_modes={"CHP": sched.chp_mode[k_h],
                                    "FTB": sched.ftb_mode[k_h]},
                        init_clocks={"CHP": sched.chp_clock[k_h],
                                     "FTB": sched.ftb_clock[k_h]},
                        gap=sc.uc_gap)
                    sched = _splice_schedule(sched, tail, k_h)
                if sc.controller == "pid":
                    q_s_cmd = float(np.clip(q_s_D, 0.0, bounds.q_s_max))
                    u2 = pid.step(estimator.measure(ekf_prod.x_hat),
                                  q_s_cmd, npnt, bounds)
                else:
                    horizon = mpc.weights.horizon + 1
                    u2, q_s_cmd, info = mpc.mpc_step(
                        ekf_prod.x_hat, [q_s_D] * horizon,
                        [v_ex] * horizon)
                u_hold = np.array([u2[0], u2[1], q_s_cmd, v_ex])
                ekf_prod.predict(u_hold)
            elif ftb_mode == "SB" and on_l:
                p_bar = thermo.p_sat(x[IT_W]) / 1e5
                q_g, q_bleed, sb_state = lowctl.standby_step(
                    p_bar, sb_state, sb_params, h=step // per_s)
                u_hold = np.array([q_bleed, q_g, q_bleed, 0.0])
            elif ftb_mode == "OFF" and on_l:
                u_hold = np.zeros(4)
                startup_ctl = None  # next start re-initializes
        except (ControllerFault, thermo.ThermoRangeError) as exc:
            fault = str(exc)
            events.append(("fault", t, fault))
            traj.add(t=t, ftb_mode=ftb_mode, chp_mode=chp_mode,
                     rate_tag=rate_tag, fault=fault,
                     **_state_cols(x, x, u_hold, P_e, sched.P_purch[k_h],
                                   q_s_D, 0.0))
            break

        if ftb_mode not in ("CS", "HS"):
            startup_ctl = None

        lam_g = sc.prices.at("lam_gas", k_h, N_H)
        q_g_chp = plant.chp_static(chp_mode, P_e, chp_map)[0]
        cost_step = (lam_g * (u_hold[IQ_G] + q_g_chp)
                     * (sc.tau_s / sc.tau_h))

        x_hat_rec = (ekf_startup.x_hat if ftb_mode in ("CS", "HS")
                     and ekf_startup is not None else
                     ekf_prod.x_hat if ftb_mode in ("ON0", "ON1")
                     else x)
        if len(x_hat_rec) == 3:
            x_hat_rec = np.array([x_hat_rec[0], x_hat_rec[1], x_hat_rec[2],
                                  x[IT_CHP]])
        traj.add(t=t, ftb_mode=ftb_mode, chp_mode=chp_mode,
                 rate_tag=rate_tag, replan=replan_flag, cost_step=cost_step,
                 **_state_cols(x, x_hat_rec, u_hold, P_e,
                               sched.P_purch[k_h], q_s_D, 0.0))

        # truth integration over one fast step
        substeps = 10 if ftb_mode in ("CS", "HS") else 1
        if ftb_mode == "OFF" and x[IT_W] <= 293.16:
            pass  # cold and unfired: nothing changes
        else:
            x = plant.step_rk4(x, u_hold, sc.tau_s, params,
                               substeps=substeps)
        if sc.process_noise:
            w = rng.multivariate_normal(np.zeros(4), 1e-6 * np.eye(4))
            x = x + w
        x[IT_W] = min(max(x[IT_W], thermo.T_MIN), thermo.T_MAX)

    return traj, sched, events


def _state_cols(x, x_hat, u, P_e, P_purch, q_s_D, slack):
    return dict(
        T_t_gas=float(x[IT_GAS]), l_w=float(x[IL_W]), T_w=float(x[IT_W]),
        T_t_chp=float(x[IT_CHP]),
        T_t_gas_hat=float(x_hat[IT_GAS]), l_w_hat=float(x_hat[IL_W]),
        T_w_hat=float(x_hat[IT_W]), T_t_chp_hat=float(x_hat[IT_CHP]),
        q_f=float(u[IQ_F]), q_g_B=float(u[IQ_G]), q_s_B=float(u[IQ_S]),
        v_ex=float(u[3]), P_e=float(P_e), P_purch=float(P_purch),
        p_s_bar=float(thermo.p_sat(min(max(x[IT_W], thermo.T_MIN),
                                       thermo.T_MAX)) / 1e5),
        q_s_D=float(q_s_D), slack_l=slack, slack_p=slack)


def _splice_schedule(old, tail, k_h):
    """Replace the schedule from step k_h on with the re-solved tail."""
    def cat(a, b):
        if isinstance(a, list):
            return list(a[:k_h]) + list(b)
        return np.concatenate([np.asarray(a[:k_h]), np.asarray(b)])

    return scheduler.Schedule(
        chp_mode=cat(old.chp_mode, tail.chp_mode),
        ftb_mode=cat(old.ftb_mode, tail.ftb_mode),
        chp_clock=cat(old.chp_clock, tail.chp_clock),
        ftb_clock=cat(old.ftb_clock, tail.ftb_clock),
        u_S_chp=cat(old.u_S_chp, tail.u_S_chp),
        u_S_ftb=cat(old.u_S_ftb, tail.u_S_ftb),
        u_SB=cat(old.u_SB, tail.u_SB),
        u_ex=cat(old.u_ex, tail.u_ex),
        P_e=cat(old.P_e, tail.P_e),
        q_s_B=cat(old.q_s_B, tail.q_s_B),
        P_purch=cat(old.P_purch, tail.P_purch),
        q_g_chp=cat(old.q_g_chp, tail.q_g_chp),
        q_g_b=cat(old.q_g_b, tail.q_g_b),
        q_s_out=cat(old.q_s_out, tail.q_s_out),
        P_e_tot=cat(old.P_e_tot, tail.P_e_tot),
        objective=old.objective,
        meta={"spliced_at": k_h},
    )


def metrics(traj, params=None, stress_by_state=None, tau=TAU_S,
            p_setpoint=10.0e5, sp_fraction=0.993):
    """Summary metrics of a trajectory record.

    Startup duration to the pressure threshold (NaN when never reached),
    total fuel energy of the burner, stress-rate violation count, pressure
    and level excursions, and the economic cost accumulated by the engine.
    """
    params = params or plant.nominal_params()
    t = traj.column("t").astype(float)
    q_g = traj.column("q_g_B").astype(float)
    p_bar = traj.column("p_s_bar").astype(float)
    energy = float(np.sum(q_g) * tau * params.c_LHV)
    target = sp_fraction * p_setpoint / 1e5
    reached = np.flatnonzero(p_bar >= target)
    duration = float(t[reached[0]]) if reached.size else float("nan")
    out = {
        "duration_to_sp_s": duration,
        "fuel_energy_J": energy,
        "economic_cost": float(np.sum(traj.column("cost_step")
                                      .astype(float))),
        "p_min_bar": float(p_bar.min()) if len(p_bar) else float("nan"),
        "p_max_bar": float(p_bar.max()) if len(p_bar) else float("nan"),
    }
    if stress_by_state is not None:
        states = traj.states()
        out["rate_violations"] = len(plant.rate_violations(
            states, tau, stress_by_state))
    return out
