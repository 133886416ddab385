"""Optimal boiler startup: successive-linearization MPC with an artificial
terminal equilibrium.

Each cycle linearizes the discretized plant along the trajectory returned by
the previous optimization, solves a QP whose decision variables are the
input sequence and a "temporary" steady state reachable at the end of the
short horizon, applies the first move, and stores the solution (shifted,
steady pair appended) for the next linearization. The terminal weight is the
scaled fixed point of a discrete algebraic Riccati equation at the tail
linearization, so the artificial target inherits an infinite-horizon cost.
Wall-temperature rate bounds from the stress model are hard constraints at
every step. The startup controller runs on the reduced 3-state model (the
exhaust valve is closed throughout).

The same machinery solves the full-horizon open-loop program (iterate the
build/solve cycle at the initial state until the trajectory converges),
which is the optimality baseline, and the staged manual procedure used as
the historical comparison.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import plant, thermo
from .errors import ControllerFault, NumericalError, ValidationError
from .optim import QpProblem, Status, solve_qp
from .plant import IL_W, IT_GAS, IT_W

TAU_S = 6.0  # s, startup sampling time

# Reduced-model input order is (q_f, q_g, q_s); the move-penalty weights are
# specified in (q_g, q_f, q_s) order with zeros on the feedwater and steam
# channels, i.e. only the burner move is penalized.
W_Q_DIAG = np.array([0.1, 5.0, 20.0])       # (T_t_gas, l_w, T_w)
W_R_DIAG = np.array([0.0, 0.01, 0.0])       # (q_f, q_g, q_s), plant order
W_QT_STATIC_DIAG = np.array([0.1, 5.0, 30.0])


def terminal_weight(A, B, W_Q, W_R, alpha=1.0, tol=1e-10, max_iter=100000):
    """alpha times the fixed point of the discrete Riccati equation.

    Computed by the plain Riccati iteration P <- Q + A'PA - A'PB
    (R + B'PB)^-1 B'PA to a fixed-point residual below ``tol`` (Frobenius).
    Raises NumericalError with the residual history when divergent.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    Q = np.atleast_2d(np.asarray(W_Q, dtype=float))
    R = np.atleast_2d(np.asarray(W_R, dtype=float))
    P = Q.copy()
    history = []
    for _ in range(max_iter):
        BtPB = R + B.T @ P @ B
        try:
            gain = np.linalg.solve(BtPB, B.T @ P @ A)
        except np.linalg.LinAlgError:
            raise NumericalError("Riccati iteration: singular input-weight "
                                 "block") from None
        P_next = Q + A.T @ P @ A - A.T @ P @ B @ gain
        res = np.linalg.norm(P_next - P, "fro")
        history.append(res)
        P = 0.5 * (P_next + P_next.T)
        if res <= tol * max(1.0, np.linalg.norm(P, "fro")):
            return alpha * P
        if not np.isfinite(res) or res > 1e18:
            break
    raise NumericalError(f"Riccati iteration did not converge; residual "
                         f"history tail {history[-5:]}")


@dataclass(frozen=True)
class StartupConfig:
    """Startup optimizer configuration (3-state reduced model)."""

    N_p: int = 50
    tau_s: float = TAU_S
    w_q: np.ndarray = field(default_factory=lambda: W_Q_DIAG.copy())
    w_r: np.ndarray = field(default_factory=lambda: W_R_DIAG.copy())
    alpha_terminal: float = 1.0
    terminal_mode: str = "dare"   # or "static" for the printed diagonal
    p_setpoint: float = 10.0e5    # Pa
    x_scale: np.ndarray = field(
        default_factory=lambda: plant.STATE_SCALE_REDUCED.copy())
    u_scale: np.ndarray = field(
        default_factory=lambda: np.array([0.35, 0.028, 0.35]))
    rate_ridge: float = 1e-6      # regularizer inside the DARE input block

    def __post_init__(self):
        if self.N_p < 2:
            raise ValidationError("prediction horizon must be >= 2")
        if np.any(self.w_q < 0) or np.any(self.w_r < 0):
            raise ValidationError("weights must be nonnegative")

    @property
    def W_Q(self):
        # Hadamard with the inverse-square state scales
        return np.diag(self.w_q / self.x_scale ** 2)

    @property
    def W_R(self):
        return np.diag(self.w_r / self.u_scale ** 2)

    def target(self, params, bounds):
        T_sp = thermo.T_sat(self.p_setpoint)
        x_T, _ = plant.equilibrium(T_sp, bounds.l_nom, 0.0, 0.0, params,
                                   reduced=True)
        return x_T


def rate_limit_stress_params(bounds=None):
    """Stress parameters per rate-limited state: shell follows the water
    temperature, the burner tube has its own thinner geometry."""
    shell = plant.nominal_stress_params()
    tube = replace(shell, s=0.004, d_in=0.06)
    return {IT_W: shell, IT_GAS: tube}


class StartupQpBuilder:
    """Condensed time-varying QP around a reference trajectory."""

    def __init__(self, params, bounds, config, stress_by_state, p0):
        self.params = params
        self.bounds = bounds
        self.cfg = config
        self.stress = stress_by_state
        self.p0 = p0

    def linearize_along(self, x_traj, u_traj):
        cfg = self.cfg
        triples = []
        for i in range(cfg.N_p):
            A, B, zeta = plant.linearize(x_traj[i], u_traj[i], cfg.tau_s,
                                         self.params, reduced=True)
            triples.append((A, B, zeta))
        return triples

    def rate_bounds_along(self, x_traj):
        """Per-step per-state temperature-rate bounds from the stress model,
        evaluated at the reference trajectory's pressures."""
        cfg = self.cfg
        out = {}
        for j, sp in self.stress.items():
            sp = replace(sp, p0=self.p0)
            lims = []
            for i in range(cfg.N_p):
                T_w = min(max(x_traj[i][IT_W], thermo.T_MIN), thermo.T_MAX)
                p_now = max(thermo.p_sat(T_w), sp.p0)
                lims.append(plant.max_temp_rate(sp, p_now))
            out[j] = np.array(lims)
        return out

    def build(self, x0, triples, rate_bounds, u_prev, x_target,
              terminal_W=None):
        """QP over normalized [u_0..u_{Np-1}, x_ss].

        Constraints: condensed dynamics; input boxes; level band and
        temperature ceilings on the path; temperature-rate bounds; terminal
        equality x[Np] = x_ss; admissibility of (x_ss, u_ss) without the
        lower pressure bound (a cold start cannot satisfy it on the path).
        The steady input u_ss is eliminated through the tail linearization
        (u_ss = B^-1((I-A)x_ss - zeta)), which keeps the equilibrium
        condition exact while the Hessian stays nonsingular; its box bounds
        become rows on x_ss.
        """
        cfg = self.cfg
        b = self.bounds
        Np = cfg.N_p
        n_x, n_u = 3, 3
        Xs = np.diag(cfg.x_scale)
        Us = np.diag(cfg.u_scale)
        n = Np * n_u + n_x
        iu = lambda i: slice(i * n_u, (i + 1) * n_u)
        ixss = slice(Np * n_u, Np * n_u + n_x)

        # Condensed predictions: x[i] = xc[i] + G[i] @ z
        G = np.zeros((Np + 1, n_x, n))
        xc = np.zeros((Np + 1, n_x))
        xc[0] = x0
        for i, (A, B, zeta) in enumerate(triples):
            xc[i + 1] = A @ xc[i] + zeta
            G[i + 1] = A @ G[i]
            G[i + 1][:, iu(i)] += B @ Us

        W_Q = cfg.W_Q
        W_R = cfg.W_R
        if terminal_W is None:
            A_N, B_N, _ = triples[-1]
            if cfg.terminal_mode == "dare":
                terminal_W = terminal_weight(
                    A_N, B_N, W_Q, W_R + cfg.rate_ridge * np.eye(3),
                    cfg.alpha_terminal)
            else:
                terminal_W = np.diag(W_QT_STATIC_DIAG / cfg.x_scale ** 2)

        H = np.zeros((n, n))
        c = np.zeros(n)
        # stage cost sum_i ||x[i] - x_ss||_WQ^2, i = 1..Np (x[0] constant,
        # x[Np] equals x_ss through the terminal equality)
        for i in range(1, Np + 1):
            D = G[i].copy()
            D[:, ixss] -= Xs
            H += 2.0 * D.T @ W_Q @ D
            c += 2.0 * D.T @ W_Q @ xc[i]
        # move penalty ||u_i - u_{i-1}||_WR^2 on physical inputs
        WRu = Us @ W_R @ Us
        for i in range(Np):
            Dm = np.zeros((n_u, n))
            Dm[:, iu(i)] = np.eye(n_u)
            offset = np.zeros(n_u)
            if i == 0:
                offset = -u_prev / cfg.u_scale
            else:
                Dm[:, iu(i - 1)] = -np.eye(n_u)
            H += 2.0 * Dm.T @ WRu @ Dm
            c += 2.0 * Dm.T @ WRu @ (cfg.u_scale * offset)
        # terminal deviation ||x_ss - x_T||^2
        DT = np.zeros((n_x, n))
        DT[:, ixss] = Xs
        H += 2.0 * DT.T @ terminal_W @ DT
        c += -2.0 * DT.T @ terminal_W @ x_target
        # normalize the cost magnitude (argmin-invariant) and guard strict
        # convexity for the active-set solver
        cost_scale = max(1.0, np.abs(np.diag(H)).max())
        H /= cost_scale
        c /= cost_scale
        H += 1e-9 * np.eye(n)

        lb = np.full(n, -np.inf)
        ub = np.full(n, np.inf)
        u_lo = np.array([0.0, b.q_g_min, 0.0]) / cfg.u_scale
        u_hi = np.array([b.q_f_max, b.q_g_max, b.q_s_max]) / cfg.u_scale
        for i in range(Np):
            lb[iu(i)], ub[iu(i)] = u_lo, u_hi

        rows, rhs = [], []
        T_hi = thermo.T_sat(b.p_max)

        def add_row(coefs, const, scale):
            rows.append(coefs / scale)
            rhs.append(const / scale)

        for i in range(1, Np + 1):
            # level band (hard)
            add_row(G[i][IL_W].copy(), b.l_max - xc[i][IL_W], 0.0035)
            add_row(-G[i][IL_W], xc[i][IL_W] - b.l_min, 0.0035)
            # temperature ceilings
            add_row(G[i][IT_W].copy(), T_hi - xc[i][IT_W], 1.0)
            add_row(G[i][IT_GAS].copy(), (thermo.T_MAX - 10.0)
                    - xc[i][IT_GAS], 1.0)
        for j, lims in rate_bounds.items():
            for i in range(Np):
                row = G[i + 1][j] - G[i][j]
                const = (lims[i] * cfg.tau_s
                         - (xc[i + 1][j] - xc[i][j]))
                add_row(row, const, 1.0)
        # terminal admissibility: ceilings and the level band (the lower
        # pressure bound cannot hold for intermediate equilibria on a cold
        # start; the final target enters through the terminal cost)
        row = np.zeros(n)
        row[ixss] = Xs[IT_W]
        add_row(row.copy(), T_hi, 1.0)
        row_l = np.zeros(n)
        row_l[ixss] = Xs[IL_W]
        add_row(row_l.copy(), b.l_max, 0.0035)
        add_row(-row_l, -b.l_min, 0.0035)

        # Eliminated steady input: u_ss = Binv((I - A_N) x_ss - zeta_N);
        # its operating box becomes rows on x_ss.
        A_N, B_N, zeta_N = triples[-1]
        Binv = np.linalg.inv(B_N)
        M_uss = Binv @ (np.eye(n_x) - A_N) @ Xs  # d u_ss / d x_ss_norm
        c_uss = -Binv @ zeta_N
        u_lo_p = np.array([0.0, b.q_g_min, 0.0])
        u_hi_p = np.array([b.q_f_max, b.q_g_max, b.q_s_max])
        for j in range(n_u):
            row_u = np.zeros(n)
            row_u[ixss] = M_uss[j]
            add_row(row_u.copy(), u_hi_p[j] - c_uss[j], cfg.u_scale[j])
            add_row(-row_u, c_uss[j] - u_lo_p[j], cfg.u_scale[j])

        # Equality: terminal state reaches the artificial equilibrium.
        A_eq = np.zeros((n_x, n))
        A_eq[:n_x] = G[Np]
        A_eq[:n_x, ixss] -= Xs
        b_eq = -xc[Np]

        qp = QpProblem(c=c, H=H, A_eq=A_eq, b_eq=b_eq,
                       A_in=np.array(rows), b_in=np.array(rhs), lb=lb, ub=ub)
        layout = {"n_u": n_u, "Np": Np, "ixss": ixss, "G": G, "xc": xc,
                  "terminal_W": terminal_W, "M_uss": M_uss, "c_uss": c_uss}
        return qp, layout

    def decode(self, res, layout):
        cfg = self.cfg
        Np = layout["Np"]
        z = res.x
        u_seq = np.array([z[i * 3:(i + 1) * 3] * cfg.u_scale
                          for i in range(Np)])
        x_seq = np.array([layout["xc"][i] + layout["G"][i] @ z
                          for i in range(Np + 1)])
        x_ss = z[layout["ixss"]] * cfg.x_scale
        u_ss = layout["M_uss"] @ z[layout["ixss"]] + layout["c_uss"]
        return x_seq, u_seq, x_ss, u_ss


class StartupController:
    """Receding-horizon startup controller; owns its trajectory memory."""

    def __init__(self, params=None, bounds=None, config=None,
                 stress_by_state=None, x0=None):
        self.params = params or plant.nominal_params()
        self.bounds = bounds or plant.nominal_bounds()
        self.cfg = config or StartupConfig()
        self.stress = stress_by_state or rate_limit_stress_params()
        if x0 is None:
            raise ValidationError("startup controller needs the initial state")
        self.p0 = thermo.p_sat(min(max(x0[IT_W], thermo.T_MIN),
                                   thermo.T_MAX))
        self.builder = StartupQpBuilder(self.params, self.bounds, self.cfg,
                                        self.stress, self.p0)
        self.x_target = self.cfg.target(self.params, self.bounds)
        self.u_prev = np.zeros(3)  # zero at ignition
        self.traj_x, self.traj_u = self.cold_start_trajectory(x0)
        self._warm = None
        self._fallback_used = False

    def cold_start_trajectory(self, x0):
        """Feasible conservative reference: constant minimum burner flow."""
        u = np.array([0.0, self.bounds.q_g_min, 0.0])
        xs = [np.asarray(x0, dtype=float)]
        for _ in range(self.cfg.N_p):
            xs.append(plant.step_rk4(xs[-1], u, self.cfg.tau_s, self.params,
                                     reduced=True))
        return np.array(xs), np.tile(u, (self.cfg.N_p, 1))

    def step(self, x_hat):
        """Solve one cycle, apply the first move, store the new trajectory.

        Returns (u_applied, info). Falls back once to the stored
        trajectory's next move on solver failure, then faults.
        """
        x_hat = np.asarray(x_hat, dtype=float)
        ref_x = self.traj_x.copy()
        ref_x[0] = x_hat
        triples = self.builder.linearize_along(ref_x, self.traj_u)
        rate_bounds = self.builder.rate_bounds_along(ref_x)
        qp, layout = self.builder.build(x_hat, triples, rate_bounds,
                                        self.u_prev, self.x_target)
        res = solve_qp(qp, warm_start=self._warm)
        ok = res.status is Status.OPTIMAL or (
            res.status is Status.ITERATION_LIMIT and res.x is not None
            and res.stats.get("feasibility", 1.0) <= 1e-6)
        if not ok:
            if not self._fallback_used and len(self.traj_u) > 1:
                self._fallback_used = True
                u = self.traj_u[1].copy()
                self._shift(self.traj_x, self.traj_u)
                self.u_prev = u
                return u, {"fallback": True, "status": res.status}
            raise ControllerFault(f"startup QP failed: {res.status}")
        self._fallback_used = False
        self._warm = res
        x_seq, u_seq, x_ss, u_ss = self.builder.decode(res, layout)
        # shift-and-append for the next linearization cycle
        self.traj_x = np.vstack([x_seq[1:], x_ss[None, :]])
        self.traj_u = np.vstack([u_seq[1:], u_ss[None, :]])
        u0 = u_seq[0]
        self.u_prev = u0.copy()
        info = {"x_ss": x_ss, "u_ss": u_ss, "objective": res.objective,
                "status": res.status, "x_pred": x_seq, "u_pred": u_seq,
                "terminal_W": layout["terminal_W"]}
        return u0, info

    def _shift(self, xs, us):
        self.traj_x = np.vstack([xs[1:], xs[-1][None, :]])
        self.traj_u = np.vstack([us[1:], us[-1][None, :]])


def run_startup_lpv(x0, params=None, bounds=None, config=None,
                    stress_by_state=None, estimator=None, max_steps=2000,
                    sp_fraction=0.993, substeps=5):
    """Closed-loop LPV-MPC startup on the nonlinear plant.

    Integrates the truth model at ``substeps`` per controller period; the
    state fed back is either the truth or an estimator's output (when an
    EKF adapter is supplied: callables (predict(u), update(y) -> x_hat)).
    Stops when the pressure reaches ``sp_fraction`` of the setpoint.
    Returns a record dict with the trajectory and summary metrics.
    """
    params = params or plant.nominal_params()
    bounds = bounds or plant.nominal_bounds()
    config = config or StartupConfig()
    ctl = StartupController(params, bounds, config, stress_by_state, x0=x0)
    x = np.asarray(x0, dtype=float)
    p_target = sp_fraction * config.p_setpoint
    rec = {"t": [], "x": [], "u": [], "p": [], "x_hat": []}
    x_hat = x.copy()
    for h in range(max_steps):
        if estimator is not None:
            x_hat = estimator.estimate(x, h)
        else:
            x_hat = x
        u, info = ctl.step(x_hat)
        rec["t"].append(h * config.tau_s)
        rec["x"].append(x.copy())
        rec["x_hat"].append(np.asarray(x_hat, dtype=float).copy())
        rec["u"].append(u.copy())
        rec["p"].append(thermo.p_sat(x[IT_W]))
        x = plant.step_rk4(x, u, config.tau_s, params, substeps=substeps,
                           reduced=True)
        if thermo.p_sat(x[IT_W]) >= p_target:
            rec["t"].append((h + 1) * config.tau_s)
            rec["x"].append(x.copy())
            rec["x_hat"].append(x.copy())
            rec["u"].append(u.copy())
            rec["p"].append(thermo.p_sat(x[IT_W]))
            break
    else:
        raise NumericalError("startup did not reach the setpoint within "
                             f"{max_steps} steps")
    rec = {k: np.asarray(v) for k, v in rec.items()}
    rec["duration_s"] = rec["t"][-1]
    rec["energy_J"] = float(np.sum(rec["u"][:-1, 1]) * config.tau_s
                            * params.c_LHV)
    return rec


def solve_open_loop(x0, horizon, params=None, bounds=None, config=None,
                    stress_by_state=None, max_sqp_iter=30, tol=1e-6):
    """Converged full-horizon open-loop program at the initial state.

    Iterates the linearize/build/solve cycle (an SQP loop) until the
    trajectory stops changing, then returns the input schedule and its
    nonlinear rollout. The converged trajectory satisfies the nonlinear
    dynamics to integration tolerance because the linearization error
    vanishes on its own reference.
    """
    params = params or plant.nominal_params()
    bounds = bounds or plant.nominal_bounds()
    base_cfg = config or StartupConfig()
    cfg = replace(base_cfg, N_p=horizon)
    stress = stress_by_state or rate_limit_stress_params()
    p0 = thermo.p_sat(min(max(x0[IT_W], thermo.T_MIN), thermo.T_MAX))
    builder = StartupQpBuilder(params, bounds, cfg, stress, p0)
    x_target = cfg.target(params, bounds)

    ctl = StartupController(params, bounds, cfg, stress, x0=x0)
    traj_x, traj_u = ctl.traj_x, ctl.traj_u
    warm = None
    history = []
    for it in range(max_sqp_iter):
        triples = builder.linearize_along(traj_x, traj_u)
        rate_bounds = builder.rate_bounds_along(traj_x)
        qp, layout = builder.build(np.asarray(x0, dtype=float), triples,
                                   rate_bounds, np.zeros(3), x_target)
        res = solve_qp(qp, warm_start=warm)
        if res.x is None:
            raise NumericalError(f"open-loop QP failed at iteration {it}")
        warm = res
        x_seq, u_seq, x_ss, u_ss = builder.decode(res, layout)
        change = float(np.max(np.abs(u_seq - traj_u) / cfg.u_scale))
        history.append(change)
        traj_x = np.vstack([x_seq[:-1], x_ss[None, :]])
        traj_x[0] = x0
        traj_u = u_seq
        if change < tol:
            break
    # nonlinear rollout of the converged schedule
    xs = [np.asarray(x0, dtype=float)]
    for u in traj_u:
        xs.append(plant.step_rk4(xs[-1], u, cfg.tau_s, params, substeps=5,
                                 reduced=True))
    xs = np.array(xs)
    return {"u": traj_u, "x": xs, "sqp_changes": history,
            "p": np.array([thermo.p_sat(min(max(x[IT_W], thermo.T_MIN),
                                            thermo.T_MAX)) for x in xs])}


def open_loop_metrics(sol, config=None, sp_fraction=0.993):
    """Duration and fuel energy of an open-loop schedule rollout."""
    cfg = config or StartupConfig()
    p_target = sp_fraction * cfg.p_setpoint
    idx = np.flatnonzero(sol["p"] >= p_target)
    if idx.size == 0:
        return {"duration_s": np.inf, "energy_J": np.inf}
    k = int(idx[0])
    return {"duration_s": k * cfg.tau_s,
            "energy_J": float(np.sum(sol["u"][:k, 1]) * cfg.tau_s
                              * plant.nominal_params().c_LHV)}


@dataclass(frozen=True)
class ManualProfile:
    """Staged open-loop firing levels switched on water temperature."""

    levels: tuple = (0.009, 0.013, 0.018)     # kg/s gas, conservative stages
    thresholds: tuple = (360.0, 420.0)        # K, switch temperatures
    pi_fraction: float = 0.95                 # PI handover at 0.95*T_sp
    K_P: float = 0.02   # kg/s per bar, final PI pressure loop
    K_I: float = 0.002


def manual_startup_profile(x0, params=None, bounds=None, profile=None,
                           config=None, max_steps=4000, sp_fraction=0.993,
                           substeps=5):
    """Historical staged startup: three gas levels switched on the water
    temperature, then a PI pressure regulator after the handover point.

    Returns a record like the closed-loop runner, plus the handover step.
    """
    params = params or plant.nominal_params()
    bounds = bounds or plant.nominal_bounds()
    profile = profile or ManualProfile()
    cfg = config or StartupConfig()
    T_sp = thermo.T_sat(cfg.p_setpoint)
    handover_T = profile.pi_fraction * T_sp
    p_target = sp_fraction * cfg.p_setpoint
    x = np.asarray(x0, dtype=float)
    integral = 0.0
    handover_step = None
    rec = {"t": [], "x": [], "u": [], "p": []}
    for h in range(max_steps):
        T_w = x[IT_W]
        if T_w < handover_T:
            if T_w < profile.thresholds[0]:
                q_g = profile.levels[0]
            elif T_w < profile.thresholds[1]:
                q_g = profile.levels[1]
            else:
                q_g = profile.levels[2]
        else:
            if handover_step is None:
                handover_step = h
            p_bar = thermo.p_sat(T_w) / 1e5
            err = cfg.p_setpoint / 1e5 - p_bar
            integral += err
            q_g = np.clip(profile.K_P * err + profile.K_I * integral
                          + bounds.q_g_min, 0.0, bounds.q_g_max)
        u = np.array([0.0, q_g, 0.0])
        rec["t"].append(h * cfg.tau_s)
        rec["x"].append(x.copy())
        rec["u"].append(u)
        rec["p"].append(thermo.p_sat(min(max(T_w, thermo.T_MIN),
                                         thermo.T_MAX)))
        x = plant.step_rk4(x, u, cfg.tau_s, params, substeps=substeps,
                           reduced=True)
        if thermo.p_sat(min(max(x[IT_W], thermo.T_MIN),
                            thermo.T_MAX)) >= p_target:
            rec["t"].append((h + 1) * cfg.tau_s)
            rec["x"].append(x.copy())
            rec["u"].append(u)
            rec["p"].append(thermo.p_sat(x[IT_W]))
            break
    else:
        raise NumericalError("manual startup did not reach the setpoint")
    rec = {k: np.asarray(v) for k, v in rec.items()}
    rec["duration_s"] = rec["t"][-1]
    rec["energy_J"] = float(np.sum(rec["u"][:-1, 1]) * cfg.tau_s
                            * params.c_LHV)
    rec["handover_step"] = handover_step
    return rec


def cold_initial_state(params=None, bounds=None, T0=293.15):
    params = params or plant.nominal_params()
    bounds = bounds or plant.nominal_bounds()
    return np.array([T0, bounds.l_nom, T0])
