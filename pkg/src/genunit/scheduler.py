"""High-level 24-hour unit commitment over the compiled MLD system.

The MLD block is unrolled over the horizon into one MILP: per step the
decision vector holds the boolean/continuous commands, the auxiliary
variables and the successor state; demand-cover rows and the economic cost
close the problem. Cost = gas cost of both units plus electricity bought at
the buy price minus surplus sold at the sell price. Purchased power is the
negative demand deviation (bought at the buy price, capped by the demand so
grid power cannot be resold); the surplus sold is the nonnegative deviation
of total supply above demand.

Default horizon: 96 steps of 15 min. The MILP is solved with the "highs"
backend by default (the unrolled system is far beyond the dense desk-scale
simplex); oracle-equivalence tests run short horizons against a dynamic
program over mode sequences.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import hybrid
from .errors import SchedulingError, ValidationError
from .optim import MilpProblem, LpProblem, Status, solve_milp

N_H_DEFAULT = 96
TAU_H = 900.0  # s, high-level sampling time (15 min)


@dataclass
class DemandProfile:
    """Per-step electric [W] and steam [kg/s] demands."""

    P_e: np.ndarray
    q_s: np.ndarray

    def __post_init__(self):
        self.P_e = np.asarray(self.P_e, dtype=float)
        self.q_s = np.asarray(self.q_s, dtype=float)
        if self.P_e.shape != self.q_s.shape or self.P_e.ndim != 1:
            raise ValidationError("demand profiles must be equal-length vectors")
        if np.any(self.P_e < 0) or np.any(self.q_s < 0):
            raise ValidationError("demands must be nonnegative")

    def __len__(self):
        return len(self.P_e)


@dataclass
class PriceProfile:
    """Gas price [per kg/s-step] and electricity sell/buy prices
    [per W-step]; per-step flow pricing as in the cost definition (a uniform
    energy factor rescales the objective without changing the argmin)."""

    lam_gas: np.ndarray
    lam_sell: np.ndarray
    lam_buy: np.ndarray

    def __post_init__(self):
        self.lam_gas = np.atleast_1d(np.asarray(self.lam_gas, dtype=float))
        self.lam_sell = np.atleast_1d(np.asarray(self.lam_sell, dtype=float))
        self.lam_buy = np.atleast_1d(np.asarray(self.lam_buy, dtype=float))
        for name in ("lam_gas", "lam_sell", "lam_buy"):
            if np.any(getattr(self, name) < 0):
                raise ValidationError(f"{name} must be nonnegative")

    def at(self, name, k, n):
        v = getattr(self, name)
        if len(v) == 1:
            return float(v[0])
        if len(v) < n:
            raise ValidationError(f"{name} shorter than horizon")
        return float(v[k])


@dataclass
class Schedule:
    """Decoded unit-commitment decisions over the horizon."""

    chp_mode: list
    ftb_mode: list
    chp_clock: list
    ftb_clock: list
    u_S_chp: np.ndarray
    u_S_ftb: np.ndarray
    u_SB: np.ndarray
    u_ex: np.ndarray
    P_e: np.ndarray
    q_s_B: np.ndarray
    P_purch: np.ndarray
    q_g_chp: np.ndarray
    q_g_b: np.ndarray
    q_s_out: np.ndarray
    P_e_tot: np.ndarray
    objective: float
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.chp_mode)


class UcLayout:
    """Column layout of the unrolled MILP: per step [u, d, z, x+].

    In the "tight" encoding the d block holds only the edge indicators and
    the x block only the mode indicators (clocks are replaced by entry-window
    rows); in the "mld" encoding the blocks mirror the compiled MLD system
    exactly.
    """

    def __init__(self, mld, N, encoding="mld"):
        self.mld = mld
        self.N = N
        self.encoding = encoding
        if encoding == "mld":
            self.u_names = list(mld.u_names)
            self.d_names = list(mld.d_names)
            self.z_names = list(mld.z_names)
            self.x_names = list(mld.x_names)
        else:
            autos = mld.meta["automata"]
            self.u_names = list(mld.u_names)
            self.d_names = [f"{p}.{e.source}->{e.target}"
                            for p, a in autos.items() for e in a.edges]
            self.z_names = [n for n in mld.z_names if not
                            n.endswith(".z_reset")]
            self.x_names = [f"{p}.{m}" for p, a in autos.items()
                            for m in a.modes]
        self.n_u, self.n_d = len(self.u_names), len(self.d_names)
        self.n_z, self.n_x = len(self.z_names), len(self.x_names)
        self.ui = {n: i for i, n in enumerate(self.u_names)}
        self.di = {n: i for i, n in enumerate(self.d_names)}
        self.zi = {n: i for i, n in enumerate(self.z_names)}
        self.xi = {n: i for i, n in enumerate(self.x_names)}
        self.stride = self.n_u + self.n_d + self.n_z + self.n_x
        self.n_cols = N * self.stride

    def u(self, k, i=0):
        return k * self.stride + i

    def d(self, k, i=0):
        return k * self.stride + self.n_u + i

    def z(self, k, i=0):
        return k * self.stride + self.n_u + self.n_d + i

    def x(self, k, i=0):
        """State at step k (k from 1..N)."""
        if k < 1:
            raise ValidationError("x(0) is the fixed initial state")
        return (k - 1) * self.stride + self.n_u + self.n_d + self.n_z + i


class _SparseRows:
    def __init__(self, n_cols):
        self.rows = []
        self.cols = []
        self.vals = []
        self.rhs = []
        self.n_cols = n_cols
        self.r = 0

    def add(self, cols, vals, rhs):
        for c, v in zip(cols, vals):
            if v != 0.0:
                self.rows.append(self.r)
                self.cols.append(c)
                self.vals.append(v)
        self.rhs.append(rhs)
        self.r += 1

    def matrix(self):
        A = sp.coo_matrix((self.vals, (self.rows, self.cols)),
                          shape=(self.r, self.n_cols))
        return A.tocsr(), np.array(self.rhs)


def _entries_into(auto, prefix, mode):
    return [f"{prefix}.{e.source}->{e.target}" for e in auto.edges
            if e.target == mode]


def _emit_tight_unit(ineq, eq, layout, auto, prefix, mode0, clock0, N):
    """Time-indexed dwell encoding of one automaton (no clock states).

    The initial dwell is a virtual entry at step -(clock0+1); window sums
    over entry indicators then cover the whole history uniformly. Upper rows
    make each edge indicator sound; per-entry forcing rows make the
    deterministic transitions mandatory, so the indicators are exactly the
    guard values along any feasible binary trajectory.
    """
    j_virtual = -int(clock0) - 1

    def chi(k, m):
        """(cols, vals, const) of the mode indicator at step k."""
        if k == 0:
            return [], [], (1.0 if m == mode0 else 0.0)
        return [layout.x(k, layout.xi[f"{prefix}.{m}"])], [1.0], 0.0

    def entry_terms(m, j):
        """Entry indicators into mode m at step j (+virtual constant)."""
        if j < 0:
            return [], [], (1.0 if (m == mode0 and j == j_virtual) else 0.0)
        cols = [layout.d(j, layout.di[n]) for n in _entries_into(auto, prefix, m)]
        return cols, [1.0] * len(cols), 0.0

    def window_sum(m, a, b):
        cols, vals, const = [], [], 0.0
        for j in range(a, b + 1):
            cj, vj, cc = entry_terms(m, j)
            cols += cj
            vals += vj
            const += cc
        return cols, vals, const

    for k in range(N):
        for e in auto.edges:
            name = f"{prefix}.{e.source}->{e.target}"
            dcol = layout.d(k, layout.di[name])
            theta = e.guard.min_clock
            T = e.guard.max_clock
            # source-mode gate: d <= chi_src[k]
            cc, vv, const = chi(k, e.source)
            ineq.add([dcol] + cc, [1.0] + [-v for v in vv], const)
            # input literals
            u_cols, u_vals, u_const = [], [], 0.0
            for nm, val in e.guard.inputs.items():
                ucol = layout.u(k, layout.ui[f"{prefix}.{nm}"])
                if val:
                    ineq.add([dcol, ucol], [1.0, -1.0], 0.0)
                    u_cols.append(ucol)
                    u_vals.append(1.0)
                else:
                    ineq.add([dcol, ucol], [1.0, 1.0], 1.0)
                    u_cols.append(ucol)
                    u_vals.append(-1.0)
                    u_const += 1.0
            # dwell window W1 = [k-theta-1, k-1]: recent entries block firing
            w1_lo = k - theta - 1 if theta >= 0 else k  # empty if theta < 0
            blk_cols, blk_vals, blk_const = window_sum(
                e.source, w1_lo, k - 1) if theta >= 0 else ([], [], 0.0)
            for bc in blk_cols:
                ineq.add([dcol, bc], [1.0, 1.0], 1.0)
            if blk_const >= 1.0:
                ineq.add([dcol], [1.0], 0.0)
            # max-clock window: must have entered within W2 = [k-T-1, k-1]
            if T is not None:
                w2_cols, w2_vals, w2_const = window_sum(e.source, k - T - 1,
                                                        k - 1)
                ineq.add([dcol] + w2_cols, [1.0] + [-v for v in w2_vals],
                         w2_const)
            # forcing rows (guard true ==> d = 1), in <= form:
            # -d + chi + sum(u lits) [+ entry_j] - laterEntries <= slack
            n_in = len(e.guard.inputs)
            cc, vv, chi_const = chi(k, e.source)
            if T is None:
                # d >= chi + sum(u lits) - n_in - sum(W1 entries)
                cols = [dcol] + cc + u_cols + blk_cols
                vals = ([-1.0] + list(vv) + list(u_vals)
                        + [-v for v in blk_vals])
                rhs = n_in - chi_const - u_const + blk_const
                ineq.add(cols, vals, rhs)
            else:
                # entry at j gives clock[k] = k-j-1 in (theta, T]; forced
                # unless a later re-entry superseded it
                for j in range(k - T - 1, k - theta - 1):
                    ecols, _, econst = entry_terms(e.source, j)
                    lcols, lvals, lconst = window_sum(e.source, j + 1, k - 1)
                    sources = [(col, 0.0) for col in ecols]
                    if econst > 0.0:
                        sources.append((None, econst))
                    for scol, sconst in sources:
                        cols = [dcol] + cc + u_cols + lcols
                        vals = ([-1.0] + list(vv) + list(u_vals)
                                + [-v for v in lvals])
                        rhs = (n_in + 1 - chi_const - u_const - sconst
                               + lconst)
                        if scol is not None:
                            cols = cols + [scol]
                            vals = vals + [1.0]
                        ineq.add(cols, vals, rhs)
        # mode balance: chi[k+1] = chi[k] + in - out
        for m in auto.modes:
            cols = [layout.x(k + 1, layout.xi[f"{prefix}.{m}"])]
            vals = [1.0]
            rhs = 0.0
            cc, vv, const = chi(k, m)
            cols += cc
            vals += [-v for v in vv]
            rhs += const
            for e in auto.edges:
                name = f"{prefix}.{e.source}->{e.target}"
                if e.target == m:
                    cols.append(layout.d(k, layout.di[name]))
                    vals.append(-1.0)
                if e.source == m:
                    cols.append(layout.d(k, layout.di[name]))
                    vals.append(1.0)
            eq.add(cols, vals, rhs)
        # one-hot (redundant, tightens)
        cols = [layout.x(k + 1, layout.xi[f"{prefix}.{m}"])
                for m in auto.modes]
        eq.add(cols, [1.0] * len(cols), 1.0)


def _carryover_rows(mld, layout):
    """MLD inequality rows that survive in the tight encoding: rows touching
    only mode indicators, inputs and retained z variables."""
    clock_cols = [i for i, n in enumerate(mld.x_names) if n.endswith(".clock")]
    dropped_z = [i for i, n in enumerate(mld.z_names)
                 if n.endswith(".z_reset")]
    keep = []
    for i in range(mld.E3.shape[0]):
        if np.any(mld.E4[i] != 0.0):
            continue
        if any(mld.E2[i, j] != 0.0 for j in clock_cols):
            continue
        if any(mld.E5[i, j] != 0.0 for j in dropped_z):
            continue
        keep.append(i)
    return keep


def build_uc(mld, demand, prices, init_modes=None, init_clocks=None,
             purchase_cap="demand", encoding="tight"):
    """Assemble the unit-commitment MILP over the demand horizon.

    Returns (MilpProblem, meta). Cost per step: lam_gas*(q_g_CHP + q_g_B) +
    lam_buy*P_purch - lam_sell*dPlus, with dPlus = P_e + P_purch - P_e_D >= 0
    enforced by the demand row; the constant lam_sell*P_e_D offset is added
    back so the reported objective is the full economic cost.

    encoding="tight" (default) replaces the clock states by time-indexed
    entry windows (equivalent trajectories, far tighter relaxation);
    encoding="mld" unrolls the compiled MLD matrices verbatim.
    """
    N = len(demand)
    if N == 0:
        raise ValidationError("empty demand horizon")
    layout = UcLayout(mld, N, encoding=encoding)
    autos = mld.meta["automata"]
    if init_modes is None:
        init_modes = {"CHP": "OFF", "FTB": "OFF"}
    if init_clocks is None:
        # all guards armed: saturated clocks
        init_clocks = {p: autos[p].clock_cap for p in autos}
    for p, auto in autos.items():
        if init_modes[p] not in auto.modes:
            raise ValidationError(f"unknown initial mode for {p}")
        if not (0 <= init_clocks[p] <= auto.clock_cap):
            raise ValidationError(f"initial clock for {p} out of range")
    x0 = hybrid.initial_state(mld, init_modes, init_clocks)

    eq = _SparseRows(layout.n_cols)
    ineq = _SparseRows(layout.n_cols)
    iy = {n: i for i, n in enumerate(mld.y_names)}

    def x0_tight(name):
        prefix, mode = name.split(".", 1)
        return 1.0 if init_modes[prefix] == mode else 0.0

    if encoding == "tight":
        for prefix, auto in autos.items():
            _emit_tight_unit(ineq, eq, layout, auto, prefix,
                             init_modes[prefix], init_clocks[prefix], N)
        keep_rows = _carryover_rows(mld, layout)
        x_map = [(layout.xi[n], j) for j, n in enumerate(mld.x_names)
                 if n in layout.xi]
        z_map = [(layout.zi[n], j) for j, n in enumerate(mld.z_names)
                 if n in layout.zi]
        for k in range(N):
            for i in keep_rows:
                cols, vals = [], []
                rhs = float(mld.E3[i])
                for jt, jm in z_map:
                    if mld.E5[i, jm] != 0.0:
                        cols.append(layout.z(k, jt))
                        vals.append(mld.E5[i, jm])
                for j in range(mld.n_u):
                    if mld.E1[i, j] != 0.0:
                        cols.append(layout.u(k, j))
                        vals.append(-mld.E1[i, j])
                for jt, jm in x_map:
                    if mld.E2[i, jm] != 0.0:
                        if k == 0:
                            rhs += mld.E2[i, jm] * x0_tight(layout.x_names[jt])
                        else:
                            cols.append(layout.x(k, jt))
                            vals.append(-mld.E2[i, jm])
                ineq.add(cols, vals, rhs)
            # z_exh recipe rows reference FTB.ON1 and P_e only; covered by
            # the carried-over envelope rows.
    else:
        for k in range(N):
            for i in range(mld.n_x):
                cols = [layout.x(k + 1, i)]
                vals = [1.0]
                rhs = 0.0
                if k == 0:
                    rhs = float(mld.A[i] @ x0)
                else:
                    cols += [layout.x(k, j) for j in range(mld.n_x)]
                    vals += list(-mld.A[i])
                cols += [layout.u(k, j) for j in range(mld.n_u)]
                vals += list(-mld.B1[i])
                cols += [layout.d(k, j) for j in range(mld.n_d)]
                vals += list(-mld.B2[i])
                cols += [layout.z(k, j) for j in range(mld.n_z)]
                vals += list(-mld.B3[i])
                eq.add(cols, vals, rhs)
            for i in range(mld.E3.shape[0]):
                cols = ([layout.d(k, j) for j in range(mld.n_d)]
                        + [layout.z(k, j) for j in range(mld.n_z)]
                        + [layout.u(k, j) for j in range(mld.n_u)])
                vals = (list(mld.E4[i]) + list(mld.E5[i]) + list(-mld.E1[i]))
                rhs = float(mld.E3[i])
                if k == 0:
                    rhs += float(mld.E2[i] @ x0)
                else:
                    cols += [layout.x(k, j) for j in range(mld.n_x)]
                    vals += list(-mld.E2[i])
                ineq.add(cols, vals, rhs)

    # Demand cover and purchase cap.
    def y_row(name, k):
        r = iy[name]
        cols = [layout.u(k, j) for j in range(mld.n_u)]
        vals = list(mld.D1[r])
        for jm in range(mld.n_z):
            if mld.D3[r, jm] != 0.0:
                zname = mld.z_names[jm]
                if encoding == "tight":
                    cols.append(layout.z(k, layout.zi[zname]))
                else:
                    cols.append(layout.z(k, jm))
                vals.append(mld.D3[r, jm])
        const = 0.0
        for jm in range(mld.n_x):
            cf = mld.C[r, jm]
            if cf == 0.0:
                continue
            name_x = mld.x_names[jm]
            if encoding == "tight" and name_x not in layout.xi:
                continue
            if k == 0:
                const += cf * (x0_tight(name_x) if encoding == "tight"
                               else x0[jm])
            else:
                cols.append(layout.x(k, layout.xi[name_x]
                                     if encoding == "tight" else jm))
                vals.append(cf)
        return cols, vals, const

    iu = layout.ui
    for k in range(N):
        cols, vals, const = y_row("P_e_tot", k)
        ineq.add(cols, [-v for v in vals], -float(demand.P_e[k]) + const)
        cols, vals, const = y_row("q_s_out", k)
        ineq.add(cols, [-v for v in vals], -float(demand.q_s[k]) + const)
        if purchase_cap == "demand":
            ineq.add([layout.u(k, iu["P_purch"])], [1.0],
                     float(demand.P_e[k]))

    if encoding == "mld":
        # Dwell-window strengthening cuts (valid: the reset clock blocks an
        # exit guard within its threshold window after any entry).
        for prefix, auto in autos.items():
            for e in auto.edges:
                t = e.guard.min_clock
                if t < 0:
                    continue
                out_name = f"{prefix}.{e.source}->{e.target}"
                in_names = _entries_into(auto, prefix, e.source)
                if not in_names:
                    continue
                for k in range(N):
                    cols = [layout.d(k, layout.di[out_name])]
                    vals = [1.0]
                    for j in range(max(0, k - t - 1), k):
                        for n_in in in_names:
                            cols.append(layout.d(j, layout.di[n_in]))
                            vals.append(1.0)
                    if len(cols) > 1:
                        ineq.add(cols, vals, 1.0)

    # Cost vector.
    c = np.zeros(layout.n_cols)
    const_obj = 0.0
    for k in range(N):
        lam_g = prices.at("lam_gas", k, N)
        lam_up = prices.at("lam_sell", k, N)
        lam_dn = prices.at("lam_buy", k, N)
        for name, w in (("q_g_CHP", lam_g), ("q_g_B", lam_g),
                        ("P_e_tot", -lam_up)):
            cols, vals, const = y_row(name, k)
            for col, v in zip(cols, vals):
                c[col] += w * v
            const_obj += w * const
        c[layout.u(k, iu["P_purch"])] += lam_dn
        const_obj += lam_up * float(demand.P_e[k])

    # Bounds and binary mask.
    lb = np.full(layout.n_cols, -np.inf)
    ub = np.full(layout.n_cols, np.inf)
    binary = np.zeros(layout.n_cols, dtype=bool)
    for k in range(N):
        for j, is_bin in enumerate(mld.u_binary):
            idx = layout.u(k, j)
            if is_bin:
                lb[idx], ub[idx] = 0.0, 1.0
                binary[idx] = True
            else:
                lb[idx] = 0.0  # all continuous inputs here are nonnegative
        for j in range(layout.n_d):
            idx = layout.d(k, j)
            lb[idx], ub[idx] = 0.0, 1.0
            binary[idx] = True
        for j, name in enumerate(layout.x_names):
            if encoding == "tight" or mld.x_binary[j]:
                idx = layout.x(k + 1, j)
                lb[idx], ub[idx] = 0.0, 1.0  # integral by propagation

    A_in, b_in = ineq.matrix()
    A_eq, b_eq = eq.matrix()
    lp = LpProblem(c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in,
                   lb=lb, ub=ub)
    prob = MilpProblem(lp=lp, binary=binary)
    prob_meta = {"layout": layout, "x0": x0, "const_obj": const_obj,
                 "demand": demand, "prices": prices,
                 "init_modes": dict(init_modes),
                 "init_clocks": dict(init_clocks), "encoding": encoding}
    return prob, prob_meta


def decode_schedule(mld, meta, x_sol, objective):
    layout = meta["layout"]
    N = layout.N
    iu = layout.ui
    autos = mld.meta["automata"]

    us, ds, zs, xs = [], [], [], []
    for k in range(N):
        us.append(x_sol[layout.u(k):layout.u(k) + layout.n_u])
        ds.append(x_sol[layout.d(k):layout.d(k) + layout.n_d])
        zs.append(x_sol[layout.z(k):layout.z(k) + layout.n_z])
        xs.append(x_sol[layout.x(k + 1):layout.x(k + 1) + layout.n_x])

    # Mode sequences: step 0 from the initial condition, then chi vectors.
    mode_seq = {p: [meta["init_modes"][p]] for p in autos}
    for k in range(N - 1):
        for p, auto in autos.items():
            hits = [m for m in auto.modes
                    if xs[k][layout.xi[f"{p}.{m}"]] > 0.5]
            if len(hits) != 1:
                raise ValidationError("decoded state is not one-hot")
            mode_seq[p].append(hits[0])
    # Clocks by replay of the automaton semantics over the decoded commands.
    cmds = {
        "CHP": [{"u_S": int(round(us[k][iu["CHP.u_S"]]))} for k in range(N)],
        "FTB": [{"u_S": int(round(us[k][iu["FTB.u_S"]])),
                 "u_SB": int(round(us[k][iu["FTB.u_SB"]])),
                 "u_ex": int(round(us[k][iu["FTB.u_ex"]]))}
                for k in range(N)],
    }
    clock_seq = {}
    for p, auto in autos.items():
        mode, clock = meta["init_modes"][p], meta["init_clocks"][p]
        clocks = [clock]
        for k in range(N - 1):
            mode, clock = hybrid.step_automaton(auto, mode, clock,
                                                cmds[p][k])
            clocks.append(clock)
        clock_seq[p] = clocks

    iy = {n: i for i, n in enumerate(mld.y_names)}

    def outputs(k):
        out = np.zeros(len(mld.y_names))
        for r in range(len(mld.y_names)):
            v = 0.0
            for j in range(mld.n_u):
                v += mld.D1[r, j] * us[k][j]
            for jm, zname in enumerate(mld.z_names):
                if mld.D3[r, jm] != 0.0 and zname in layout.zi:
                    v += mld.D3[r, jm] * zs[k][layout.zi[zname]]
            for jm, xname in enumerate(mld.x_names):
                cf = mld.C[r, jm]
                if cf == 0.0 or xname not in layout.xi:
                    continue
                if k == 0:
                    prefix, m = xname.split(".", 1)
                    v += cf * (1.0 if meta["init_modes"][prefix] == m else 0.0)
                else:
                    v += cf * xs[k - 1][layout.xi[xname]]
            out[r] = v
        return out

    ys = np.array([outputs(k) for k in range(N)])
    sched = Schedule(
        chp_mode=mode_seq["CHP"],
        ftb_mode=mode_seq["FTB"],
        chp_clock=clock_seq["CHP"],
        ftb_clock=clock_seq["FTB"],
        u_S_chp=np.array([u[iu["CHP.u_S"]] for u in us]).round().astype(int),
        u_S_ftb=np.array([u[iu["FTB.u_S"]] for u in us]).round().astype(int),
        u_SB=np.array([u[iu["FTB.u_SB"]] for u in us]).round().astype(int),
        u_ex=np.array([u[iu["FTB.u_ex"]] for u in us]).round().astype(int),
        P_e=np.array([u[iu["P_e"]] for u in us]),
        q_s_B=np.array([u[iu["q_s"]] for u in us]),
        P_purch=np.array([u[iu["P_purch"]] for u in us]),
        q_g_chp=ys[:, iy["q_g_CHP"]],
        q_g_b=ys[:, iy["q_g_B"]],
        q_s_out=ys[:, iy["q_s_out"]],
        P_e_tot=ys[:, iy["P_e_tot"]],
        objective=objective,
        meta={},
    )
    return sched


def solve_uc(mld, demand, prices, init_modes=None, init_clocks=None,
             gap=1e-4, backend="highs"):
    """Solve the UC MILP and decode/validate the Schedule.

    The default 1e-4 relative gap is far below every economic margin in the
    bundled scenarios while keeping day-horizon instances tractable; pass a
    tighter gap for oracle-equivalence checks on short horizons.
    """
    prob, meta = build_uc(mld, demand, prices, init_modes, init_clocks)
    res = solve_milp(prob, gap=gap, backend=backend)
    if res.status in (Status.INFEASIBLE,):
        raise SchedulingError(_infeasibility_hint(mld, demand))
    if not res.optimal and res.x is None:
        raise SchedulingError(f"UC solve failed with status {res.status}")
    objective = res.objective + meta["const_obj"]
    sched = decode_schedule(mld, meta, res.x, objective)
    report = validate_schedule(sched, demand, mld=mld, prices=prices)
    if report:
        raise SchedulingError("decoded schedule violates constraints: "
                              + "; ".join(report[:5]))
    return sched


def _infeasibility_hint(mld, demand):
    bounds = mld.meta.get("bounds")
    hints = []
    if bounds is not None and np.any(demand.q_s > bounds.q_s_max):
        ks = np.flatnonzero(demand.q_s > bounds.q_s_max)
        hints.append(f"steam demand exceeds q_s_max at steps {list(ks[:5])}")
    if not hints:
        hints.append("demand-cover constraints cannot be met from the "
                     "initial modes (check dwell times and demand timing)")
    return "UC MILP infeasible: " + "; ".join(hints)


def recompute_objective(sched, demand, prices):
    """Economic cost recomputed from the decoded schedule."""
    N = len(sched)
    total = 0.0
    for k in range(N):
        lam_g = prices.at("lam_gas", k, N)
        lam_up = prices.at("lam_sell", k, N)
        lam_dn = prices.at("lam_buy", k, N)
        d_plus = sched.P_e_tot[k] - demand.P_e[k]
        total += (lam_g * (sched.q_g_chp[k] + sched.q_g_b[k])
                  + lam_dn * sched.P_purch[k] - lam_up * d_plus)
    return total


def validate_schedule(sched, demand, mld=None, prices=None, tol=1e-6):
    """Recompute every schedule constraint; returns a violation report."""
    report = []
    N = len(sched)
    if len(demand) != N:
        raise ValidationError("demand horizon mismatch")
    for k in range(N):
        if sched.P_e_tot[k] < demand.P_e[k] - tol * (1 + demand.P_e[k]):
            report.append(f"step {k}: electric demand uncovered")
        if sched.q_s_out[k] < demand.q_s[k] - tol * (1 + demand.q_s[k]):
            report.append(f"step {k}: steam demand uncovered")
        if sched.P_purch[k] < -tol:
            report.append(f"step {k}: negative purchase")
        if sched.u_ex[k] == 1 and sched.chp_mode[k] != "ON":
            report.append(f"step {k}: valve open while CHP {sched.chp_mode[k]}")
    if mld is not None:
        autos = mld.meta["automata"]
        runs = {
            "CHP": [(m, c) for m, c in zip(sched.chp_mode, sched.chp_clock)],
            "FTB": [(m, c) for m, c in zip(sched.ftb_mode, sched.ftb_clock)],
        }
        cmd = {
            "CHP": [{"u_S": sched.u_S_chp[k]} for k in range(N)],
            "FTB": [{"u_S": sched.u_S_ftb[k], "u_SB": sched.u_SB[k],
                     "u_ex": sched.u_ex[k]} for k in range(N)],
        }
        for unit, auto in autos.items():
            for k in range(N - 1):
                m, c = hybrid.step_automaton(auto, runs[unit][k][0],
                                             runs[unit][k][1], cmd[unit][k])
                if (m, c) != runs[unit][k + 1]:
                    report.append(
                        f"step {k}: {unit} mode sequence is not an automaton "
                        f"run ({runs[unit][k]} -> {runs[unit][k+1]}, expected "
                        f"{(m, c)})")
    if prices is not None:
        recomputed = recompute_objective(sched, demand, prices)
        if abs(recomputed - sched.objective) > 1e-6 * max(1.0, abs(recomputed)):
            report.append("objective mismatch vs decoded schedule")
    return report


def schedule_to_csv(sched, path):
    """Schedule export mirroring the UC result panels (modes, supply split,
    steam)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["step", "chp_mode", "ftb_mode", "u_S_chp", "u_S_ftb",
                    "u_SB", "u_ex", "P_e_CHP_W", "P_purch_W", "P_e_tot_W",
                    "q_s_B_kg_s", "q_s_out_kg_s", "q_g_CHP_kg_s",
                    "q_g_B_kg_s"])
        for k in range(len(sched)):
            w.writerow([k, sched.chp_mode[k], sched.ftb_mode[k],
                        sched.u_S_chp[k], sched.u_S_ftb[k], sched.u_SB[k],
                        sched.u_ex[k],
                        f"{sched.P_e[k]:.6g}", f"{sched.P_purch[k]:.6g}",
                        f"{sched.P_e_tot[k]:.6g}", f"{sched.q_s_B[k]:.6g}",
                        f"{sched.q_s_out[k]:.6g}", f"{sched.q_g_chp[k]:.6g}",
                        f"{sched.q_g_b[k]:.6g}"])


def load_demand_prices_csv(path):
    """Read the demand/price CSV (step, P_e_D, q_s_D, lam_sell, lam_buy,
    lam_gas); returns (DemandProfile, PriceProfile)."""
    steps, pe, qs, lup, ldn, lg = [], [], [], [], [], []
    with open(path, newline="") as f:
        reader = csv.DictReader(
            line for line in f if not line.startswith("#"))
        required = {"step", "P_e_D", "q_s_D", "lam_sell", "lam_buy",
                    "lam_gas"}
        if reader.fieldnames is None or not required <= set(reader.fieldnames):
            raise ValidationError(
                f"demand CSV must have columns {sorted(required)}")
        for i, row in enumerate(reader):
            try:
                steps.append(int(row["step"]))
                pe.append(float(row["P_e_D"]))
                qs.append(float(row["q_s_D"]))
                lup.append(float(row["lam_sell"]))
                ldn.append(float(row["lam_buy"]))
                lg.append(float(row["lam_gas"]))
            except (TypeError, ValueError) as exc:
                raise ValidationError(
                    f"malformed demand CSV row {i + 2}: {exc}") from None
    demand = DemandProfile(P_e=np.array(pe), q_s=np.array(qs))
    prices = PriceProfile(lam_gas=np.array(lg), lam_sell=np.array(lup),
                          lam_buy=np.array(ldn))
    return demand, prices
