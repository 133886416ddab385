"""Independent brute-force oracles used across the test suite.

These deliberately avoid the production code paths: vertex enumeration for
LPs, long-run projected gradient for box QPs, exhaustive enumeration for
binary programs, and dynamic programming over mode sequences for the unit
commitment. Expected values in tests are computed (or frozen from) these.
"""

import itertools

import numpy as np


def lp_vertex_enumeration(c, A_in, b_in, lb, ub):
    """Optimal objective of min c'x, A_in x <= b_in, lb <= x <= ub by
    enumerating basic feasible points (intersections of n active
    constraints)."""
    n = len(c)
    rows = [(*A_in[i], b_in[i]) for i in range(len(A_in))]
    for j in range(n):
        e = np.zeros(n)
        e[j] = -1.0
        rows.append((*e, -lb[j]))
        e = np.zeros(n)
        e[j] = 1.0
        rows.append((*e, ub[j]))
    rows = np.array(rows)
    A_all, b_all = rows[:, :n], rows[:, n]
    best = np.inf
    best_x = None
    for idx in itertools.combinations(range(len(rows)), n):
        A_sq = A_all[list(idx)]
        if abs(np.linalg.det(A_sq)) < 1e-10:
            continue
        x = np.linalg.solve(A_sq, b_all[list(idx)])
        if np.all(A_all @ x <= b_all + 1e-9):
            obj = c @ x
            if obj < best:
                best = obj
                best_x = x
    return best, best_x


def qp_projected_gradient(H, c, lb, ub, iters=500000, tol=1e-12):
    """Long-run projected gradient for min 0.5 x'Hx + c'x on a box."""
    L = np.linalg.eigvalsh(H).max()
    alpha = 1.0 / L
    x = np.clip(np.zeros(len(c)), lb, ub)
    for _ in range(iters):
        x_new = np.clip(x - alpha * (H @ x + c), lb, ub)
        if np.abs(x_new - x).max() < tol:
            x = x_new
            break
        x = x_new
    return 0.5 * x @ H @ x + c @ x, x


def knapsack_enumeration(values, weights, capacity):
    """Exhaustive 2^n enumeration of the 0/1 knapsack maximum value."""
    n = len(values)
    best = 0.0
    best_sel = np.zeros(n)
    for bits in itertools.product((0, 1), repeat=n):
        sel = np.array(bits, dtype=float)
        if sel @ weights <= capacity + 1e-12:
            v = sel @ values
            if v > best:
                best = v
                best_sel = sel
    return best, best_sel


def uc_dispatch_lp(mld, mc, mb, P_D, q_D, lam_g, lam_up, lam_dn):
    """Optimal per-step continuous dispatch given the two current modes.

    Mirrors the unit-commitment economics: variables (P_e, q_s, P_purch),
    demand cover, purchase capped by demand, burner floor in the
    valve-open production mode. Returns (cost, feasible).
    """
    from scipy.optimize import linprog

    chp = mld.meta["chp_map"]
    hl = mld.meta["ftb_map"]
    bounds_tab = mld.meta["bounds"]
    const = 0.0
    if mc == "CS":
        const += lam_g * chp.q_g_cs
    elif mc == "HS":
        const += lam_g * chp.q_g_hs
    if mb == "CS":
        const += lam_g * hl.q_g_cs
    elif mb == "HS":
        const += lam_g * hl.q_g_hs
    elif mb == "SB":
        const += lam_g * hl.q_g_sb

    served = q_D <= 1e-12
    if mb == "SB":
        served = q_D <= hl.q_s_sb + 1e-12
    producing = mb in ("ON0", "ON1")
    if not producing and not served:
        return np.inf, False

    # cost coefficients on (P_e, q_s, P_purch)
    c = np.zeros(3)
    if mc == "ON":
        c[0] += lam_g / chp.gamma_q
        const += -lam_g * chp.P_int / chp.gamma_q
    if producing:
        c[1] += lam_g * hl.gamma1
        const += lam_g * hl.gamma3
        if mb == "ON1":
            c[0] += lam_g * hl.gamma2 * chp.gamma_h
    c[0] += -lam_up
    c[2] += lam_dn - lam_up
    const += lam_up * P_D

    A_ub, b_ub = [], []
    A_ub.append([-1.0, 0.0, -1.0])
    b_ub.append(-P_D)
    if mb == "ON1":
        A_ub.append([-hl.gamma2 * chp.gamma_h, -hl.gamma1, 0.0])
        b_ub.append(hl.gamma3 - bounds_tab.q_g_min)
    pe_b = (chp.P_e_min, chp.P_e_max) if mc == "ON" else (0.0, 0.0)
    if producing:
        qs_b = (max(bounds_tab.q_s_min, q_D), bounds_tab.q_s_max)
        if qs_b[0] > qs_b[1] + 1e-12:
            return np.inf, False
    else:
        qs_b = (0.0, 0.0)
    res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                  bounds=[pe_b, qs_b, (0.0, P_D)], method="highs")
    if res.status != 0:
        return np.inf, False
    return const + res.fun, True


def uc_dp_oracle(mld, demand, prices, init_modes, init_clocks):
    """Exact optimal UC cost by dynamic programming over joint mode/clock
    sequences with the per-step dispatch LP; independent of the MILP path."""
    from genunit.hybrid import step_automaton

    autos = mld.meta["automata"]
    chp_auto, ftb_auto = autos["CHP"], autos["FTB"]
    N = len(demand)
    dispatch_cache = {}

    def dispatch(mc, mb, k):
        key = (mc, mb, k)
        if key not in dispatch_cache:
            dispatch_cache[key] = uc_dispatch_lp(
                mld, mc, mb, float(demand.P_e[k]), float(demand.q_s[k]),
                prices.at("lam_gas", k, N), prices.at("lam_sell", k, N),
                prices.at("lam_buy", k, N))
        return dispatch_cache[key]

    start = (init_modes["CHP"], init_clocks["CHP"],
             init_modes["FTB"], init_clocks["FTB"])
    states = {start: 0.0}
    for k in range(N):
        new = {}
        for (mc, cc, mb, cb), cost in states.items():
            if mb == "ON1" and mc != "ON":
                continue
            step_cost, feasible = dispatch(mc, mb, k)
            if not feasible:
                continue
            for u_sc in (0, 1):
                for u_sb in (0, 1):
                    for u_standby in (0, 1):
                        for u_ex in (0, 1):
                            if u_ex and mc != "ON":
                                continue
                            mc2, cc2 = step_automaton(chp_auto, mc, cc,
                                                      {"u_S": u_sc})
                            mb2, cb2 = step_automaton(
                                ftb_auto, mb, cb,
                                {"u_S": u_sb, "u_SB": u_standby,
                                 "u_ex": u_ex})
                            if mb2 == "ON1" and mc2 != "ON":
                                continue
                            key = (mc2, cc2, mb2, cb2)
                            total = cost + step_cost
                            if total < new.get(key, np.inf) - 1e-12:
                                new[key] = total
        states = new
        if not states:
            return np.inf
    return min(states.values())


def central_difference_jacobian(f, x, scale=1e-6):
    """Dense central-difference Jacobian of a vector map."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((len(f0), len(x)))
    for j in range(len(x)):
        h = scale * max(abs(x[j]), 1.0)
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        J[:, j] = (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h)
    return J
