"""Convex QP solver: operator splitting with active-set polishing.

ADMM on the form min 0.5 x'Px + q'x s.t. l <= Ax <= u, where A stacks the
equality block (l = u), the inequality block and the variable bounds. Ruiz
equilibration plus cost normalization keep iterations well conditioned on
badly scaled MPC data. After convergence the active set is polished by one
equality-constrained KKT solve, which typically lands on the exact optimum;
the contract checked before reporting Optimal is the scaled KKT residual,
not the algorithm.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .problems import DEFAULT_CONFIG, SolveStatus, Status


def _stack(p):
    n = p.n
    blocks = [p.A_eq, p.A_in, np.eye(n)]
    A = np.vstack([b for b in blocks if b.shape[0]])
    l = np.concatenate([p.b_eq, np.full(p.A_in.shape[0], -np.inf), p.lb])
    u = np.concatenate([p.b_eq, p.b_in, p.ub])
    return A, l, u


def _ruiz(P, q, A, iters=10):
    n = P.shape[0]
    m = A.shape[0]
    d = np.ones(n)
    e = np.ones(m)
    Ps, As = P.copy(), A.copy()
    for _ in range(iters):
        col = np.maximum(np.abs(Ps).max(axis=0) if n else 0.0,
                         np.abs(As).max(axis=0) if m else 0.0)
        col[col < 1e-12] = 1.0
        dd = 1.0 / np.sqrt(col)
        row = np.abs(As).max(axis=1) if m else np.array([])
        if m:
            row[row < 1e-12] = 1.0
        ee = 1.0 / np.sqrt(row) if m else np.array([])
        Ps = (dd[:, None] * Ps) * dd[None, :]
        if m:
            As = (ee[:, None] * As) * dd[None, :]
        d *= dd
        if m:
            e *= ee
    qs = d * q
    colP = np.abs(Ps).max(axis=0)
    gamma = 1.0 / max(np.mean(colP) if n else 1.0, np.abs(qs).max(), 1e-8)
    return gamma * Ps, gamma * qs, As, d, e, gamma


def _active_set(p, A, l, u, config, warm_active=None, max_cycles=300):
    """Iterated active-set solve (guess set, solve equality QP, exchange).

    Working-set iteration in the style of Theil/van de Panne: solve the
    equality-constrained QP on the working set, add violated rows, drop
    rows with wrong-signed multipliers; exact on convergence. Returns
    (x, y, active_mask) or (None, None, None) when it cycles or stalls.
    """
    n = p.n
    m = A.shape[0]
    eq = np.isfinite(l) & np.isfinite(u) & (np.abs(u - l) < 1e-12)
    act_low = np.zeros(m, dtype=bool)
    act_upp = np.zeros(m, dtype=bool)
    if warm_active is not None:
        act_low, act_upp = warm_active[0].copy(), warm_active[1].copy()
        act_low &= np.isfinite(l)
        act_upp &= np.isfinite(u)
    act_upp[eq] = False
    act_low[eq] = True  # carry equalities on the lower side
    scale_H = 1.0 + np.abs(p.H).max()
    seen = set()
    for _ in range(max_cycles):
        act = act_low | act_upp
        key = (act_low.tobytes(), act_upp.tobytes())
        if key in seen:
            return None, None, None
        seen.add(key)
        idx = np.flatnonzero(act)
        A_act = A[idx]
        b_act = np.where(act_low[idx], l[idx], u[idx])
        k = len(idx)
        K = np.zeros((n + k, n + k))
        K[:n, :n] = p.H + 1e-12 * scale_H * np.eye(n)
        K[:n, n:] = A_act.T
        K[n:, :n] = A_act
        K[n:, n:] = -1e-12 * np.eye(k)
        rhs = np.concatenate([-p.c, b_act])
        try:
            sol = np.linalg.solve(K, rhs)
            for _ in range(2):
                sol += np.linalg.solve(K, rhs - K @ sol)
        except np.linalg.LinAlgError:
            return None, None, None
        x = sol[:n]
        nu = sol[n:]
        Ax = A @ x
        span = 1.0 + np.maximum(np.abs(l, where=np.isfinite(l),
                                       out=np.zeros(m)),
                                np.abs(u, where=np.isfinite(u),
                                       out=np.zeros(m)))
        viol_up = np.where(np.isfinite(u), (Ax - u) / span, -np.inf)
        viol_lo = np.where(np.isfinite(l), (l - Ax) / span, -np.inf)
        viol_up[act] = -np.inf
        viol_lo[act] = -np.inf
        tol = 1e-9
        changed = False
        y_full = np.zeros(m)
        y_full[idx] = nu
        # block exchange: activate all violated rows (worst side first),
        # then drop all wrong-signed multipliers (not equalities)
        add_up = np.flatnonzero(viol_up > tol)
        add_lo = np.flatnonzero(viol_lo > tol)
        for i in add_up:
            if viol_up[i] >= viol_lo[i]:
                act_upp[i] = True
                act_low[i] = False
                changed = True
        for i in add_lo:
            if viol_lo[i] > viol_up[i]:
                act_low[i] = True
                act_upp[i] = False
                changed = True
        if not changed:
            for pos, i in enumerate(idx):
                if eq[i]:
                    continue
                if act_upp[i] and nu[pos] < -tol:
                    act_upp[i] = False
                    changed = True
                if act_low[i] and nu[pos] > tol:
                    act_low[i] = False
                    changed = True
        if not changed:
            return x, y_full, (act_low, act_upp)
    return None, None, None


def solve_qp(p, config=DEFAULT_CONFIG, warm_start=None):
    """Solve a QpProblem; supports warm starting from a prior solution.

    Primary path: iterated dense active set (exact KKT on success), with a
    scaled ADMM + polish fallback when the active-set iteration cycles.

    Parameters
    ----------
    p : QpProblem
    config : SolverConfig
    warm_start : (x, y) or SolveStatus, optional
        Primal/dual starting point; the prior active set (from
        ``stats['active']``) seeds the working set.
    """
    n = p.n
    A0, l0, u0 = _stack(p)

    warm_active = None
    ws_x = ws_y = None
    if warm_start is not None:
        if isinstance(warm_start, SolveStatus):
            ws_x = warm_start.x
            ws_y = warm_start.stats.get("y")
            warm_active = warm_start.stats.get("active")
        else:
            ws_x, ws_y = warm_start
    if warm_active is not None and len(warm_active[0]) != A0.shape[0]:
        warm_active = None

    x_as, y_as, active = _active_set(p, A0, l0, u0, config,
                                     warm_active=warm_active)
    if x_as is not None:
        feas, kkt = _kkt_residuals(p, A0, l0, u0, x_as, y_as)
        if feas <= config.feas_tol and kkt <= config.kkt_tol:
            obj = float(0.5 * x_as @ p.H @ x_as + p.c @ x_as)
            return SolveStatus(Status.OPTIMAL, obj, x_as,
                               {"iterations": 0, "feasibility": feas,
                                "stationarity": kkt, "y": y_as,
                                "active": active, "method": "active-set"})

    P, q, A, d, e, gamma = _ruiz(p.H, p.c, A0)
    l = e * l0
    u = e * u0
    m = A.shape[0]

    x = np.zeros(n)
    y = np.zeros(m)
    if ws_x is not None:
        x = ws_x / d
    if ws_y is not None and len(ws_y) == m:
        y = gamma * ws_y / e
    z = np.clip(A @ x, l, u)

    sigma = config.admm_sigma
    rho_base = config.admm_rho
    eq_mask = np.isfinite(l) & np.isfinite(u) & (np.abs(u - l) < 1e-12)
    alpha = 1.6

    def factor(rho_vec):
        M = P + sigma * np.eye(n) + (A.T * rho_vec) @ A
        return cho_factor(M, lower=True)

    rho = np.where(eq_mask, 1e3 * rho_base, rho_base)
    fac = factor(rho)
    it = 0
    best = None  # (feas, kkt, x, y, polished)

    def consider(x_orig, y_orig, polished):
        nonlocal best
        feas, kkt = _kkt_residuals(p, A0, l0, u0, x_orig, y_orig)
        if best is None or (feas + kkt) < (best[0] + best[1]):
            best = (feas, kkt, x_orig, y_orig, polished)
        return feas, kkt

    for it in range(1, config.admm_max_iter + 1):
        rhs = sigma * x - q + A.T @ (rho * z - y)
        x_new = cho_solve(fac, rhs)
        Ax = A @ x_new
        x = alpha * x_new + (1 - alpha) * x
        z_old = z
        z = np.clip(alpha * Ax + (1 - alpha) * z_old + y / rho, l, u)
        y = y + rho * (alpha * Ax + (1 - alpha) * z_old - z)
        if it % config.admm_check_every == 0 or it == config.admm_max_iter:
            r_prim = np.abs(A @ x - z).max() if m else 0.0
            r_dual = np.abs(P @ x + q + A.T @ y).max()
            s_prim = max(np.abs(A @ x).max() if m else 0.0,
                         np.abs(z).max() if m else 0.0, 1.0)
            s_dual = max(np.abs(P @ x).max(),
                         np.abs(A.T @ y).max() if m else 0.0,
                         np.abs(q).max(), 1.0)
            if r_prim < 1e-5 * s_prim and r_dual < 1e-6 * s_dual:
                # moderately converged: polish on the original data
                x_orig = d * x
                y_orig = e * y / gamma
                x_pol, y_pol = _polish(p, A0, l0, u0, x_orig, y_orig)
                if x_pol is not None:
                    feas, kkt = consider(x_pol, y_pol, True)
                    if feas <= config.feas_tol and kkt <= config.kkt_tol:
                        break
                feas, kkt = consider(x_orig, y_orig, False)
                if feas <= config.feas_tol and kkt <= config.kkt_tol:
                    break
                if r_prim < 1e-9 * s_prim and r_dual < 1e-9 * s_dual:
                    break  # as converged as it gets
            ratio = (r_prim / s_prim) / max(r_dual / s_dual, 1e-16)
            scale = np.sqrt(ratio)
            if scale > 5.0 or scale < 0.2:
                rho_base = float(np.clip(rho_base * scale, 1e-6, 1e8))
                rho = np.where(eq_mask, 1e3 * rho_base, rho_base)
                fac = factor(rho)

    if best is None:
        x_orig = d * x
        y_orig = e * y / gamma
        x_pol, y_pol = _polish(p, A0, l0, u0, x_orig, y_orig)
        if x_pol is not None:
            consider(x_pol, y_pol, True)
        consider(x_orig, y_orig, False)
    feas, kkt, x_orig, y_orig, polished = best
    obj = float(0.5 * x_orig @ p.H @ x_orig + p.c @ x_orig)
    stats = {"iterations": it, "feasibility": feas, "stationarity": kkt,
             "y": y_orig, "polished": polished}
    if feas <= config.feas_tol and kkt <= config.kkt_tol:
        return SolveStatus(Status.OPTIMAL, obj, x_orig, stats)
    return SolveStatus(Status.ITERATION_LIMIT, obj, x_orig, stats)


def _kkt_residuals(p, A, l, u, x, y):
    Ax = A @ x
    feas = max(np.maximum(Ax - u, 0.0).max(initial=0.0),
               np.maximum(l - Ax, 0.0).max(initial=0.0))
    feas /= 1.0 + max(np.abs(l[np.isfinite(l)]).max(initial=0.0),
                      np.abs(u[np.isfinite(u)]).max(initial=0.0))
    stat = np.abs(p.H @ x + p.c + A.T @ y).max()
    stat /= 1.0 + max(np.abs(p.c).max(), np.abs(p.H @ x).max())
    return feas, stat


def _polish(p, A, l, u, x, y, act_tol=1e-6):
    m = A.shape[0]
    Ax = A @ x
    span = 1.0 + np.abs(Ax)
    low = (np.isfinite(l) & ((Ax - l) < act_tol * span)) | (y < -act_tol)
    upp = (np.isfinite(u) & ((u - Ax) < act_tol * span)) | (y > act_tol)
    eq = np.isfinite(l) & np.isfinite(u) & (np.abs(u - l) < 1e-12)
    low |= eq
    upp &= ~low
    act = low | upp
    b_act = np.where(low, l, u)[act]
    A_act = A[act]
    k = A_act.shape[0]
    n = p.n
    K = np.zeros((n + k, n + k))
    K[:n, :n] = p.H + 1e-10 * np.eye(n)
    K[:n, n:] = A_act.T
    K[n:, :n] = A_act
    K[n:, n:] = -1e-10 * np.eye(k)
    rhs = np.concatenate([-p.c, b_act])
    try:
        sol = np.linalg.solve(K, rhs)
        # one step of iterative refinement
        sol += np.linalg.solve(K, rhs - K @ sol)
    except np.linalg.LinAlgError:
        return None, None
    x_new = sol[:n]
    nu = sol[n:]
    y_new = np.zeros(m)
    y_new[act] = nu
    # Dual signs: lower-active rows need y <= 0, upper-active y >= 0.
    sign_ok = (np.all(y_new[low & ~eq] <= act_tol)
               and np.all(y_new[upp] >= -act_tol))
    feas, kkt = _kkt_residuals(p, A, l, u, x_new, y_new)
    if sign_ok and feas <= 1e-8 and kkt <= 1e-8:
        return x_new, y_new
    return None, None
