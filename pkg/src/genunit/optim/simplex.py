"""Two-phase primal simplex for dense desk-scale linear programs.

The problem is converted to standard form (equalities over nonnegative
variables) by shifting finite lower bounds, splitting free variables, and
adding slacks for inequalities and finite upper bounds. Pricing is Dantzig's
rule with a Bland's-rule fallback once degeneracy stalls progress, which
prevents cycling. Dense linear algebra throughout; intended for problems up
to a few thousand variables.
"""

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError
from .problems import DEFAULT_CONFIG, SolveStatus, Status, feasibility_residual

_DENSE_LIMIT = 4_000_000  # entries; beyond this, use the highs backend


def _dense(M, name):
    if sp.issparse(M):
        if M.shape[0] * M.shape[1] > _DENSE_LIMIT:
            raise ValidationError(
                f"{name} too large for the dense simplex; use backend='highs'")
        return M.toarray()
    return M


class _StandardForm:
    """min c'z, A z = b, z >= 0 together with the map back to x."""

    def __init__(self, p):
        n = p.n
        lb, ub = p.lb, p.ub
        self.p = p
        # x_j = z_j + lb_j (finite lb), or z_j+ - z_j- (free below).
        self.split = ~np.isfinite(lb)
        self.shift = np.where(np.isfinite(lb), lb, 0.0)
        self.n_orig = n
        n_z = n + int(self.split.sum())

        def expand(A):
            A = _dense(A, "constraint matrix")
            if not A.shape[0]:
                return np.zeros((0, n_z))
            extra = -A[:, self.split]
            return np.hstack([A, extra])

        A_eq = expand(p.A_eq)
        b_eq = p.b_eq - p.A_eq @ self.shift if p.A_eq.shape[0] else p.b_eq
        A_in = expand(p.A_in)
        b_in = p.b_in - p.A_in @ self.shift if p.A_in.shape[0] else p.b_in

        # Finite upper bounds become rows x_j + s = ub_j - lb_j.
        ub_rows = []
        ub_rhs = []
        for j in np.flatnonzero(np.isfinite(ub)):
            row = np.zeros(n_z)
            row[j] = 1.0
            if self.split[j]:
                row[n + int(self.split[:j].sum())] = -1.0
            ub_rows.append(row)
            ub_rhs.append(ub[j] - self.shift[j])
        n_ub = len(ub_rows)
        n_in = A_in.shape[0]

        rows = A_eq.shape[0] + n_in + n_ub
        cols = n_z + n_in + n_ub
        A = np.zeros((rows, cols))
        b = np.zeros(rows)
        r = A_eq.shape[0]
        A[:r, :n_z] = A_eq
        b[:r] = b_eq
        if n_in:
            A[r:r + n_in, :n_z] = A_in
            A[r:r + n_in, n_z:n_z + n_in] = np.eye(n_in)
            b[r:r + n_in] = b_in
        if n_ub:
            A[r + n_in:, :n_z] = np.array(ub_rows)
            A[r + n_in:, n_z + n_in:] = np.eye(n_ub)
            b[r + n_in:] = ub_rhs

        c = np.zeros(cols)
        c[:n] = p.c
        c[n:n_z] = -p.c[self.split]
        self.A, self.b, self.c = A, b, c
        self.n_z = n_z

    def recover(self, z):
        x = z[:self.n_orig] + self.shift
        if self.split.any():
            x[self.split] -= z[self.n_orig:self.n_z]
        return x


def _simplex_core(A, b, c, basis, max_iter, tol=1e-9):
    """Primal simplex on a feasible starting basis. Returns (status, basis, x)."""
    m, n = A.shape
    it = 0
    stall = 0
    bland = False
    while True:
        B = A[:, basis]
        try:
            xB = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError:
            return "singular", basis, None
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        if bland:
            candidates = np.flatnonzero(reduced < -tol)
            if candidates.size == 0:
                return "optimal", basis, xB
            enter = candidates[0]
        else:
            enter = int(np.argmin(reduced))
            if reduced[enter] >= -tol:
                return "optimal", basis, xB
        d = np.linalg.solve(B, A[:, enter])
        pos = d > tol
        if not pos.any():
            return "unbounded", basis, xB
        ratios = np.full(m, np.inf)
        ratios[pos] = xB[pos] / d[pos]
        theta = ratios.min()
        if bland:
            # leave: smallest basis index among minimal ratios
            ties = np.flatnonzero(ratios <= theta + tol)
            leave = ties[np.argmin(np.asarray(basis)[ties])]
        else:
            leave = int(np.argmin(ratios))
        if theta <= tol:
            stall += 1
            if stall > m + n:
                bland = True
        else:
            stall = 0
        basis = list(basis)
        basis[leave] = enter
        it += 1
        if it > max_iter:
            return "iteration_limit", basis, xB


def solve_lp(p, config=DEFAULT_CONFIG):
    """Solve an LpProblem with the two-phase simplex.

    Deterministic given the fixed pricing rule. Optimal results satisfy the
    scaled feasibility and stationarity residual contract.
    """
    if p.c.ndim != 1:
        raise ValidationError("cost must be a vector")
    sf = _StandardForm(p)
    A, b, c = sf.A.copy(), sf.b.copy(), sf.c
    m, n = A.shape
    if m == 0:
        # Pure bound-constrained LP: minimize by sign of c.
        x = np.where(p.c > 0, p.lb, np.where(p.c < 0, p.ub, np.where(
            np.isfinite(p.lb), p.lb, 0.0)))
        if not np.all(np.isfinite(x[p.c != 0])):
            return SolveStatus(Status.UNBOUNDED)
        x = np.where(np.isfinite(x), x, 0.0)
        return SolveStatus(Status.OPTIMAL, float(p.c @ x), x,
                           {"iterations": 0})

    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    # Phase 1 with artificial variables.
    A1 = np.hstack([A, np.eye(m)])
    c1 = np.concatenate([np.zeros(n), np.ones(m)])
    basis = list(range(n, n + m))
    status, basis, xB = _simplex_core(A1, b, c1, basis, config.simplex_max_iter)
    if status == "iteration_limit":
        return SolveStatus(Status.ITERATION_LIMIT, stats={"phase": 1})
    if status == "singular":
        return SolveStatus(Status.NUMERICAL_FAILURE, stats={"phase": 1})
    phase1_obj = float(c1[basis] @ xB)
    if phase1_obj > 1e-7 * (1.0 + abs(b).max()):
        return SolveStatus(Status.INFEASIBLE, stats={"phase1": phase1_obj})
    # Drive artificials out of the basis where possible.
    for i, var in enumerate(basis):
        if var >= n:
            row = np.linalg.solve(A1[:, basis], A1)[i, :n]
            pivots = np.flatnonzero(np.abs(row) > 1e-8)
            pivots = [j for j in pivots if j not in basis]
            if pivots:
                basis[i] = int(pivots[0])
    keep = [j for j in basis if j < n]
    if len(keep) < m:
        # Redundant rows: keep artificials pinned at zero by forbidding entry.
        A2 = A1
        c2 = np.concatenate([c, np.full(m, 1e12)])
    else:
        A2 = A
        c2 = c
        basis = keep
    status, basis, xB = _simplex_core(A2, b, c2, basis, config.simplex_max_iter)
    if status == "iteration_limit":
        return SolveStatus(Status.ITERATION_LIMIT, stats={"phase": 2})
    if status == "singular":
        return SolveStatus(Status.NUMERICAL_FAILURE, stats={"phase": 2})
    if status == "unbounded":
        return SolveStatus(Status.UNBOUNDED)
    z = np.zeros(A2.shape[1])
    z[basis] = xB
    x = sf.recover(z[:sf.n_z])
    obj = float(p.c @ x)
    feas = feasibility_residual(p, x)
    y = np.linalg.solve(A2[:, basis].T, c2[np.asarray(basis)])
    reduced = c2 - A2.T @ y
    kkt = max(0.0, -reduced.min()) / (1.0 + np.abs(p.c).max())
    stats = {"feasibility": feas, "stationarity": kkt}
    if feas > config.feas_tol or kkt > config.kkt_tol:
        return SolveStatus(Status.NUMERICAL_FAILURE, obj, x, stats)
    return SolveStatus(Status.OPTIMAL, obj, x, stats)
