"""Branch-and-bound MILP solver over binary variables.

LP-relaxation bounding with best-bound node selection (ties broken by node
sequence number, i.e. lowest creation index), most-fractional branching, and
a root rounding heuristic for an early incumbent. Deterministic. A "highs"
backend delegates the whole problem to scipy's HiGHS wrapper for instances
beyond desk scale (the 96-step unit-commitment MILP); the self-contained
path carries all module contracts.
"""

import heapq
from dataclasses import replace as _dc_replace

import numpy as np

from ..errors import ValidationError
from .problems import DEFAULT_CONFIG, LpProblem, SolveStatus, Status
from .simplex import solve_lp as _solve_lp_simplex


def solve_lp(p, config=DEFAULT_CONFIG, backend="simplex"):
    """LP front-end: self-contained simplex or the scipy HiGHS backend."""
    if backend == "simplex":
        return _solve_lp_simplex(p, config)
    if backend == "highs":
        return _solve_lp_highs(p, config)
    raise ValidationError(f"unknown LP backend {backend!r}")


def _solve_lp_highs(p, config):
    from scipy.optimize import linprog

    bounds = list(zip(np.where(np.isfinite(p.lb), p.lb, -np.inf),
                      np.where(np.isfinite(p.ub), p.ub, np.inf)))
    res = linprog(p.c,
                  A_ub=p.A_in if p.A_in.shape[0] else None,
                  b_ub=p.b_in if p.A_in.shape[0] else None,
                  A_eq=p.A_eq if p.A_eq.shape[0] else None,
                  b_eq=p.b_eq if p.A_eq.shape[0] else None,
                  bounds=bounds, method="highs")
    if res.status == 0:
        return SolveStatus(Status.OPTIMAL, float(res.fun), np.asarray(res.x),
                           {"backend": "highs"})
    if res.status == 2:
        return SolveStatus(Status.INFEASIBLE, stats={"backend": "highs"})
    if res.status == 3:
        return SolveStatus(Status.UNBOUNDED, stats={"backend": "highs"})
    return SolveStatus(Status.NUMERICAL_FAILURE,
                       stats={"backend": "highs", "scipy_status": res.status})


def _solve_milp_highs(p, gap, config):
    from scipy.optimize import Bounds, LinearConstraint, milp

    lp = p.lp
    constraints = []
    if lp.A_eq.shape[0]:
        constraints.append(LinearConstraint(lp.A_eq, lp.b_eq, lp.b_eq))
    if lp.A_in.shape[0]:
        constraints.append(LinearConstraint(lp.A_in, -np.inf, lp.b_in))
    res = milp(lp.c, constraints=constraints,
               integrality=p.binary.astype(int),
               bounds=Bounds(lp.lb, lp.ub),
               options={"mip_rel_gap": gap, "presolve": True})
    if res.status == 0:
        return SolveStatus(Status.OPTIMAL, float(res.fun), np.asarray(res.x),
                           {"backend": "highs", "gap": res.mip_gap})
    if res.status == 2:
        return SolveStatus(Status.INFEASIBLE, stats={"backend": "highs"})
    if res.status in (1, 3):
        x = np.asarray(res.x) if res.x is not None else None
        obj = float(res.fun) if res.x is not None else np.nan
        return SolveStatus(Status.ITERATION_LIMIT, obj, x,
                           {"backend": "highs"})
    return SolveStatus(Status.NUMERICAL_FAILURE, stats={"backend": "highs"})


def _with_bounds(lp, lb, ub):
    new = LpProblem(c=lp.c, A_eq=lp.A_eq, b_eq=lp.b_eq, A_in=lp.A_in,
                    b_in=lp.b_in, lb=lb, ub=ub)
    return new


def solve_milp(p, gap=None, config=DEFAULT_CONFIG, backend="bb",
               lp_backend="simplex"):
    """Solve a MilpProblem to a proven relative gap (default 1e-6).

    Returns Optimal with the incumbent when the gap is proven,
    IterationLimit with the best incumbent and remaining gap when the node
    budget runs out, or Infeasible.
    """
    gap = config.mip_gap if gap is None else gap
    if backend == "highs":
        return _solve_milp_highs(p, gap, config)
    if backend != "bb":
        raise ValidationError(f"unknown MILP backend {backend!r}")

    lp = p.lp
    binary = p.binary
    int_tol = config.int_tol

    def lp_solve(lb, ub):
        return solve_lp(_with_bounds(lp, lb, ub), config, backend=lp_backend)

    incumbent = None
    incumbent_obj = np.inf
    incumbent_history = []
    nodes_explored = 0
    seq = 0

    root = lp_solve(lp.lb, lp.ub)
    if root.status is Status.INFEASIBLE:
        return SolveStatus(Status.INFEASIBLE, stats={"nodes": 1})
    if root.status is Status.UNBOUNDED:
        return SolveStatus(Status.UNBOUNDED, stats={"nodes": 1})
    if root.status is not Status.OPTIMAL:
        return SolveStatus(Status.NUMERICAL_FAILURE, stats={"nodes": 1})

    def fractionality(x):
        f = np.zeros(len(x))
        f[binary] = np.abs(x[binary] - np.round(x[binary]))
        return f

    def try_incumbent(x, obj):
        nonlocal incumbent, incumbent_obj
        if obj < incumbent_obj - 1e-12:
            incumbent = x.copy()
            incumbent_obj = obj
            incumbent_history.append(obj)

    frac = fractionality(root.x)
    if frac.max(initial=0.0) <= int_tol:
        # Integral relaxation: zero branching nodes needed.
        try_incumbent(root.x, root.objective)
        return SolveStatus(Status.OPTIMAL, incumbent_obj, incumbent,
                           {"nodes": 0, "gap": 0.0,
                            "incumbents": incumbent_history})

    # Rounding heuristic at the root for an early incumbent.
    lb_r, ub_r = lp.lb.copy(), lp.ub.copy()
    rounded = np.round(root.x[binary])
    lb_r[binary] = rounded
    ub_r[binary] = rounded
    heur = lp_solve(lb_r, ub_r)
    if heur.status is Status.OPTIMAL:
        try_incumbent(heur.x, heur.objective)

    heap = []
    heapq.heappush(heap, (root.objective, seq, lp.lb, lp.ub, 0, root))
    seq += 1

    def rel_gap(best_bound):
        if incumbent is None:
            return np.inf
        return (incumbent_obj - best_bound) / max(1.0, abs(incumbent_obj))

    while heap:
        bound, _, lbn, ubn, depth, rel = heapq.heappop(heap)
        if incumbent is not None and rel_gap(bound) <= gap:
            return SolveStatus(Status.OPTIMAL, incumbent_obj, incumbent,
                               {"nodes": nodes_explored, "gap": rel_gap(bound),
                                "incumbents": incumbent_history})
        nodes_explored += 1
        if nodes_explored > config.node_budget or depth > config.depth_cap:
            best_bound = min([bound] + [h[0] for h in heap]) if heap else bound
            return SolveStatus(Status.ITERATION_LIMIT, incumbent_obj,
                               incumbent,
                               {"nodes": nodes_explored,
                                "gap": rel_gap(best_bound),
                                "incumbents": incumbent_history})
        frac = fractionality(rel.x)
        if frac.max(initial=0.0) <= int_tol:
            try_incumbent(rel.x, rel.objective)
            continue
        # Most-fractional branching, lowest index on ties.
        scores = np.where(binary, -np.abs(frac - 0.5), -np.inf)
        j = int(np.argmax(scores))
        for fix in (0.0, 1.0):
            lbc, ubc = lbn.copy(), ubn.copy()
            lbc[j] = fix
            ubc[j] = fix
            child = lp_solve(lbc, ubc)
            if child.status is Status.INFEASIBLE:
                continue
            if child.status is not Status.OPTIMAL:
                return SolveStatus(Status.NUMERICAL_FAILURE,
                                   stats={"nodes": nodes_explored})
            if incumbent is not None and child.objective >= incumbent_obj - 1e-12:
                continue
            heapq.heappush(heap, (child.objective, seq, lbc, ubc,
                                  depth + 1, child))
            seq += 1

    if incumbent is None:
        return SolveStatus(Status.INFEASIBLE, stats={"nodes": nodes_explored})
    return SolveStatus(Status.OPTIMAL, incumbent_obj, incumbent,
                       {"nodes": nodes_explored, "gap": 0.0,
                        "incumbents": incumbent_history})
