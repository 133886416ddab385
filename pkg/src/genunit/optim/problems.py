"""Canonical optimization-problem containers and the solver status contract.

All solvers in this package consume these containers and return a
:class:`SolveStatus`. Conventions: minimize; inequalities are ``A_in x <=
b_in``; bounds are elementwise with ``+-inf`` allowed; the MILP integrality
mask marks binary variables (bounds within [0, 1]).
"""

import enum
import io
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError


@dataclass(frozen=True)
class SolverConfig:
    """Centralized numerical tolerances and budgets."""

    feas_tol: float = 1e-6        # scaled primal feasibility
    kkt_tol: float = 1e-6         # scaled stationarity
    int_tol: float = 1e-6         # integrality tolerance
    mip_gap: float = 1e-6         # relative MILP gap
    simplex_max_iter: int = 20000
    admm_max_iter: int = 20000
    admm_rho: float = 0.1
    admm_sigma: float = 1e-6
    admm_check_every: int = 25
    node_budget: int = 20000
    depth_cap: int = 512


DEFAULT_CONFIG = SolverConfig()


class Status(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"
    NUMERICAL_FAILURE = "NumericalFailure"


def _as_matrix(M, n, name):
    if M is None:
        return np.zeros((0, n))
    if sp.issparse(M):
        M = M.tocsr()
    else:
        M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape[1] != n:
        raise ValidationError(f"{name} has {M.shape[1]} columns, expected {n}")
    return M


def _as_vector(v, m, name):
    if v is None:
        return np.zeros(m)
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if v.shape != (m,):
        raise ValidationError(f"{name} has shape {v.shape}, expected ({m},)")
    return v


@dataclass
class LpProblem:
    """min c'x  s.t.  A_eq x = b_eq,  A_in x <= b_in,  lb <= x <= ub."""

    c: np.ndarray
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None
    A_in: np.ndarray = None
    b_in: np.ndarray = None
    lb: np.ndarray = None
    ub: np.ndarray = None

    def __post_init__(self):
        self.c = np.atleast_1d(np.asarray(self.c, dtype=float))
        n = self.n
        self.A_eq = _as_matrix(self.A_eq, n, "A_eq")
        self.b_eq = _as_vector(self.b_eq, self.A_eq.shape[0], "b_eq")
        self.A_in = _as_matrix(self.A_in, n, "A_in")
        self.b_in = _as_vector(self.b_in, self.A_in.shape[0], "b_in")
        self.lb = (np.full(n, -np.inf) if self.lb is None
                   else _as_vector(self.lb, n, "lb"))
        self.ub = (np.full(n, np.inf) if self.ub is None
                   else _as_vector(self.ub, n, "ub"))
        if np.any(self.lb > self.ub + 1e-12):
            raise ValidationError("lower bound exceeds upper bound")

    @property
    def n(self):
        return self.c.shape[0]


@dataclass
class QpProblem(LpProblem):
    """min 0.5 x'Hx + c'x with the same constraint blocks as LpProblem."""

    H: np.ndarray = None

    def __post_init__(self):
        super().__post_init__()
        if self.H is None:
            raise ValidationError("QpProblem requires H")
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        if self.H.shape != (self.n, self.n):
            raise ValidationError("H must be square of size n")
        if not np.allclose(self.H, self.H.T, atol=1e-8 * (1 + np.abs(self.H).max())):
            raise ValidationError("H must be symmetric")
        self.H = 0.5 * (self.H + self.H.T)
        self.check_psd()

    def check_psd(self):
        scale = max(1.0, np.abs(self.H).max())
        try:
            np.linalg.cholesky(self.H + 1e-9 * scale * np.eye(self.n))
        except np.linalg.LinAlgError:
            raise ValidationError("H is not positive semidefinite") from None


@dataclass
class MilpProblem:
    """An LpProblem plus a binary-integrality mask."""

    lp: LpProblem
    binary: np.ndarray = None

    def __post_init__(self):
        n = self.lp.n
        if self.binary is None:
            self.binary = np.zeros(n, dtype=bool)
        self.binary = np.asarray(self.binary, dtype=bool)
        if self.binary.shape != (n,):
            raise ValidationError("binary mask length mismatch")
        if np.any(self.lp.lb[self.binary] < -1e-9) or np.any(
                self.lp.ub[self.binary] > 1.0 + 1e-9):
            raise ValidationError("binary variables must have bounds within [0, 1]")


@dataclass
class SolveStatus:
    """Solver outcome: status, objective, primal point, statistics.

    For Optimal results the solver guarantees scaled primal feasibility and
    (LP/QP) KKT stationarity residuals at or below the configured 1e-6.
    """

    status: Status
    objective: float = np.nan
    x: np.ndarray = None
    stats: dict = field(default_factory=dict)

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL


def feasibility_residual(p, x):
    """Scaled max violation of all constraint blocks at x."""
    r = 0.0
    if p.A_eq.shape[0]:
        r = max(r, np.abs(p.A_eq @ x - p.b_eq).max()
                / (1.0 + np.abs(p.b_eq).max()))
    if p.A_in.shape[0]:
        r = max(r, max(0.0, (p.A_in @ x - p.b_in).max())
                / (1.0 + np.abs(p.b_in).max() if p.b_in.size else 1.0))
    finite_l = np.isfinite(p.lb)
    finite_u = np.isfinite(p.ub)
    if finite_l.any():
        r = max(r, max(0.0, (p.lb[finite_l] - x[finite_l]).max())
                / (1.0 + np.abs(p.lb[finite_l]).max()))
    if finite_u.any():
        r = max(r, max(0.0, (x[finite_u] - p.ub[finite_u]).max())
                / (1.0 + np.abs(p.ub[finite_u]).max()))
    return r


def _write_triplets(f, name, M):
    coo = sp.coo_matrix(M)
    f.write(f"{name} {coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
    for i, j, v in zip(coo.row, coo.col, coo.data):
        f.write(f"{i} {j} {float(v)!r}\n")


def _write_vector(f, name, v):
    f.write(f"{name} {len(v)}\n")
    f.write(" ".join(repr(float(x)) for x in v) + "\n")


def dump_problem(p, path_or_file, binary=None):
    """Write a problem in the documented sparse-triplet text format.

    Layout: one header line per block. Matrix blocks are ``name rows cols
    nnz`` followed by ``i j value`` lines; vector blocks are ``name len``
    followed by one line of values. Blocks: c, H (QP only), A_eq, b_eq,
    A_in, b_in, lb, ub, binary (MILP only, indices of binary variables).
    """
    own = isinstance(path_or_file, (str,)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file, "w") if own else path_or_file
    try:
        f.write("genunit-problem v1\n")
        _write_vector(f, "c", p.c)
        if isinstance(p, QpProblem):
            _write_triplets(f, "H", p.H)
        _write_triplets(f, "A_eq", p.A_eq)
        _write_vector(f, "b_eq", p.b_eq)
        _write_triplets(f, "A_in", p.A_in)
        _write_vector(f, "b_in", p.b_in)
        _write_vector(f, "lb", p.lb)
        _write_vector(f, "ub", p.ub)
        if binary is not None:
            idx = np.flatnonzero(binary)
            f.write(f"binary {len(idx)}\n")
            f.write(" ".join(str(i) for i in idx) + "\n")
    finally:
        if own:
            f.close()


def load_problem(path_or_file):
    """Inverse of :func:`dump_problem`; returns LpProblem/QpProblem/MilpProblem."""
    own = isinstance(path_or_file, (str,)) or hasattr(path_or_file, "__fspath__")
    f = open(path_or_file) if own else path_or_file
    try:
        header = f.readline().strip()
        if header != "genunit-problem v1":
            raise ValidationError(f"unrecognized problem file header {header!r}")
        blocks = {}
        for line in f:
            parts = line.split()
            name = parts[0]
            if len(parts) == 4:  # matrix
                rows, cols, nnz = map(int, parts[1:])
                M = np.zeros((rows, cols))
                for _ in range(nnz):
                    i, j, v = f.readline().split()
                    M[int(i), int(j)] = float(v)
                blocks[name] = M
            else:
                length = int(parts[1])
                data = f.readline().split()
                if name == "binary":
                    blocks[name] = np.array([int(v) for v in data], dtype=int)
                else:
                    blocks[name] = np.array([float(v) for v in data])
                if len(blocks[name]) != length:
                    raise ValidationError(f"block {name} length mismatch")
    finally:
        if own:
            f.close()
    kw = dict(c=blocks["c"], A_eq=blocks["A_eq"], b_eq=blocks["b_eq"],
              A_in=blocks["A_in"], b_in=blocks["b_in"],
              lb=blocks["lb"], ub=blocks["ub"])
    if "H" in blocks:
        prob = QpProblem(H=blocks["H"], **kw)
    else:
        prob = LpProblem(**kw)
    if "binary" in blocks:
        mask = np.zeros(prob.n, dtype=bool)
        mask[blocks["binary"]] = True
        return MilpProblem(lp=prob, binary=mask)
    return prob


def dumps_problem(p, binary=None):
    buf = io.StringIO()
    dump_problem(p, buf, binary=binary)
    return buf.getvalue()
