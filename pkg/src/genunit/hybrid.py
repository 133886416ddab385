"""Timed-automaton mode models and their mixed-logical-dynamical compilation.

The CHP and fire-tube boiler operating modes evolve as timed automata: an
integer dwell clock increments each high-level step, transitions fire when a
guard over (clock, boolean commands) holds, and every transition resets the
clock. Compilation produces a mixed-logical-dynamical (MLD) block

    x+ = A x + B1 u + B2 d + B3 z
    y  = C x + D1 u + D2 d + D3 z
    E4 d + E5 z <= E1 u + E2 x + E3

whose feasible trajectories coincide with the automaton runs composed with
the steady-state output maps. Clocks are saturating counters with a cap one
above the largest threshold (all guards are one-sided threshold tests, so
saturation never changes guard truth). Big-M constants come from variable
bounds, keeping LP relaxations tight. Each auxiliary variable also carries
its defining recipe, so a candidate trajectory can be encoded and checked
against every inequality directly (a feasibility certificate) without a
solver.
"""

from dataclasses import dataclass, field, replace

import numpy as np
import yaml

from .errors import ValidationError
from .plant import (ChpStaticMap, OperatingBounds, fit_static_gas,
                    nominal_bounds, nominal_chp_map, nominal_params,
                    static_gas_sweep)

CHP_MODES = ("OFF", "CS", "HS", "ON")
FTB_MODES = ("OFF", "CS", "HS", "SB", "ON0", "ON1")


class AmbiguousTransitionError(RuntimeError):
    """More than one guard enabled simultaneously from the current mode."""


@dataclass(frozen=True)
class Guard:
    """Enabled iff clock > min_clock, clock <= max_clock (when given) and
    every listed boolean input matches."""

    min_clock: int = -1
    max_clock: int = None
    inputs: dict = field(default_factory=dict)

    def enabled(self, clock, u):
        if clock <= self.min_clock:
            return False
        if self.max_clock is not None and clock > self.max_clock:
            return False
        return all(u.get(k, 0) == v for k, v in self.inputs.items())


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    guard: Guard


@dataclass(frozen=True)
class TimedAutomaton:
    name: str
    modes: tuple
    inputs: tuple
    edges: tuple
    clock_cap: int

    def __post_init__(self):
        for e in self.edges:
            if e.source not in self.modes or e.target not in self.modes:
                raise ValidationError(f"edge {e.source}->{e.target} uses "
                                      "undeclared mode")
            for k in e.guard.inputs:
                if k not in self.inputs:
                    raise ValidationError(f"guard input {k!r} undeclared")
        thresholds = [e.guard.min_clock for e in self.edges]
        thresholds += [e.guard.max_clock for e in self.edges
                       if e.guard.max_clock is not None]
        if self.clock_cap < 0:
            raise ValidationError("clock cap must be nonnegative")
        if thresholds and self.clock_cap < max(thresholds) + 1:
            raise ValidationError("clock cap must exceed every threshold")

    def out_edges(self, mode):
        return [e for e in self.edges if e.source == mode]


@dataclass(frozen=True)
class DwellTimes:
    """Mode transition times, in high-level steps."""

    off_to_hs: int   # minimum OFF time before a hot start is possible
    off_to_cs: int   # OFF time beyond which a start is a cold start
    cs_to_on: int
    hs_to_on: int
    on_to_off: int
    sb: int = 0      # stand-by dwell (boiler only; null)


# Mode transition times of the two units (high-level steps of 15 min).
CHP_DWELL = DwellTimes(off_to_hs=1, off_to_cs=3, cs_to_on=2, hs_to_on=1,
                       on_to_off=3)
FTB_DWELL = DwellTimes(off_to_hs=1, off_to_cs=5, cs_to_on=4, hs_to_on=1,
                       on_to_off=3, sb=0)


def chp_automaton(dwell=CHP_DWELL):
    g = dwell
    edges = (
        Edge("OFF", "HS", Guard(g.off_to_hs, g.off_to_cs, {"u_S": 1})),
        Edge("OFF", "CS", Guard(g.off_to_cs, None, {"u_S": 1})),
        Edge("CS", "ON", Guard(g.cs_to_on)),
        Edge("HS", "ON", Guard(g.hs_to_on)),
        Edge("ON", "OFF", Guard(g.on_to_off, None, {"u_S": 1})),
    )
    cap = max(g.off_to_cs, g.cs_to_on, g.hs_to_on, g.on_to_off) + 1
    return TimedAutomaton("CHP", CHP_MODES, ("u_S",), edges, cap)


def ftb_automaton(dwell=FTB_DWELL):
    """Boiler automaton: two production modes (exhaust valve closed/open)
    plus stand-by. Startup lands valve-closed; the valve and stand-by
    toggles are dwell-free level commands, made mutually exclusive with the
    shutdown command by construction."""
    g = dwell
    sb_min = g.sb - 1  # null dwell => always clock-enabled
    edges = (
        Edge("OFF", "HS", Guard(g.off_to_hs, g.off_to_cs, {"u_S": 1})),
        Edge("OFF", "CS", Guard(g.off_to_cs, None, {"u_S": 1})),
        Edge("CS", "ON0", Guard(g.cs_to_on)),
        Edge("HS", "ON0", Guard(g.hs_to_on)),
        Edge("ON0", "OFF", Guard(g.on_to_off, None, {"u_S": 1})),
        Edge("ON0", "ON1", Guard(-1, None, {"u_ex": 1, "u_SB": 0, "u_S": 0})),
        Edge("ON1", "ON0", Guard(-1, None, {"u_ex": 0})),
        Edge("ON0", "SB", Guard(sb_min, None, {"u_SB": 1, "u_S": 0})),
        Edge("SB", "ON0", Guard(sb_min, None, {"u_SB": 0})),
    )
    cap = max(g.off_to_cs, g.cs_to_on, g.hs_to_on, g.on_to_off, g.sb) + 1
    return TimedAutomaton("FTB", FTB_MODES, ("u_S", "u_SB", "u_ex"),
                          edges, cap)


def step_automaton(auto, mode, clock, u):
    """One high-level step: apply the unique enabled transition or dwell.

    Raises AmbiguousTransitionError when guards overlap (defensive; the
    bundled automata have mutually exclusive guards by construction).
    """
    if mode not in auto.modes:
        raise ValidationError(f"unknown mode {mode!r}")
    if clock < 0:
        raise ValidationError("clock must be nonnegative")
    enabled = [e for e in auto.out_edges(mode) if e.guard.enabled(clock, u)]
    if len(enabled) > 1:
        names = ", ".join(f"{e.source}->{e.target}" for e in enabled)
        raise AmbiguousTransitionError(
            f"{auto.name}: simultaneous guards enabled: {names}")
    if enabled:
        return enabled[0].target, 0
    return mode, min(clock + 1, auto.clock_cap)


def run_automaton(auto, mode, clock, input_seq):
    """Trajectory of (mode, clock) pairs including the initial condition."""
    traj = [(mode, clock)]
    for u in input_seq:
        mode, clock = step_automaton(auto, mode, clock, u)
        traj.append((mode, clock))
    return traj


@dataclass(frozen=True)
class BoilerHlMap:
    """High-level boiler output constants and the identified affine gas map.

    gamma1..3 come from the affine fit of the nonlinear model's steady
    states; the start-mode gas flows are given values; the stand-by pair is
    the limit-cycle average of the three-mode controller on the nominal
    parameter set.
    """

    gamma1: float
    gamma2: float
    gamma3: float
    q_g_cs: float = 0.0055  # kg/s, cold-start average firing
    q_g_hs: float = 0.0039  # kg/s, hot-start average firing
    q_g_sb: float = 0.001375  # kg/s, stand-by limit-cycle mean
    q_s_sb: float = 0.020   # kg/s, stand-by steam bleed


def nominal_boiler_hl_map(params=None, bounds=None):
    sweep = static_gas_sweep(params or nominal_params(), bounds)
    g1, g2, g3 = fit_static_gas(sweep)
    return BoilerHlMap(gamma1=g1, gamma2=g2, gamma3=g3)


def mode_outputs(unit, mode, hl_map, P_e=0.0, q_s=0.0, H_ex=0.0, u_ex=0):
    """Per-mode steady-state output pair of one unit.

    CHP -> (q_g, H_ex); FTB -> (q_g, q_s). Stand-by returns the limit-cycle
    averages; OFF returns zeros; start modes burn their constant gas.
    """
    name = getattr(mode, "name", mode)
    if unit == "CHP":
        from .plant import chp_static
        return chp_static(name, P_e, hl_map)
    if unit != "FTB":
        raise ValidationError(f"unknown unit {unit!r}")
    if name == "OFF":
        return 0.0, 0.0
    if name == "CS":
        return hl_map.q_g_cs, 0.0
    if name == "HS":
        return hl_map.q_g_hs, 0.0
    if name == "SB":
        return hl_map.q_g_sb, hl_map.q_s_sb
    if name in ("ON0", "ON1"):
        q_g = (hl_map.gamma1 * q_s + hl_map.gamma2 * u_ex * H_ex
               + hl_map.gamma3)
        return q_g, q_s
    raise ValidationError(f"unknown FTB mode {mode!r}")


# ---------------------------------------------------------------------------
# MLD compilation
# ---------------------------------------------------------------------------

@dataclass
class MldSystem:
    """Compiled MLD block with named variables and auxiliary recipes.

    Matrix semantics: x+ = A x + B1 u + B2 d + B3 z; y = C x + D1 u + D2 d
    + D3 z; E4 d + E5 z <= E1 u + E2 x + E3. ``x_binary``/``u_binary`` mark
    the boolean partitions; every d is binary, every z continuous. The
    ``aux_defs`` list holds (name, kind, recipe) triples that evaluate each
    auxiliary from (x, u, previously defined aux); it powers trajectory
    encoding and certificate checks.
    """

    name: str
    x_names: list
    x_binary: np.ndarray
    u_names: list
    u_binary: np.ndarray
    d_names: list
    z_names: list
    y_names: list
    A: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    B3: np.ndarray
    C: np.ndarray
    D1: np.ndarray
    D2: np.ndarray
    D3: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    E4: np.ndarray
    E5: np.ndarray
    aux_defs: list
    meta: dict = field(default_factory=dict)

    @property
    def n_x(self):
        return len(self.x_names)

    @property
    def n_u(self):
        return len(self.u_names)

    @property
    def n_d(self):
        return len(self.d_names)

    @property
    def n_z(self):
        return len(self.z_names)

    def x_index(self, name):
        return self.x_names.index(name)

    def u_index(self, name):
        return self.u_names.index(name)

    def evaluate_aux(self, x, u):
        """Evaluate all auxiliaries at (x, u) from their recipes."""
        xd = dict(zip(self.x_names, x))
        ud = dict(zip(self.u_names, u))
        aux = {}
        for name, _kind, recipe in self.aux_defs:
            aux[name] = recipe(xd, ud, aux)
        d = np.array([aux[n] for n in self.d_names])
        z = np.array([aux[n] for n in self.z_names])
        return d, z

    def step(self, x, u):
        """Semantic one-step evolution (recipes, not optimization)."""
        d, z = self.evaluate_aux(x, u)
        x_next = self.A @ x + self.B1 @ u + self.B2 @ d + self.B3 @ z
        y = self.C @ x + self.D1 @ u + self.D2 @ d + self.D3 @ z
        return x_next, y, d, z

    def inequality_violation(self, x, u, d, z):
        """Max violation of E4 d + E5 z <= E1 u + E2 x + E3 at the point."""
        lhs = self.E4 @ d + self.E5 @ z
        rhs = self.E1 @ u + self.E2 @ x + self.E3
        return float(np.max(lhs - rhs, initial=0.0))


class _Builder:
    def __init__(self, name):
        self.name = name
        self.x = []
        self.x_bin = []
        self.u = []
        self.u_bin = []
        self.d = []
        self.z = []
        self.y = []
        self.state_rows = {}
        self.out_rows = {}
        self.ineq = []
        self.aux_defs = []

    def add_x(self, name, binary):
        self.x.append(name)
        self.x_bin.append(binary)

    def add_u(self, name, binary):
        self.u.append(name)
        self.u_bin.append(binary)

    def add_d(self, name, recipe):
        self.d.append(name)
        self.aux_defs.append((name, "d", recipe))

    def add_z(self, name, recipe):
        self.z.append(name)
        self.aux_defs.append((name, "z", recipe))

    def add_y(self, name):
        self.y.append(name)
        self.out_rows[name] = {"x": {}, "u": {}, "d": {}, "z": {}}

    def set_state_row(self, name, x=None, u=None, d=None, z=None):
        self.state_rows[name] = {"x": dict(x or {}), "u": dict(u or {}),
                                 "d": dict(d or {}), "z": dict(z or {})}

    def add_ineq(self, d=None, z=None, u=None, x=None, const=0.0):
        """Sum(d) + Sum(z) <= Sum(u) + Sum(x) + const."""
        self.ineq.append({"d": dict(d or {}), "z": dict(z or {}),
                          "u": dict(u or {}), "x": dict(x or {}),
                          "const": float(const)})

    def and_gate(self, name, literals, recipe):
        """d_name = AND(literals); literal = (group, var, positive)."""
        self.add_d(name, recipe)
        total_const = 0.0
        pos = {"d": {}, "u": {}, "x": {}}
        for group, var, positive in literals:
            if positive:
                # name <= literal
                if group == "d":
                    self.add_ineq(d={name: 1.0, var: -1.0})
                else:
                    self.add_ineq(d={name: 1.0}, **{group: {var: 1.0}})
                pos[group][var] = pos[group].get(var, 0.0) + 1.0
            else:
                # name <= 1 - literal
                if group == "d":
                    self.add_ineq(d={name: 1.0, var: 1.0}, const=1.0)
                else:
                    self.add_ineq(d={name: 1.0}, **{group: {var: -1.0}},
                                  const=1.0)
                pos[group][var] = pos[group].get(var, 0.0) - 1.0
                total_const += 1.0
        # name >= sum(literals) - (n-1):
        # -name + sum_pos - sum_neg <= n - 1 - (#neg)  =>
        n = len(literals)
        d_terms = {name: -1.0}
        for var, cf in pos["d"].items():
            d_terms[var] = d_terms.get(var, 0.0) + cf
        self.add_ineq(d=d_terms,
                      u={k: -v for k, v in pos["u"].items()},
                      x={k: -v for k, v in pos["x"].items()},
                      const=(n - 1.0) - total_const)

    def build(self, meta=None):
        nx, nu, nd, nz, ny = (len(self.x), len(self.u), len(self.d),
                              len(self.z), len(self.y))
        xi = {n: i for i, n in enumerate(self.x)}
        ui = {n: i for i, n in enumerate(self.u)}
        di = {n: i for i, n in enumerate(self.d)}
        zi = {n: i for i, n in enumerate(self.z)}
        A = np.zeros((nx, nx))
        B1 = np.zeros((nx, nu))
        B2 = np.zeros((nx, nd))
        B3 = np.zeros((nx, nz))
        for name, row in self.state_rows.items():
            i = xi[name]
            for v, cf in row["x"].items():
                A[i, xi[v]] = cf
            for v, cf in row["u"].items():
                B1[i, ui[v]] = cf
            for v, cf in row["d"].items():
                B2[i, di[v]] = cf
            for v, cf in row["z"].items():
                B3[i, zi[v]] = cf
        C = np.zeros((ny, nx))
        D1 = np.zeros((ny, nu))
        D2 = np.zeros((ny, nd))
        D3 = np.zeros((ny, nz))
        for k, name in enumerate(self.y):
            row = self.out_rows[name]
            for v, cf in row["x"].items():
                C[k, xi[v]] = cf
            for v, cf in row["u"].items():
                D1[k, ui[v]] = cf
            for v, cf in row["d"].items():
                D2[k, di[v]] = cf
            for v, cf in row["z"].items():
                D3[k, zi[v]] = cf
        nr = len(self.ineq)
        E1 = np.zeros((nr, nu))
        E2 = np.zeros((nr, nx))
        E3 = np.zeros(nr)
        E4 = np.zeros((nr, nd))
        E5 = np.zeros((nr, nz))
        for r, row in enumerate(self.ineq):
            for v, cf in row["d"].items():
                E4[r, di[v]] = cf
            for v, cf in row["z"].items():
                E5[r, zi[v]] = cf
            for v, cf in row["u"].items():
                E1[r, ui[v]] = cf
            for v, cf in row["x"].items():
                E2[r, xi[v]] = cf
            E3[r] = row["const"]
        return MldSystem(
            name=self.name, x_names=self.x,
            x_binary=np.array(self.x_bin, dtype=bool),
            u_names=self.u, u_binary=np.array(self.u_bin, dtype=bool),
            d_names=self.d, z_names=self.z, y_names=self.y,
            A=A, B1=B1, B2=B2, B3=B3, C=C, D1=D1, D2=D2, D3=D3,
            E1=E1, E2=E2, E3=E3, E4=E4, E5=E5,
            aux_defs=self.aux_defs, meta=meta or {})


def _emit_automaton(b, auto, prefix):
    """Emit one automaton's state variables, guards and clock updates."""
    cap = auto.clock_cap
    clk = f"{prefix}.clock"
    b.add_x(clk, binary=False)
    for m in auto.modes:
        b.add_x(f"{prefix}.{m}", binary=True)
    for name in auto.inputs:
        b.add_u(f"{prefix}.{name}", binary=True)

    # Threshold indicators d = [clock > t], valid for integral clocks in
    # [0, cap]: (t+1) d <= clock  and  clock <= t + (cap - t) d.
    thresholds = sorted({e.guard.min_clock for e in auto.edges
                         if e.guard.min_clock >= 0}
                        | {e.guard.max_clock for e in auto.edges
                           if e.guard.max_clock is not None}
                        | {cap - 1})
    thr_name = {}
    for t in thresholds:
        name = f"{prefix}.gt{t}"
        thr_name[t] = name

        def recipe(xd, ud, aux, _t=t, _clk=clk):
            return 1.0 if xd[_clk] > _t + 0.5 else 0.0

        b.add_d(name, recipe)
        b.add_ineq(d={name: t + 1.0}, x={clk: 1.0})
        b.add_ineq(d={name: -(cap - t)}, x={clk: -1.0}, const=float(t))

    # Edge indicators: AND of source mode, clock window and input literals.
    edge_names = []
    for e in auto.edges:
        name = f"{prefix}.{e.source}->{e.target}"
        edge_names.append(name)
        lits = [("x", f"{prefix}.{e.source}", True)]
        if e.guard.min_clock >= 0:
            lits.append(("d", thr_name[e.guard.min_clock], True))
        if e.guard.max_clock is not None:
            lits.append(("d", thr_name[e.guard.max_clock], False))
        for k, v in e.guard.inputs.items():
            lits.append(("u", f"{prefix}.{k}", bool(v)))

        def recipe(xd, ud, aux, _e=e, _prefix=prefix):
            active = xd[f"{_prefix}.{_e.source}"] > 0.5
            u = {k: int(round(ud[f"{_prefix}.{k}"])) for k in _e.guard.inputs}
            return 1.0 if active and _e.guard.enabled(
                round(xd[f"{_prefix}.clock"]), u) else 0.0

        b.and_gate(name, lits, recipe)

    # Mode one-hot conservation (redundant but tightens the relaxation):
    # 0 <= sum(chi) - 1 and 0 <= 1 - sum(chi).
    b.add_ineq(x={f"{prefix}.{m}": 1.0 for m in auto.modes}, const=-1.0)
    b.add_ineq(x={f"{prefix}.{m}": -1.0 for m in auto.modes}, const=1.0)
    # Clock box: 0 <= clock <= cap.
    b.add_ineq(x={clk: 1.0}, const=0.0)
    b.add_ineq(x={clk: -1.0}, const=float(cap))

    # Mode dynamics: chi+ = chi - sum(out) + sum(in).
    for m in auto.modes:
        drow = {}
        for e, name in zip(auto.edges, edge_names):
            if e.source == m:
                drow[name] = drow.get(name, 0.0) - 1.0
            if e.target == m:
                drow[name] = drow.get(name, 0.0) + 1.0
        b.set_state_row(f"{prefix}.{m}", x={f"{prefix}.{m}": 1.0}, d=drow)

    # Clock dynamics with saturation and reset:
    # clock+ = clock + 1 - [clock>=cap] - z_reset,
    # z_reset = switch * (clock + 1 - [clock>=cap]).
    atcap = thr_name[cap - 1]
    zr = f"{prefix}.z_reset"
    M = float(cap + 1)

    def zr_recipe(xd, ud, aux, _edge_names=tuple(edge_names), _clk=clk,
                  _atcap=atcap):
        sw = sum(aux[n] for n in _edge_names)
        return sw * (xd[_clk] + 1.0 - aux[_atcap])

    b.add_z(zr, zr_recipe)
    sw = {n: 1.0 for n in edge_names}
    # z <= M * switch
    b.add_ineq(d={n: -M for n in edge_names}, z={zr: 1.0})
    # z >= 0
    b.add_ineq(z={zr: -1.0})
    # z <= clock + 1 - atcap
    b.add_ineq(d={atcap: 1.0}, z={zr: 1.0}, x={clk: 1.0}, const=1.0)
    # z >= clock + 1 - atcap - M(1 - switch)
    b.add_ineq(d={**{n: M for n in edge_names}, atcap: -1.0}, z={zr: -1.0},
               x={clk: -1.0}, const=M - 1.0)
    b.set_state_row(clk, x={clk: 1.0}, d={atcap: -1.0}, z={zr: -1.0})
    # the +1 affine offset: pinned-one binary shared across the system
    return edge_names


def _ensure_one(b):
    """Binary auxiliary pinned at 1 (affine offsets in the state update)."""
    if "one" not in b.d:
        b.add_d("one", lambda xd, ud, aux: 1.0)
        b.add_ineq(d={"one": -1.0}, const=-1.0)  # -one <= -1  => one >= 1
        b.add_ineq(d={"one": 1.0}, const=1.0)    # one <= 1
    return "one"


def compile_automaton_mld(auto, prefix=None):
    """MLD block of a single timed automaton (no output maps)."""
    prefix = prefix or auto.name
    b = _Builder(f"mld:{prefix}")
    one = _ensure_one(b)
    _emit_automaton(b, auto, prefix)
    row = b.state_rows[f"{prefix}.clock"]
    row["d"][one] = row["d"].get(one, 0.0) + 1.0
    mld = b.build(meta={"automata": {prefix: auto}})
    return mld


def compile_mld(chp=None, ftb=None, chp_map=None, ftb_map=None, bounds=None,
                clock_cap=None):
    """Compile the combined CHP+FTB MLD system with output maps.

    Inputs (in order): the boolean switching commands of both automata, the
    CHP electric power, the boiler steam flow, the exhaust valve command and
    the purchased power. Outputs: total electric supply, CHP gas flow,
    boiler gas flow, delivered steam. The valve implication (open only while
    the engine produces) is the inequality u_ex <= [CHP ON].
    """
    chp = chp or chp_automaton()
    ftb = ftb or ftb_automaton()
    chp_map = chp_map or nominal_chp_map()
    ftb_map = ftb_map or nominal_boiler_hl_map()
    bounds = bounds or nominal_bounds()
    if clock_cap is not None:
        if clock_cap < max(chp.clock_cap, ftb.clock_cap):
            raise ValidationError("clock cap below automaton requirement")
        chp = replace(chp, clock_cap=clock_cap)
        ftb = replace(ftb, clock_cap=clock_cap)

    b = _Builder("mld:GU")
    one = _ensure_one(b)
    _emit_automaton(b, chp, "CHP")
    _emit_automaton(b, ftb, "FTB")
    for prefix in ("CHP", "FTB"):
        row = b.state_rows[f"{prefix}.clock"]
        row["d"][one] = row["d"].get(one, 0.0) + 1.0

    # Continuous inputs.
    b.add_u("P_e", binary=False)
    b.add_u("q_s", binary=False)
    b.add_u("P_purch", binary=False)

    # Valve implication and production-mode consistency.
    b.add_ineq(u={"FTB.u_ex": -1.0}, x={"CHP.ON": 1.0})
    b.add_ineq(x={"FTB.ON1": -1.0, "CHP.ON": 1.0})

    # Power window: P_min*[ON] <= P_e <= P_max*[ON].
    b.add_ineq(u={"P_e": 1.0}, x={"CHP.ON": -chp_map.P_e_min})
    b.add_ineq(u={"P_e": -1.0}, x={"CHP.ON": chp_map.P_e_max})
    # Steam window in the production modes, zero elsewhere.
    on_modes = {"FTB.ON0": 1.0, "FTB.ON1": 1.0}
    b.add_ineq(u={"q_s": 1.0},
               x={k: -bounds.q_s_min for k in on_modes})
    b.add_ineq(u={"q_s": -1.0},
               x={k: bounds.q_s_max for k in on_modes})
    # Purchased power nonnegative.
    b.add_ineq(u={"P_purch": 1.0})

    # z_exh = [FTB.ON1] * P_e (exhaust enthalpy recovered in the boiler is
    # gamma_h * z_exh; keyed to the current mode indicator).
    Pmax = chp_map.P_e_max

    def z_exh_recipe(xd, ud, aux):
        return ud["P_e"] if xd["FTB.ON1"] > 0.5 else 0.0

    b.add_z("z_exh", z_exh_recipe)
    b.add_ineq(z={"z_exh": 1.0}, x={"FTB.ON1": Pmax})
    b.add_ineq(z={"z_exh": -1.0})
    b.add_ineq(z={"z_exh": 1.0}, u={"P_e": 1.0})
    b.add_ineq(z={"z_exh": -1.0}, u={"P_e": -1.0},
               x={"FTB.ON1": -Pmax}, const=Pmax)

    # Burner floor in the production modes: q_g_B >= q_g_min*[ON], i.e. the
    # recovered exhaust cannot displace gas below the minimum firing rate
    # (this is what bounds the usable exhaust at low steam demand).
    b.add_ineq(z={"z_exh": -ftb_map.gamma2 * chp_map.gamma_h},
               u={"q_s": ftb_map.gamma1},
               x={"FTB.ON0": ftb_map.gamma3 - bounds.q_g_min,
                  "FTB.ON1": ftb_map.gamma3 - bounds.q_g_min})

    # Outputs.
    b.add_y("P_e_tot")
    b.out_rows["P_e_tot"]["u"] = {"P_e": 1.0, "P_purch": 1.0}
    b.add_y("q_g_CHP")
    b.out_rows["q_g_CHP"]["u"] = {"P_e": 1.0 / chp_map.gamma_q}
    b.out_rows["q_g_CHP"]["x"] = {
        "CHP.ON": -chp_map.P_int / chp_map.gamma_q,
        "CHP.CS": chp_map.q_g_cs,
        "CHP.HS": chp_map.q_g_hs,
    }
    b.add_y("q_g_B")
    b.out_rows["q_g_B"]["u"] = {"q_s": ftb_map.gamma1}
    b.out_rows["q_g_B"]["z"] = {"z_exh": ftb_map.gamma2 * chp_map.gamma_h}
    b.out_rows["q_g_B"]["x"] = {
        "FTB.ON0": ftb_map.gamma3,
        "FTB.ON1": ftb_map.gamma3,
        "FTB.CS": ftb_map.q_g_cs,
        "FTB.HS": ftb_map.q_g_hs,
        "FTB.SB": ftb_map.q_g_sb,
    }
    b.add_y("q_s_out")
    b.out_rows["q_s_out"]["u"] = {"q_s": 1.0}
    b.out_rows["q_s_out"]["x"] = {"FTB.SB": ftb_map.q_s_sb}

    return b.build(meta={
        "automata": {"CHP": chp, "FTB": ftb},
        "chp_map": chp_map, "ftb_map": ftb_map, "bounds": bounds,
    })


def initial_state(mld, modes, clocks):
    """State vector for given per-unit (mode, clock) initial conditions."""
    x = np.zeros(mld.n_x)
    for prefix, mode in modes.items():
        auto = mld.meta["automata"][prefix]
        if mode not in auto.modes:
            raise ValidationError(f"unknown mode {mode!r} for {prefix}")
        x[mld.x_index(f"{prefix}.clock")] = clocks[prefix]
        x[mld.x_index(f"{prefix}.{mode}")] = 1.0
    return x


def decode_modes(mld, x):
    """(mode, clock) per unit from a state vector."""
    out = {}
    for prefix, auto in mld.meta["automata"].items():
        hits = [m for m in auto.modes
                if x[mld.x_index(f"{prefix}.{m}")] > 0.5]
        if len(hits) != 1:
            raise ValidationError(f"state not one-hot for {prefix}")
        out[prefix] = (hits[0], int(round(x[mld.x_index(f"{prefix}.clock")])))
    return out


def check_trajectory(mld, x0, u_seq, tol=1e-9):
    """Certificate check: encode the run via recipes and verify every MLD
    inequality. Returns (ok, worst_violation, states)."""
    x = np.asarray(x0, dtype=float)
    worst = 0.0
    states = [x]
    for u in u_seq:
        d, z = mld.evaluate_aux(x, u)
        worst = max(worst, mld.inequality_violation(x, u, d, z))
        x = mld.A @ x + mld.B1 @ u + mld.B2 @ d + mld.B3 @ z
        states.append(x)
    return worst <= tol, worst, states


def export_mld_csv(mld, directory):
    """Write each MLD matrix as CSV for external inspection."""
    import os

    os.makedirs(directory, exist_ok=True)
    names = {"A": mld.A, "B1": mld.B1, "B2": mld.B2, "B3": mld.B3,
             "C": mld.C, "D1": mld.D1, "D2": mld.D2, "D3": mld.D3,
             "E1": mld.E1, "E2": mld.E2, "E3": mld.E3.reshape(-1, 1),
             "E4": mld.E4, "E5": mld.E5}
    for name, M in names.items():
        np.savetxt(os.path.join(directory, f"{name}.csv"), M, delimiter=",")
    with open(os.path.join(directory, "variables.csv"), "w") as f:
        f.write("group,name,binary\n")
        for n, is_b in zip(mld.x_names, mld.x_binary):
            f.write(f"x,{n},{int(is_b)}\n")
        for n, is_b in zip(mld.u_names, mld.u_binary):
            f.write(f"u,{n},{int(is_b)}\n")
        for n in mld.d_names:
            f.write(f"d,{n},1\n")
        for n in mld.z_names:
            f.write(f"z,{n},0\n")
        for n in mld.y_names:
            f.write(f"y,{n},0\n")


def automaton_to_dict(auto):
    return {
        "name": auto.name,
        "modes": list(auto.modes),
        "inputs": list(auto.inputs),
        "clock_cap": auto.clock_cap,
        "edges": [{"from": e.source, "to": e.target,
                   "min_clock": e.guard.min_clock,
                   "max_clock": e.guard.max_clock,
                   "inputs": dict(e.guard.inputs)} for e in auto.edges],
    }


def automaton_from_dict(data):
    edges = tuple(
        Edge(e["from"], e["to"],
             Guard(e.get("min_clock", -1), e.get("max_clock"),
                   dict(e.get("inputs", {}))))
        for e in data["edges"])
    return TimedAutomaton(data["name"], tuple(data["modes"]),
                          tuple(data["inputs"]), edges,
                          int(data["clock_cap"]))


def load_automaton(path):
    """Load a timed automaton from a YAML description file."""
    with open(path) as f:
        return automaton_from_dict(yaml.safe_load(f))


def save_automaton(auto, path):
    with open(path, "w") as f:
        yaml.safe_dump(automaton_to_dict(auto), f, sort_keys=False)
