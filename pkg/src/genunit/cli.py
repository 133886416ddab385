"""Command-line entry point.

Subcommands: identify (fit parameters to a dataset CSV), schedule (solve
the unit commitment from a demand/price CSV), simulate (closed-loop run
from a scenario file), startup (LPV / manual / open-loop startup runs),
standby-demo (limit-cycle record). Exit codes: 0 success, 1 I/O or parse
error, 2 domain failure (infeasibility, identification failure), 3 internal
numerical fault. Output files are written atomically (temp + rename); runs
are pure functions of (inputs, seed). Formats are documented in FORMATS.md.
"""

import argparse
import csv
import os
import sys
import tempfile

import numpy as np
import yaml

from . import hybrid, ident, lowctl, plant, scheduler, sim, startup, thermo
from .errors import (ControllerFault, IdentificationError, NumericalError,
                     SchedulingError, ValidationError)

EXIT_OK = 0
EXIT_IO = 1
EXIT_DOMAIN = 2
EXIT_NUMERICAL = 3


def atomic_write(path, writer):
    """Write via a temp file in the target directory, then rename."""
    d = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-genunit-")
    try:
        with os.fdopen(fd, "w", newline="") as f:
            writer(f)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def apply_overrides(obj, overrides):
    """key=value overrides onto a dict (nested keys with dots)."""
    for ov in overrides or []:
        if "=" not in ov:
            raise ValidationError(f"override {ov!r} must be key=value")
        key, val = ov.split("=", 1)
        node = obj
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        try:
            node[parts[-1]] = yaml.safe_load(val)
        except yaml.YAMLError:
            node[parts[-1]] = val
    return obj


def _require_file(path):
    if not os.path.exists(path):
        raise FileNotFoundError(path)


def cmd_identify(args):
    _require_file(args.dataset)
    ds = ident.dataset_from_csv(args.dataset)
    bounds = ident.ThetaBounds()
    if args.bounds:
        _require_file(args.bounds)
        with open(args.bounds) as f:
            data = yaml.safe_load(f)
        bounds = ident.ThetaBounds(lower=np.array(data["lower"]),
                                   upper=np.array(data["upper"]))
    fit = ident.fit_parameters(ds, bounds, seed=args.seed)
    out = os.path.join(args.out, "fit_report.csv")

    def write(f):
        w = csv.writer(f)
        w.writerow(["parameter", "value", "lower", "upper"])
        for i, name in enumerate(ident.THETA_NAMES):
            w.writerow([name, repr(float(fit.theta[i])),
                        repr(float(bounds.lower[i])),
                        repr(float(bounds.upper[i]))])
        w.writerow(["T_t_gas_0", repr(float(fit.x0[0])), "", ""])
        w.writerow(["T_w_0", repr(float(fit.x0[2])), "", ""])
        w.writerow(["residual", repr(float(fit.residual)), "", ""])

    atomic_write(out, write)
    hist = os.path.join(args.out, "fit_history.csv")
    atomic_write(hist, lambda f: f.write(
        "accepted_residual\n" + "\n".join(repr(float(r))
                                          for r in fit.history) + "\n"))
    spec = ident.pe_spectrum(ds.u_meas, ds.tau_id)
    pe = os.path.join(args.out, "pe_spectrum.csv")

    def write_pe(f):
        w = csv.writer(f)
        w.writerow(["freq_hz", "psd_q_f", "psd_q_g", "psd_q_s_H"])
        for i, fr in enumerate(spec["freqs"]):
            w.writerow([repr(float(fr))]
                       + [repr(float(spec["psd"][ch][i])) for ch in range(3)])

    atomic_write(pe, write_pe)
    print(f"fit residual {fit.residual:.6g}; report in {out}")
    return EXIT_OK


def cmd_schedule(args):
    _require_file(args.demand)
    demand, prices = scheduler.load_demand_prices_csv(args.demand)
    mld = hybrid.compile_mld()
    init_modes = {"CHP": args.chp_mode, "FTB": args.ftb_mode}
    sched = scheduler.solve_uc(mld, demand, prices, init_modes=init_modes,
                               gap=args.gap)
    out = os.path.join(args.out, "schedule.csv")
    os.makedirs(args.out, exist_ok=True)
    tmp_path = out + ".tmp"
    scheduler.schedule_to_csv(sched, tmp_path)
    os.replace(tmp_path, out)
    report = scheduler.validate_schedule(sched, demand, mld=mld,
                                         prices=prices)
    print(f"objective {sched.objective:.6f}; schedule in {out}; "
          f"violations: {len(report)}")
    return EXIT_OK


def cmd_simulate(args):
    _require_file(args.scenario)
    with open(args.scenario) as f:
        data = yaml.safe_load(f)
    apply_overrides(data, args.override)
    sc = scenario_from_dict(data, seed=args.seed)
    traj, sched, events = sim.run_hierarchy(sc)
    out = os.path.join(args.out, "trajectory.csv")
    atomic_write(out, lambda f: traj.write_csv(f))
    m = sim.metrics(traj)
    summary = os.path.join(args.out, "summary.csv")

    def write_summary(f):
        w = csv.writer(f)
        w.writerow(["metric", "value"])
        for k, v in m.items():
            w.writerow([k, repr(float(v))])
        w.writerow(["replans", sum(1 for e in events if e[0] == "replan")])
        w.writerow(["faults", sum(1 for e in events if e[0] == "fault")])

    atomic_write(summary, write_summary)
    if any(e[0] == "fault" for e in events):
        print("run truncated by controller fault; see summary")
        return EXIT_NUMERICAL
    print(f"trajectory in {out}; cost {m['economic_cost']:.4f}")
    return EXIT_OK


def scenario_from_dict(data, seed=None):
    demand = scheduler.DemandProfile(
        P_e=np.asarray(data["demand"]["P_e"], dtype=float),
        q_s=np.asarray(data["demand"]["q_s"], dtype=float))
    prices = scheduler.PriceProfile(
        lam_gas=np.asarray(data["prices"]["lam_gas"], dtype=float),
        lam_sell=np.asarray(data["prices"]["lam_sell"], dtype=float),
        lam_buy=np.asarray(data["prices"]["lam_buy"], dtype=float))
    actual = None
    if "actual_demand" in data:
        actual = scheduler.DemandProfile(
            P_e=np.asarray(data["actual_demand"]["P_e"], dtype=float),
            q_s=np.asarray(data["actual_demand"]["q_s"], dtype=float))
    kw = dict(data.get("options", {}))
    if seed is not None:
        kw["seed"] = seed
    return sim.Scenario(demand=demand, prices=prices,
                        init_modes=data.get("init_modes",
                                            {"CHP": "ON", "FTB": "ON0"}),
                        actual_demand=actual, **kw)


def cmd_startup(args):
    x0 = startup.cold_initial_state(T0=args.t0)
    cfg = startup.StartupConfig()
    stress = startup.rate_limit_stress_params()
    if args.mode == "lpv":
        rec = startup.run_startup_lpv(x0, config=cfg,
                                      stress_by_state=stress)
        u = rec["u"]
        xs = rec["x"]
    elif args.mode == "manual":
        rec = startup.manual_startup_profile(x0, config=cfg)
        u = rec["u"]
        xs = rec["x"]
    elif args.mode == "openloop":
        sol = startup.solve_open_loop(x0, horizon=args.horizon, config=cfg,
                                      stress_by_state=stress)
        m = startup.open_loop_metrics(sol, cfg)
        rec = {"t": np.arange(len(sol["x"])) * cfg.tau_s, "x": sol["x"],
               "u": np.vstack([sol["u"], sol["u"][-1:]]), "p": sol["p"],
               "duration_s": m["duration_s"], "energy_J": m["energy_J"]}
        u = rec["u"]
        xs = rec["x"]
    else:
        raise ValidationError(f"unknown startup mode {args.mode!r}")

    viol = plant.rate_violations(xs, cfg.tau_s, stress,
                                 p0=thermo.p_sat(args.t0))
    out = os.path.join(args.out, f"startup_{args.mode}.csv")

    def write(f):
        w = csv.writer(f)
        w.writerow(["t_s", "T_t_gas", "l_w", "T_w", "q_f", "q_g", "q_s",
                    "p_bar"])
        for i in range(len(xs)):
            ui = u[min(i, len(u) - 1)]
            w.writerow([rec["t"][i]] + [repr(float(v)) for v in xs[i]]
                       + [repr(float(v)) for v in ui]
                       + [repr(float(rec["p"][i] / 1e5))])

    atomic_write(out, write)
    summary = os.path.join(args.out, f"startup_{args.mode}_summary.csv")

    def write_summary(f):
        w = csv.writer(f)
        w.writerow(["metric", "value"])
        w.writerow(["duration_s", repr(float(rec["duration_s"]))])
        w.writerow(["energy_MJ", repr(float(rec["energy_J"] / 1e6))])
        w.writerow(["rate_violations", len(viol)])

    atomic_write(summary, write_summary)
    print(f"{args.mode} startup: {rec['duration_s']:.0f} s, "
          f"{rec['energy_J'] / 1e6:.1f} MJ, {len(viol)} rate violations")
    return EXIT_OK


def cmd_standby_demo(args):
    rec, stats = lowctl.simulate_standby(n_steps=args.steps)
    out = os.path.join(args.out, "standby.csv")

    def write(f):
        w = csv.writer(f)
        w.writerow(["t_s", "p_bar", "q_g", "q_s", "phase", "T_w"])
        for i in range(len(rec["t"])):
            w.writerow([repr(float(rec[c][i])) if c != "phase"
                        else int(rec[c][i])
                        for c in ("t", "p_bar", "q_g", "q_s", "phase",
                                  "T_w")])

    atomic_write(out, write)
    print(f"stand-by record in {out}; cycle stats: {stats}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="genunit",
        description="Hierarchical optimization and control of a combined "
                    "steam/electricity generation unit.")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--seed", type=int, default=0, help="run seed")
    p.add_argument("--config", default=None,
                   help="optional YAML config (reserved for overrides)")
    p.add_argument("--override", action="append", default=[],
                   metavar="KEY=VALUE", help="scenario overrides")
    sub = p.add_subparsers(dest="command", required=True)

    pi = sub.add_parser("identify", help="fit plant parameters to a dataset")
    pi.add_argument("dataset", help="dataset CSV "
                                    "(time_s,q_f,q_g_B,q_s_H,p_s_H)")
    pi.add_argument("--bounds", default=None,
                    help="YAML with lower/upper theta bounds")
    pi.set_defaults(func=cmd_identify)

    ps = sub.add_parser("schedule", help="solve the 24h unit commitment")
    ps.add_argument("demand", help="demand/price CSV")
    ps.add_argument("--chp-mode", default="OFF", help="initial CHP mode")
    ps.add_argument("--ftb-mode", default="OFF", help="initial boiler mode")
    ps.add_argument("--gap", type=float, default=1e-4)
    ps.set_defaults(func=cmd_schedule)

    pm = sub.add_parser("simulate", help="closed-loop hierarchy run")
    pm.add_argument("scenario", help="scenario YAML")
    pm.set_defaults(func=cmd_simulate)

    pu = sub.add_parser("startup", help="startup experiment")
    pu.add_argument("--mode", choices=("lpv", "manual", "openloop"),
                    default="lpv")
    pu.add_argument("--t0", type=float, default=293.15,
                    help="initial temperature [K]")
    pu.add_argument("--horizon", type=int, default=320,
                    help="open-loop horizon [steps]")
    pu.set_defaults(func=cmd_startup)

    pd = sub.add_parser("standby-demo", help="stand-by limit cycle record")
    pd.add_argument("--steps", type=int, default=120)
    pd.set_defaults(func=cmd_standby_demo)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValidationError, yaml.YAMLError) as exc:
        print(f"error: invalid input: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SchedulingError, IdentificationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (NumericalError, ControllerFault) as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
