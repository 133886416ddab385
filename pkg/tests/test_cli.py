"""CLI surface checks: exit codes, file outputs, determinism."""

import os

import numpy as np
import pytest
import yaml

from genunit import cli, ident, scheduler


def run_cli(args):
    return cli.main(args)


@pytest.fixture()
def outdir(tmp_path):
    d = tmp_path / "out"
    d.mkdir()
    return str(d)


def write_demand_csv(path, N=4, pe=5e5, qs=0.15, lam=(1.5e-5, 1.7e-5, 405.0)):
    with open(path, "w") as f:
        f.write("step,P_e_D,q_s_D,lam_sell,lam_buy,lam_gas\n")
        for k in range(N):
            f.write(f"{k},{pe},{qs},{lam[0]},{lam[1]},{lam[2]}\n")


class TestIdentify:
    def test_missing_file_exit_1(self, outdir, capsys):
        rc = run_cli(["--out", outdir, "identify", outdir + "/nope.csv"])
        assert rc == 1
        assert "nope.csv" in capsys.readouterr().err

    def test_malformed_csv_exit_1(self, outdir, tmp_path, capsys):
        bad = tmp_path / "bad.csv"
        bad.write_text("time_s,q_f,q_g_B,q_s_H,p_s_H\n0,0.1,x,0.1,9e5\n")
        rc = run_cli(["--out", outdir, "identify", str(bad)])
        assert rc == 1
        assert "row" in capsys.readouterr().err


class TestSchedule:
    def test_zero_demand_all_off(self, outdir, tmp_path, capsys):
        dem = tmp_path / "d.csv"
        write_demand_csv(dem, N=3, pe=0.0, qs=0.0)
        rc = run_cli(["--out", outdir, "schedule", str(dem)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "objective 0.0" in out
        text = open(os.path.join(outdir, "schedule.csv")).read()
        assert "OFF" in text

    def test_feasible_schedule_validates(self, outdir, tmp_path, capsys):
        dem = tmp_path / "d.csv"
        write_demand_csv(dem, N=5)
        rc = run_cli(["--out", outdir, "schedule", str(dem),
                      "--chp-mode", "OFF", "--ftb-mode", "ON0"])
        assert rc == 0
        assert "violations: 0" in capsys.readouterr().out

    def test_infeasible_demand_exit_2(self, outdir, tmp_path, capsys):
        dem = tmp_path / "d.csv"
        write_demand_csv(dem, N=3, qs=0.6)  # above q_s_max
        rc = run_cli(["--out", outdir, "schedule", str(dem),
                      "--ftb-mode", "ON0"])
        assert rc == 2
        assert "q_s_max" in capsys.readouterr().err


class TestSimulate:
    def scenario_file(self, tmp_path, N=3):
        data = {
            "demand": {"P_e": [5e5] * N, "q_s": [0.175] * N},
            "prices": {"lam_gas": [405.0] * N, "lam_sell": [1.5e-5] * N,
                       "lam_buy": [1.7e-5] * N},
            "init_modes": {"CHP": "OFF", "FTB": "ON0"},
        }
        path = tmp_path / "scenario.yaml"
        path.write_text(yaml.safe_dump(data))
        return str(path)

    def test_run_and_outputs(self, outdir, tmp_path):
        sc = self.scenario_file(tmp_path)
        rc = run_cli(["--out", outdir, "--seed", "5", "simulate", sc])
        assert rc == 0
        assert os.path.exists(os.path.join(outdir, "trajectory.csv"))
        assert os.path.exists(os.path.join(outdir, "summary.csv"))

    def test_byte_identical_reruns(self, outdir, tmp_path):
        sc = self.scenario_file(tmp_path)
        rc = run_cli(["--out", outdir, "--seed", "9", "simulate", sc])
        assert rc == 0
        first = open(os.path.join(outdir, "trajectory.csv"), "rb").read()
        rc = run_cli(["--out", outdir, "--seed", "9", "simulate", sc])
        assert rc == 0
        second = open(os.path.join(outdir, "trajectory.csv"), "rb").read()
        assert first == second

    def test_override_applies(self, outdir, tmp_path):
        sc = self.scenario_file(tmp_path)
        rc = run_cli(["--out", outdir, "--override", "options.seed=3",
                      "simulate", sc])
        assert rc == 0


class TestStartupCmd:
    def test_manual_startup_summary(self, outdir, capsys):
        rc = run_cli(["--out", outdir, "startup", "--mode", "manual",
                      "--t0", "430"])
        assert rc == 0
        out = capsys.readouterr().out
        assert "manual startup" in out
        summary = open(os.path.join(outdir,
                                    "startup_manual_summary.csv")).read()
        assert "duration_s" in summary and "rate_violations" in summary


class TestStandbyDemo:
    def test_outputs_cycle_stats(self, outdir, capsys):
        rc = run_cli(["--out", outdir, "standby-demo", "--steps", "60"])
        assert rc == 0
        assert "cycle stats" in capsys.readouterr().out
        text = open(os.path.join(outdir, "standby.csv")).read()
        assert text.startswith("t_s,p_bar,q_g,q_s,phase,T_w")


class TestRoundTrips:
    def test_emitted_schedule_readable(self, outdir, tmp_path):
        dem = tmp_path / "d.csv"
        write_demand_csv(dem, N=4)
        assert run_cli(["--out", outdir, "schedule", str(dem),
                        "--ftb-mode", "ON0"]) == 0
        # the demand CSV round-trips through the ingestion parser
        demand, prices = scheduler.load_demand_prices_csv(dem)
        assert len(demand) == 4

    def test_identify_outputs_round_trip(self, outdir, tmp_path):
        ds, theta, x0 = ident.synthetic_dataset(N=120)
        path = tmp_path / "ds.csv"
        ident.dataset_to_csv(ds, path)
        ds2 = ident.dataset_from_csv(path)
        assert np.allclose(ds2.y_meas, ds.y_meas)
