"""End-to-end checks of the command-line driver.

Every test drives the real argument parser and subcommand functions
in-process through cli.main, on configurations small enough to finish
in fractions of a second.  The properties pinned here are the contract
of the artifact layer: exit codes, file formats, byte determinism, and
manifest re-execution.
"""

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from anelastic import cli
from anelastic.cases import SCENARIO_NAMES, builtin_scenario
from anelastic.stepper import TimeControl


def run_cli(*argv):
    return cli.main(list(argv))


def read_csv(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    assert b"\r" not in raw, "CSV must use LF line endings"
    lines = raw.decode("ascii").strip().split("\n")
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:]]
    return header, rows


# -- run: exit codes and artifacts -------------------------------------


def test_run_success_writes_all_artifacts(tmp_path):
    out = str(tmp_path / "run")
    rc = run_cli("run", "--scenario", "wb-1d", "--mesh", "16",
                 "--t-end", "0.1", "--out", out)
    assert rc == 0
    for name in ("snapshot_final.csv", "diagnostics.csv", "manifest.json"):
        assert os.path.exists(os.path.join(out, name)), name


def test_run_unknown_scenario_exit_2_lists_names(tmp_path, capsys):
    rc = run_cli("run", "--scenario", "frobnicate",
                 "--out", str(tmp_path / "x"))
    assert rc == 2
    err = capsys.readouterr().err
    for name in SCENARIO_NAMES:
        assert name in err


def test_run_bad_dt_policy_exit_2(tmp_path, capsys):
    rc = run_cli("run", "--scenario", "wb-1d", "--dt-policy", "sometimes",
                 "--out", str(tmp_path / "x"))
    assert rc == 2
    assert "configuration error" in capsys.readouterr().err


def test_run_rejects_eps_list(tmp_path, capsys):
    rc = run_cli("run", "--scenario", "wb-1d", "--eps", "0.1,0.01",
                 "--out", str(tmp_path / "x"))
    assert rc == 2


def test_run_numerical_failure_exit_3(tmp_path, capsys):
    # the non-balanced variant loses positivity at small eps; the driver
    # must report it as a numerical failure, not a crash
    rc = run_cli("run", "--scenario", "perturb-1d", "--eps", "0.001",
                 "--nwb", "--out", str(tmp_path / "x"))
    assert rc == 3
    assert "numerical failure" in capsys.readouterr().err


def test_run_unknown_config_key_exit_2(tmp_path, capsys):
    cfg = tmp_path / "bad.toml"
    cfg.write_text('scenario = "wb-1d"\nfrobnicate = 3\n')
    rc = run_cli("run", "--config", str(cfg), "--out", str(tmp_path / "x"))
    assert rc == 2
    assert "frobnicate" in capsys.readouterr().err


def test_hydrostatic_run_reports_machine_zero_errors(tmp_path):
    out = str(tmp_path / "wb")
    rc = run_cli("run", "--scenario", "wb-1d", "--eps", "0.001",
                 "--out", out)
    assert rc == 0
    header, rows = read_csv(os.path.join(out, "diagnostics.csv"))
    assert header == list(cli.DIAG_COLUMNS)
    final = dict(zip(header, rows[-1]))
    assert float(final["l2_rho_err"]) <= 1e-12
    assert float(final["l2_u_err"]) <= 1e-12


# -- artifact formats --------------------------------------------------


def test_snapshot_format_1d_roundtrips_bitwise(tmp_path):
    out = str(tmp_path / "p1")
    rc = run_cli("run", "--scenario", "perturb-1d", "--eps", "0.1",
                 "--t-end", "0.05", "--mesh", "24", "--out", out)
    assert rc == 0
    header, rows = read_csv((os.path.join(out, "snapshot_final.csv")))
    assert header == ["x", "rho", "q1"]
    assert len(rows) == 24

    # recompute the same run in-process; 17 significant digits must
    # reproduce every float bitwise
    scenario = builtin_scenario("perturb-1d", eps=0.1, t_end=0.05, n=(24,))
    grid, _, _, stepper, state = cli.build_pieces(scenario)
    final, _ = stepper.run(state, scenario.t_end,
                           TimeControl.parse(scenario.dt_policy))
    rho = final.rho[grid.interior]
    q1 = final.q[0][grid.interior]
    x = grid.centers(0, ghosts=False)
    got = np.array([[float(c) for c in row] for row in rows])
    assert np.array_equal(got[:, 0], x)
    assert np.array_equal(got[:, 1], rho)
    assert np.array_equal(got[:, 2], q1)


def test_snapshot_format_2d(tmp_path):
    out = str(tmp_path / "p2")
    rc = run_cli("run", "--scenario", "perturb-2d", "--mesh", "8",
                 "--t-end", "0.01", "--out", out)
    assert rc == 0
    header, rows = read_csv(os.path.join(out, "snapshot_final.csv"))
    assert header == ["x", "y", "rho", "q1", "q2"]
    assert len(rows) == 64
    # row order is C order: y varies fastest
    y = [float(r[1]) for r in rows[:8]]
    assert y == sorted(y)
    assert float(rows[0][0]) == float(rows[7][0])


def test_manifest_is_complete(tmp_path):
    out = str(tmp_path / "m")
    run_cli("run", "--scenario", "wb-1d", "--mesh", "16", "--t-end", "0.1",
            "--out", out)
    with open(os.path.join(out, "manifest.json")) as fh:
        doc = json.load(fh)
    assert doc["command"] == "run"
    expected = set(builtin_scenario("wb-1d").as_dict()) | {"out", "snapshots"}
    assert expected <= set(doc["config"])
    assert {"anelastic", "python", "numpy", "scipy"} <= set(doc["versions"])
    assert doc["wall_time_s"] >= 0.0
    assert doc["artifacts"]["diagnostics"] == "diagnostics.csv"
    assert doc["artifacts"]["steps"] > 0


# -- determinism and re-execution --------------------------------------


def test_identical_config_identical_bytes(tmp_path):
    args = ("run", "--scenario", "perturb-1d", "--eps", "0.01",
            "--t-end", "0.1", "--mesh", "32")
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run_cli(*args, "--out", out_a) == 0
    assert run_cli(*args, "--out", out_b) == 0
    for name in ("snapshot_final.csv", "diagnostics.csv"):
        with open(os.path.join(out_a, name), "rb") as fh:
            blob_a = fh.read()
        with open(os.path.join(out_b, name), "rb") as fh:
            blob_b = fh.read()
        assert blob_a == blob_b, name


def test_manifest_reexecutes_the_run(tmp_path):
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert run_cli("run", "--scenario", "perturb-1d", "--eps", "0.01",
                   "--t-end", "0.1", "--mesh", "32", "--out", out_a) == 0
    assert run_cli("run", "--config", os.path.join(out_a, "manifest.json"),
                   "--out", out_b) == 0
    for name in ("snapshot_final.csv", "diagnostics.csv"):
        with open(os.path.join(out_a, name), "rb") as fh:
            blob_a = fh.read()
        with open(os.path.join(out_b, name), "rb") as fh:
            blob_b = fh.read()
        assert blob_a == blob_b, name


def test_output_dir_env_override(tmp_path, monkeypatch):
    target = tmp_path / "from_env"
    monkeypatch.setenv(cli.OUT_ENV_VAR, str(target))
    rc = run_cli("run", "--scenario", "wb-1d", "--mesh", "8",
                 "--t-end", "0.05")
    assert rc == 0
    assert (target / "snapshot_final.csv").exists()


# -- snapshot schedules ------------------------------------------------


def test_snapshot_schedule_every_n(tmp_path):
    # fixed:0.5 on 16 cells gives dt = 0.03125; t_end 0.25 is 8 steps,
    # so every:3 fires at steps 3 and 6 plus the always-written final
    out = str(tmp_path / "s")
    rc = run_cli("run", "--scenario", "wb-1d", "--mesh", "16",
                 "--t-end", "0.25", "--snapshots", "every:3", "--out", out)
    assert rc == 0
    with open(os.path.join(out, "manifest.json")) as fh:
        snaps = json.load(fh)["artifacts"]["snapshots"]
    names = [s["file"] for s in snaps]
    assert names == ["snapshot_0000.csv", "snapshot_0001.csv",
                     "snapshot_final.csv"]
    assert [pytest.approx(s["t"]) for s in snaps[:2]] == [3 * 0.03125,
                                                          6 * 0.03125]
    for name in names:
        assert os.path.exists(os.path.join(out, name))


def test_snapshot_schedule_time_list(tmp_path):
    out = str(tmp_path / "s")
    rc = run_cli("run", "--scenario", "wb-1d", "--mesh", "16",
                 "--t-end", "0.25", "--snapshots", "0.05,0.2", "--out", out)
    assert rc == 0
    with open(os.path.join(out, "manifest.json")) as fh:
        snaps = json.load(fh)["artifacts"]["snapshots"]
    assert len(snaps) == 3
    assert snaps[0]["t"] >= 0.05 and snaps[1]["t"] >= 0.2


def test_bad_snapshot_schedule_exit_2(tmp_path):
    assert run_cli("run", "--scenario", "wb-1d", "--snapshots", "every:x",
                   "--out", str(tmp_path / "x")) == 2
    assert run_cli("run", "--scenario", "wb-1d", "--snapshots", "every:0",
                   "--out", str(tmp_path / "x")) == 2


# -- wb-table ----------------------------------------------------------


def test_wb_table_machine_zero_rows(tmp_path):
    out = str(tmp_path / "wb")
    rc = run_cli("wb-table", "--eps", "0.001", "--out", out)
    assert rc == 0
    header, rows = read_csv(os.path.join(out, "wb_table.csv"))
    assert header[:3] == ["potential", "eps", "n"]
    assert len(rows) == 3                      # one per potential
    for row in rows:
        rec = dict(zip(header, row))
        assert float(rec["err_rho"]) <= 1e-12
        assert float(rec["err_u1"]) <= 1e-12


def test_wb_table_empty_eps_list(tmp_path):
    out = str(tmp_path / "wb")
    rc = run_cli("wb-table", "--eps", "", "--out", out)
    assert rc == 0
    header, rows = read_csv(os.path.join(out, "wb_table.csv"))
    assert rows == []


# -- convergence -------------------------------------------------------


def test_convergence_rejects_non_halving_meshes(tmp_path, capsys):
    rc = run_cli("convergence", "--scenario", "aoc-1d",
                 "--meshes", "20,30,40", "--out", str(tmp_path / "c"))
    assert rc == 2
    assert "halve" in capsys.readouterr().err


def test_convergence_rejects_short_mesh_list(tmp_path):
    assert run_cli("convergence", "--scenario", "aoc-1d", "--meshes",
                   "20,40", "--out", str(tmp_path / "c")) == 2


def test_convergence_zero_perturbation_reports_undefined_orders(tmp_path):
    cfg = tmp_path / "flatline.toml"
    cfg.write_text('scenario = "aoc-1d"\nzeta = 0.0\nt_end = 0.5\n')
    out = str(tmp_path / "c")
    rc = run_cli("convergence", "--config", str(cfg),
                 "--meshes", "8,16,32", "--out", out)
    assert rc == 0
    header, rows = read_csv(os.path.join(out, "error_table.csv"))
    k_err = header.index("err_u1")
    k_ord = header.index("order_u1")
    for row in rows:
        assert float(row[k_err]) <= 1e-12
    assert rows[0][k_ord] == ""                # no coarser partner
    assert rows[1][k_ord] == "undefined"
    assert rows[2][k_ord] == "undefined"


def test_convergence_table_structure_on_short_run(tmp_path):
    out = str(tmp_path / "c")
    rc = run_cli("convergence", "--scenario", "aoc-1d", "--eps", "0.01",
                 "--t-end", "0.3", "--meshes", "8,16,32", "--out", out)
    assert rc == 0
    header, rows = read_csv(os.path.join(out, "error_table.csv"))
    assert header[0] == "scenario"
    assert [int(r[header.index("n")]) for r in rows] == [8, 16, 32]
    for row in rows[1:]:
        float(row[header.index("order_u1")])   # parses as a number


# -- sweep -------------------------------------------------------------


def test_sweep_runs_eps_grid(tmp_path):
    out = str(tmp_path / "sweep")
    rc = run_cli("sweep", "--scenario", "perturb-1d", "--eps", "0.1,0.01",
                 "--t-end", "0.05", "--mesh", "16", "--out", out)
    assert rc == 0
    with open(os.path.join(out, "manifest.json")) as fh:
        doc = json.load(fh)
    runs = doc["artifacts"]["runs"]
    assert [r["eps"] for r in runs] == [0.1, 0.01]
    assert all(r["ok"] for r in runs)
    for r in runs:
        sub = os.path.join(out, r["dir"])
        assert os.path.exists(os.path.join(sub, "snapshot_final.csv"))
        assert os.path.exists(os.path.join(sub, "manifest.json"))


# -- process-level entry point -----------------------------------------


def test_module_entry_point_subprocess(tmp_path):
    out = str(tmp_path / "proc")
    proc = subprocess.run(
        [sys.executable, "-m", "anelastic.cli", "run", "--scenario",
         "wb-1d", "--mesh", "8", "--t-end", "0.05", "--out", out],
        capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert os.path.exists(os.path.join(out, "snapshot_final.csv"))
