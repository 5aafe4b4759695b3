"""Command-line driver: run scenarios, sweeps, and error tables.

Subcommands

  run          advance one scenario and write its artifacts
  convergence  refinement study against the analytic steady profile
  wb-table     hydrostatic-rest errors over potentials x eps
  sweep        one scenario repeated over an eps (and mesh) list

Artifacts are plain CSV and JSON.  Every CSV is written with LF line
endings, '.' decimal separators, and 17 significant digits, in a fixed
row order, so identical configurations produce identical bytes.  The
run manifest records the fully resolved configuration; passing it back
via --config reproduces the run.

Exit codes: 0 success, 2 configuration errors, 3 numerical failure
(the diagnostic context of the last completed step is printed).
"""

from __future__ import annotations

import argparse
import json
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy

from . import __version__
from .cases import (SCENARIO_NAMES, Scenario, builtin_scenario, initial_state,
                    steady_reference)
from .elliptic import SolverError
from .equilibrium import EquilibriumProfile
from .imex import builtin as builtin_tableau
from .mesh import ConfigError, Grid, State
from .stepper import Stepper, StepReport, TimeControl, diagnostics

OUT_ENV_VAR = "ANELASTIC_OUT"
DIAG_COLUMNS = ("t", "dt", "ke", "l2_rho_err", "l2_u_err", "div_residual",
                "max_mach")
WB_TABLE_POTENTIALS = ("linear", "quadratic", "sinusoidal")
DEFAULT_WB_EPS = (1.0, 1e-1, 1e-2, 1e-3, 1e-4)


def _fmt(x: float) -> str:
    return "%.17g" % float(x)


def _write_lines(path: str, lines: Sequence[str]) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


# -- snapshot schedule -------------------------------------------------


@dataclass
class SnapshotSchedule:
    """Either 'every:N' steps or an explicit list of times.  The final
    state is always written."""

    every: Optional[int] = None
    times: Tuple[float, ...] = ()
    spec: str = "none"

    @classmethod
    def parse(cls, text: Optional[str]) -> "SnapshotSchedule":
        if text is None or text.strip() in ("", "none"):
            return cls()
        text = text.strip()
        if text.startswith("every:"):
            try:
                n = int(text[len("every:"):])
            except ValueError as exc:
                raise ConfigError(f"bad snapshot schedule {text!r}") from exc
            if n <= 0:
                raise ConfigError("snapshot stride must be positive")
            return cls(every=n, spec=text)
        try:
            times = tuple(sorted(float(tok) for tok in text.split(",") if tok))
        except ValueError as exc:
            raise ConfigError(f"bad snapshot schedule {text!r}") from exc
        return cls(times=times, spec=text)


def write_snapshot(path: str, grid: Grid, state: State) -> None:
    """One row per interior cell in C order; columns x[,y],rho,q1[,q2]."""
    if grid.dim == 1:
        header = "x,rho,q1"
        cols = [grid.centers(0, ghosts=False),
                state.rho[grid.interior],
                state.q[0][grid.interior]]
    else:
        header = "x,y,rho,q1,q2"
        xc, yc = (grid.centers(a, ghosts=False) for a in range(2))
        x, y = np.meshgrid(xc, yc, indexing="ij")
        cols = [x.ravel(), y.ravel(),
                state.rho[grid.interior].ravel(),
                state.q[0][grid.interior].ravel(),
                state.q[1][grid.interior].ravel()]
    lines = [header]
    for row in zip(*cols):
        lines.append(",".join(_fmt(v) for v in row))
    _write_lines(path, lines)


# -- error tables ------------------------------------------------------


@dataclass
class ErrorTable:
    """Rows keyed by (label, eps, mesh) with L2 errors per field and the
    observed order between consecutive meshes (log2 of the error ratio
    for a mesh-halving pair; None where no pair exists, 'undefined'
    where the errors are at the floor and the ratio means nothing)."""

    fields: Tuple[str, ...]
    rows: List[Dict[str, object]] = field(default_factory=list)

    def add(self, label: str, eps: float, n: int,
            errors: Dict[str, float]) -> None:
        self.rows.append({"label": label, "eps": eps, "n": n,
                          "errors": dict(errors)})

    def orders(self) -> List[Dict[str, Optional[object]]]:
        out: List[Dict[str, Optional[object]]] = []
        for i, row in enumerate(self.rows):
            rec: Dict[str, Optional[object]] = {}
            prev = self.rows[i - 1] if i > 0 else None
            for f in self.fields:
                rec[f] = None
                if (prev is not None and prev["label"] == row["label"]
                        and prev["eps"] == row["eps"]
                        and row["n"] == 2 * prev["n"]):
                    e_c = float(prev["errors"][f])
                    e_f = float(row["errors"][f])
                    if e_c <= 1e-13 or e_f <= 1e-13:
                        rec[f] = "undefined"
                    else:
                        rec[f] = float(np.log2(e_c / e_f))
            out.append(rec)
        return out

    def to_csv(self, path: str, label_name: str = "label") -> None:
        header = [label_name, "eps", "n"]
        header += [f"err_{f}" for f in self.fields]
        header += [f"order_{f}" for f in self.fields]
        lines = [",".join(header)]
        for row, order in zip(self.rows, self.orders()):
            cells = [str(row["label"]), _fmt(row["eps"]), str(row["n"])]
            cells += [_fmt(row["errors"][f]) for f in self.fields]
            for f in self.fields:
                o = order[f]
                if o is None:
                    cells.append("")
                elif isinstance(o, str):
                    cells.append(o)
                else:
                    cells.append(_fmt(o))
            lines.append(",".join(cells))
        _write_lines(path, lines)


# -- configuration plumbing --------------------------------------------

_SCENARIO_KEYS = {"dim", "lo", "hi", "n", "potential", "gamma", "eps", "zeta",
                  "perturbation", "bc", "t_end", "dt_policy", "tableau",
                  "beta", "nwb", "c0", "meshes"}


def load_config_file(path: str) -> Dict[str, object]:
    """Flat key-value configuration from TOML (or a run manifest JSON)."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    if path.endswith(".json"):
        with open(path) as fh:
            data = json.load(fh)
        if isinstance(data, dict) and isinstance(data.get("config"), dict):
            data = data["config"]
    else:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"malformed config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a table of keys")
    return data


def _as_mesh(value, dim: int) -> Tuple[int, ...]:
    if isinstance(value, str):
        toks = [t for t in value.split(",") if t]
        value = [int(t) for t in toks]
    if isinstance(value, (int, np.integer)):
        value = [int(value)]
    value = [int(v) for v in value]
    if len(value) == 1:
        return tuple(value) * dim
    if len(value) == dim:
        return tuple(value)
    raise ConfigError(f"mesh needs 1 or {dim} entries, got {len(value)}")


def resolve_scenario(args: argparse.Namespace) -> Tuple[Scenario, Dict[str, object]]:
    """Merge config file and command-line flags into one Scenario.

    Flags win over file values.  Returns the scenario and the leftover
    settings (output directory, snapshot schedule).
    """
    file_cfg: Dict[str, object] = {}
    if args.config:
        file_cfg = dict(load_config_file(args.config))

    file_name = file_cfg.pop("scenario", None) or file_cfg.pop("name", None)
    file_out = file_cfg.pop("out", None)
    file_snapshots = file_cfg.pop("snapshots", None)

    name = args.scenario or file_name
    if not name:
        raise ConfigError("no scenario given (use --scenario or --config)")
    name = str(name)

    out = args.out or file_out
    snapshots = args.snapshots if args.snapshots is not None \
        else file_snapshots

    overrides: Dict[str, object] = {}
    mesh_value = None
    for key, value in file_cfg.items():
        if key == "mesh":
            mesh_value = value
        elif key in _SCENARIO_KEYS:
            overrides[key] = value
        else:
            raise ConfigError(f"unknown config key {key!r}")

    base = builtin_scenario(name)       # validates the name, fixes dim
    if args.eps is not None:
        if len(args.eps) != 1:
            raise ConfigError("this command takes exactly one --eps value")
        overrides["eps"] = args.eps[0]
    if args.mesh is not None:
        mesh_value = args.mesh
    if mesh_value is not None:
        overrides["n"] = _as_mesh(mesh_value, base.dim)
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    if args.dt_policy is not None:
        overrides["dt_policy"] = args.dt_policy
    if args.tableau is not None:
        overrides["tableau"] = args.tableau
    if args.beta is not None:
        overrides["beta"] = args.beta
    if args.nwb:
        overrides["nwb"] = True

    for key in ("lo", "hi", "n", "meshes"):
        if key in overrides and isinstance(overrides[key], list):
            overrides[key] = tuple(overrides[key])

    scenario = builtin_scenario(name, **overrides)
    TimeControl.parse(scenario.dt_policy)      # validate early
    settings = {"out": out, "snapshots": snapshots}
    return scenario, settings


def output_dir(explicit: Optional[str]) -> str:
    """Explicit flag first, then the environment override, then ./out."""
    path = explicit or os.environ.get(OUT_ENV_VAR) or "out"
    os.makedirs(path, exist_ok=True)
    return path


def _versions() -> Dict[str, str]:
    return {
        "anelastic": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def write_manifest(path: str, command: str, config: Dict[str, object],
                   wall_time: float, artifacts: Dict[str, object]) -> None:
    doc = {
        "command": command,
        "config": config,
        "versions": _versions(),
        "wall_time_s": wall_time,
        "artifacts": artifacts,
    }
    with open(path, "w", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


# -- the run subcommand ------------------------------------------------


def build_pieces(scenario: Scenario, n: Optional[Tuple[int, ...]] = None):
    grid = scenario.grid(n)
    profile = scenario.profile(grid)
    bc = scenario.boundary()
    tableau = builtin_tableau(scenario.tableau, beta=scenario.beta)
    stepper = Stepper(grid, profile, bc, tableau, scenario.eps,
                      nwb=scenario.nwb)
    state = initial_state(scenario, grid, profile)
    return grid, profile, bc, stepper, state


def run_scenario(scenario: Scenario, out: str,
                 schedule: SnapshotSchedule) -> Dict[str, object]:
    """Advance to t_end, writing artifacts into out.  Returns the
    artifact index for the manifest."""
    grid, profile, _, stepper, state = build_pieces(scenario)
    control = TimeControl.parse(scenario.dt_policy)

    diag_rows: List[str] = [",".join(DIAG_COLUMNS)]

    def diag_line(t: float, dt: float, diag: Dict[str, float]) -> str:
        cells = [_fmt(t), _fmt(dt)]
        cells += [_fmt(diag[c]) for c in DIAG_COLUMNS[2:]]
        return ",".join(cells)

    diag_rows.append(diag_line(0.0, 0.0, diagnostics(state, grid, profile)))

    snaps: List[Dict[str, object]] = []
    pending = list(schedule.times)
    counter = {"steps": 0}

    def on_step(rep: StepReport, st: State) -> None:
        diag_rows.append(diag_line(rep.t, rep.dt, rep.diagnostics))
        counter["steps"] += 1
        due = False
        if schedule.every and counter["steps"] % schedule.every == 0:
            due = True
        while pending and rep.t >= pending[0] - 1e-12:
            pending.pop(0)
            due = True
        if due:
            fname = "snapshot_%04d.csv" % len(snaps)
            write_snapshot(os.path.join(out, fname), grid, st)
            snaps.append({"file": fname, "t": rep.t})

    final, reports = stepper.run(state, scenario.t_end, control,
                                 on_step=on_step)
    write_snapshot(os.path.join(out, "snapshot_final.csv"), grid, final)
    snaps.append({"file": "snapshot_final.csv", "t": scenario.t_end})
    _write_lines(os.path.join(out, "diagnostics.csv"), diag_rows)
    return {
        "diagnostics": "diagnostics.csv",
        "snapshots": snaps,
        "steps": len(reports),
    }


def cmd_run(args: argparse.Namespace) -> int:
    scenario, settings = resolve_scenario(args)
    out = output_dir(settings["out"])
    schedule = SnapshotSchedule.parse(settings["snapshots"])
    started = time.perf_counter()
    try:
        artifacts = run_scenario(scenario, out, schedule)
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    config = scenario.as_dict()
    config["out"] = out
    config["snapshots"] = schedule.spec
    write_manifest(os.path.join(out, "manifest.json"), "run", config,
                   time.perf_counter() - started, artifacts)
    print(f"run complete: {artifacts['steps']} steps -> {out}")
    return 0


# -- the convergence subcommand ----------------------------------------


def _final_errors(scenario: Scenario, n: Tuple[int, ...],
                  reference: Optional[np.ndarray]) -> Dict[str, float]:
    grid, profile, _, stepper, state = build_pieces(scenario, n)
    control = TimeControl.parse(scenario.dt_policy)
    final, _ = stepper.run(state, scenario.t_end, control)
    dv = grid.cell_volume()
    rho = final.rho[grid.interior]
    if reference is None:
        reference = profile.rho_c[grid.interior]
    e_rho = float(np.sqrt(np.sum((rho - reference) ** 2) * dv))
    errors = {"rho": e_rho}
    for m in range(grid.dim):
        u = final.q[(m,) + grid.interior] / rho
        errors[f"u{m + 1}"] = float(np.sqrt(np.sum(u * u) * dv))
    return errors


def cmd_convergence(args: argparse.Namespace) -> int:
    if args.scenario is None and args.config is None:
        args.scenario = "aoc-1d"
    scenario, settings = resolve_scenario(args)
    meshes = tuple(int(v) for v in (args.meshes or scenario.meshes))
    if len(meshes) < 3:
        raise ConfigError("convergence needs at least 3 meshes")
    for c, f in zip(meshes, meshes[1:]):
        if f != 2 * c:
            raise ConfigError(
                f"mesh list must halve the spacing at every step; "
                f"{f} does not double {c}")
    out = output_dir(settings["out"])

    started = time.perf_counter()
    fields = ("rho",) + tuple(f"u{m + 1}" for m in range(scenario.dim))
    table = ErrorTable(fields=fields)
    for n in meshes:
        grid = scenario.grid((n,) * scenario.dim)
        reference = steady_reference(scenario, grid) if scenario.dim == 1 \
            else None
        errors = _final_errors(scenario, (n,) * scenario.dim, reference)
        table.add(scenario.name, scenario.eps, n, errors)

    path = os.path.join(out, "error_table.csv")
    table.to_csv(path, label_name="scenario")
    config = scenario.as_dict()
    config["out"] = out
    config["meshes"] = list(meshes)
    write_manifest(os.path.join(out, "manifest.json"), "convergence", config,
                   time.perf_counter() - started,
                   {"error_table": "error_table.csv"})

    for row, order in zip(table.rows, table.orders()):
        parts = [f"n={row['n']:>5d}"]
        for f in fields:
            parts.append(f"err_{f}={_fmt(row['errors'][f])}")
            o = order[f]
            if o is not None:
                parts.append(f"order_{f}={o if isinstance(o, str) else '%.3f' % o}")
        print("  ".join(parts))
    return 0


# -- the wb-table subcommand -------------------------------------------


def cmd_wb_table(args: argparse.Namespace) -> int:
    eps_list = args.eps if args.eps is not None else list(DEFAULT_WB_EPS)
    out = output_dir(args.out)
    started = time.perf_counter()
    table = ErrorTable(fields=("rho", "u1"))
    for pot in WB_TABLE_POTENTIALS:
        for eps in eps_list:
            scenario = builtin_scenario("wb-1d", potential=pot, eps=eps,
                                        nwb=args.nwb)
            try:
                errors = _final_errors(scenario, scenario.n, None)
            except SolverError:
                # the non-balanced variant may blow up at small eps; an
                # unbounded error is still a valid negative-control row
                errors = {"rho": float("inf"), "u1": float("inf")}
            table.add(pot, eps, scenario.n[0], errors)
    path = os.path.join(out, "wb_table.csv")
    table.to_csv(path, label_name="potential")
    write_manifest(os.path.join(out, "manifest.json"), "wb-table",
                   {"eps": list(eps_list), "nwb": args.nwb, "out": out,
                    "potentials": list(WB_TABLE_POTENTIALS)},
                   time.perf_counter() - started,
                   {"wb_table": "wb_table.csv"})
    for row in table.rows:
        print(f"{row['label']:<12s} eps={_fmt(row['eps']):<10s} "
              f"rho={_fmt(row['errors']['rho'])} u={_fmt(row['errors']['u1'])}")
    return 0


# -- the sweep subcommand ----------------------------------------------


def cmd_sweep(args: argparse.Namespace) -> int:
    eps_flag = args.eps
    args.eps = None                      # the sweep owns the eps list
    scenario, settings = resolve_scenario(args)
    eps_list = eps_flag if eps_flag is not None else [scenario.eps]
    mesh_list = args.meshes or [None]
    out = output_dir(settings["out"])
    schedule = SnapshotSchedule.parse(settings["snapshots"])
    started = time.perf_counter()
    runs: List[Dict[str, object]] = []
    status = 0
    for eps in eps_list:
        for mesh in mesh_list:
            overrides: Dict[str, object] = {"eps": eps}
            if mesh is not None:
                overrides["n"] = (int(mesh),) * scenario.dim
            sub = builtin_scenario(scenario.name, **{
                **{k: v for k, v in scenario.as_dict().items()
                   if k not in ("name", "zeta")},
                **overrides})
            tag = "eps%.6g" % eps + (f"_n{mesh}" if mesh is not None else "")
            subdir = os.path.join(out, tag)
            os.makedirs(subdir, exist_ok=True)
            t0 = time.perf_counter()
            try:
                artifacts = run_scenario(sub, subdir, schedule)
                ok = True
            except SolverError as exc:
                print(f"sweep member {tag} failed: {exc}", file=sys.stderr)
                artifacts = {"error": str(exc)}
                ok = False
                status = 3
            config = sub.as_dict()
            config["out"] = subdir
            config["snapshots"] = schedule.spec
            write_manifest(os.path.join(subdir, "manifest.json"), "run",
                           config, time.perf_counter() - t0, artifacts)
            runs.append({"dir": tag, "eps": eps, "mesh": mesh, "ok": ok})
    write_manifest(os.path.join(out, "manifest.json"), "sweep",
                   {"scenario": scenario.name, "eps": list(eps_list),
                    "meshes": [m for m in mesh_list if m is not None],
                    "out": out},
                   time.perf_counter() - started, {"runs": runs})
    print(f"sweep complete: {len(runs)} runs -> {out}")
    return status


# -- argument parsing --------------------------------------------------


def _float_list(text: str) -> List[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def _int_list(text: str) -> List[int]:
    return [int(tok) for tok in text.split(",") if tok.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="anelastic",
        description="Finite-volume solver for low-Mach flows in "
                    "gravitational balance.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--scenario", help="built-in scenario name")
        p.add_argument("--config", help="TOML config file or run manifest")
        p.add_argument("--eps", type=_float_list,
                       help="scaling parameter(s), comma separated")
        p.add_argument("--mesh", help="cells per axis, e.g. 100 or 64,32")
        p.add_argument("--tableau", help="time integrator name")
        p.add_argument("--beta", type=float, help="tableau damping parameter")
        p.add_argument("--nwb", action="store_true",
                       help="disable the balanced discretization")
        p.add_argument("--out", help=f"output directory (default ./out or "
                                     f"${OUT_ENV_VAR})")
        p.add_argument("--snapshots",
                       help="'every:N', comma-separated times, or 'none'")
        p.add_argument("--dt-policy", dest="dt_policy",
                       help="'cfl:NU' or 'fixed:C' (dt = C*dx)")
        p.add_argument("--t-end", dest="t_end", type=float,
                       help="final time override")

    p_run = sub.add_parser("run", help="advance one scenario")
    common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_conv = sub.add_parser("convergence", help="mesh refinement study")
    common(p_conv)
    p_conv.add_argument("--meshes", type=_int_list,
                        help="refinement ladder, e.g. 20,40,80,160")
    p_conv.set_defaults(func=cmd_convergence)

    p_wb = sub.add_parser("wb-table", help="rest-state error table")
    p_wb.add_argument("--eps", type=_float_list,
                      help="eps values, comma separated (may be empty)")
    p_wb.add_argument("--nwb", action="store_true")
    p_wb.add_argument("--out")
    p_wb.set_defaults(func=cmd_wb_table)

    p_sweep = sub.add_parser("sweep", help="repeat a scenario over eps/mesh")
    common(p_sweep)
    p_sweep.add_argument("--meshes", type=_int_list,
                         help="mesh list for the sweep")
    p_sweep.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return int(args.func(args))
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
