"""Command-line front end.

``phrod simulate`` runs a built-in or file scenario and streams one CSV row
per accepted step, ``phrod study`` performs a time-step refinement study and
``phrod list-scenarios`` prints the built-in names.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from phrod import __version__
from phrod.constitutive import ConfigurationError
from phrod.integrator import StepFailure
from phrod.scenarios import (
    apply_overrides,
    builtin,
    builtin_names,
    dumps,
    read_scenario,
    run_scenario,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

WORKERS_ENV = "PHROD_WORKERS"
FAILURE_MARKER = "# FAILED"


# ----------------------------------------------------------------------
# CSV schema


def _triple(name):
    return [f"{name}_{i}" for i in (1, 2, 3)]


def record_columns(scenario):
    """Column names for a scenario; a pure function of its features."""
    cols = ["time", "total_energy", "external_work", "energy_increment", "power_balance"]
    if scenario.viscous:
        cols.append("dissipated_energy")
    cols += _triple("P") + _triple("L") + _triple("center_of_mass")
    cols += _triple("tip_position") + _triple("tip_velocity") + _triple("tip_velocity_local")
    cols += [f"mid_constraint_{i}" for i in range(1, 7)] + ["constraint_max"]
    cols += _triple("strain_gap_gamma") + _triple("strain_gap_kappa")
    cols += ["newton_iterations", "residual_norm"]
    cols += [f"tau_{k}" for k in range(1, len(scenario.actuators) + 1)]
    return cols


def record_values(rec, scenario):
    """Row values matching :func:`record_columns`."""
    vals = [rec.t, rec.H, rec.W_ext, rec.dH, rec.dE]
    if scenario.viscous:
        vals.append(rec.D)
    for arr in (rec.p, rec.l, rec.com, rec.tip_position, rec.tip_velocity,
                rec.tip_velocity_local, rec.g_mid):
        vals.extend(arr)
    vals.append(rec.g_max)
    vals.extend(rec.gamma_gap)
    vals.extend(rec.kappa_gap)
    vals += [rec.iterations, rec.residual_norm]
    vals.extend(rec.tau[:len(scenario.actuators)])
    return vals


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.16e" % float(v)


def scenario_digest(scenario):
    return hashlib.sha256(dumps(scenario).encode()).hexdigest()[:16]


class CsvWriter:
    """Streams records to a text handle, optionally restricted to some columns."""

    def __init__(self, fh, scenario, columns=None):
        self.fh = fh
        self.scenario = scenario
        all_cols = record_columns(scenario)
        if columns:
            unknown = [c for c in columns if c not in all_cols]
            if unknown:
                raise ConfigurationError(f"unknown column(s): {', '.join(unknown)}")
            self.index = [all_cols.index(c) for c in columns]
            self.columns = list(columns)
        else:
            self.index = list(range(len(all_cols)))
            self.columns = all_cols

    def header(self):
        sc = self.scenario
        st = sc.solver
        meta = [
            f"# phrod {__version__}",
            f"# scenario: {sc.name}",
            f"# scenario_sha256: {scenario_digest(sc)}",
            f"# h: {st.h!r}  t_end: {st.t_end!r}  eps_newton: {st.eps_newton!r}",
            f"# n_e: {sc.n_e}  p: {sc.p}",
        ]
        self.fh.write("\n".join(meta) + "\n")
        self.fh.write(",".join(self.columns) + "\n")

    def __call__(self, rec):
        vals = record_values(rec, self.scenario)
        self.fh.write(",".join(_fmt(vals[i]) for i in self.index) + "\n")

    def failure(self, exc):
        self.fh.write(f"{FAILURE_MARKER}: {exc}\n")
        self.fh.flush()


# ----------------------------------------------------------------------
# convergence study


@dataclass
class StudyResult:
    h: np.ndarray
    position_error: np.ndarray
    velocity_error: np.ndarray
    position_order: float
    velocity_order: float
    ref_h: float
    t_eval: float


def _check_grid(h, t_eval):
    n = t_eval / h
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ConfigurationError(f"t_eval={t_eval} is not a multiple of h={h}")


def _tip_state(scenario, h, t_eval, eps):
    _check_grid(h, t_eval)
    t_end = max(scenario.solver.t_end, t_eval)
    t_end = h * math.ceil(round(t_end / h, 9))
    settings = replace(scenario.solver, h=h, t_end=t_end, eps_newton=eps)
    recs = run_scenario(scenario, settings=settings, t_stop=t_eval)
    return recs[-1].tip_position, recs[-1].tip_velocity


def fitted_order(h, err):
    """Least-squares slope of ``log(err)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    err = np.asarray(err, dtype=float)
    keep = err > 0
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[keep]), np.log(err[keep]), 1)[0])


def convergence_study(scenario, h_list, ref_h=1e-3, t_eval=5.0, eps=1e-8, workers=None):
    """Relative tip errors against a fine-step reference and fitted orders."""
    h_all = [float(ref_h)] + [float(h) for h in h_list]
    for h in h_all:
        _check_grid(h, t_eval)
    workers = workers or int(os.environ.get(WORKERS_ENV, "1"))
    args = [(scenario, h, t_eval, eps) for h in h_all]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(_tip_state, *zip(*args)))
    else:
        out = [_tip_state(*a) for a in args]
    (x_ref, v_ref), rest = out[0], out[1:]
    ex = np.array([np.linalg.norm(x - x_ref) / np.linalg.norm(x_ref) for x, _ in rest])
    ev = np.array([np.linalg.norm(v - v_ref) / np.linalg.norm(v_ref) for _, v in rest])
    h = np.array(h_all[1:])
    return StudyResult(h, ex, ev, fitted_order(h, ex), fitted_order(h, ev), float(ref_h),
                       float(t_eval))


def write_study(fh, result, scenario):
    fh.write(f"# scenario: {scenario.name}\n")
    fh.write(f"# ref_h: {result.ref_h!r}  t_eval: {result.t_eval!r}\n")
    fh.write(f"# position_order: {result.position_order:.6f}\n")
    fh.write(f"# velocity_order: {result.velocity_order:.6f}\n")
    fh.write("h,position_error,velocity_error\n")
    for row in zip(result.h, result.position_error, result.velocity_error):
        fh.write(",".join(_fmt(v) for v in row) + "\n")


# ----------------------------------------------------------------------
# entry point


def load_scenario(source, overrides=()):
    """Built-in name or path to a scenario file, with overrides applied."""
    if source in builtin_names():
        sc = builtin(source)
    elif os.path.exists(source):
        sc = read_scenario(source)
    else:
        raise ConfigurationError(
            f"{source!r} is neither a built-in scenario nor a file; "
            f"built-ins: {', '.join(builtin_names())}"
        )
    return apply_overrides(sc, overrides) if overrides else sc


def _parser():
    ap = argparse.ArgumentParser(prog="phrod", description="Cosserat rod simulations.")
    ap.add_argument("--version", action="version", version=f"phrod {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", aliases=["run"], help="run one scenario")
    sim.add_argument("scenario", help="built-in name or scenario file")
    sim.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE")
    sim.add_argument("--out", default="-", help="CSV path (default: stdout)")
    sim.add_argument("--columns", nargs="+", help="subset of CSV columns")

    st = sub.add_parser("study", help="time-step convergence study")
    st.add_argument("scenario")
    st.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE")
    st.add_argument("--h-list", nargs="+", type=float, default=[0.5, 0.25, 0.1, 0.05, 0.02])
    st.add_argument("--ref-h", type=float, default=1e-3)
    st.add_argument("--t-eval", type=float, default=5.0)
    st.add_argument("--eps", type=float, default=1e-8)
    st.add_argument("--out", default="-")

    sub.add_parser("list-scenarios", help="print built-in scenario names")

    show = sub.add_parser("show", help="print a scenario as a TOML file")
    show.add_argument("scenario")
    show.add_argument("--override", "-o", action="append", default=[], metavar="KEY=VALUE")
    return ap


def _open(path):
    return sys.stdout if path == "-" else open(path, "w", encoding="utf-8", newline="\n")


def _simulate(args):
    sc = load_scenario(args.scenario, args.override)
    fh = _open(args.out)
    try:
        writer = CsvWriter(fh, sc, args.columns)
        writer.header()
        try:
            run_scenario(sc, callback=writer)
        except (StepFailure, FloatingPointError) as exc:
            writer.failure(exc)
            print(f"phrod: solver failure: {exc}", file=sys.stderr)
            return EXIT_SOLVER
    finally:
        if fh is not sys.stdout:
            fh.close()
        else:
            fh.flush()
    return EXIT_OK


def _study(args):
    sc = load_scenario(args.scenario, args.override)
    try:
        res = convergence_study(sc, args.h_list, args.ref_h, args.t_eval, args.eps)
    except (StepFailure, FloatingPointError) as exc:
        print(f"phrod: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    fh = _open(args.out)
    try:
        write_study(fh, res, sc)
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(f"position order {res.position_order:.4f}, velocity order {res.velocity_order:.4f}",
          file=sys.stderr)
    return EXIT_OK


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        if args.command in ("simulate", "run"):
            return _simulate(args)
        if args.command == "study":
            return _study(args)
        if args.command == "list-scenarios":
            for name in builtin_names():
                print(f"{name:36s} {builtin(name).description}")
            return EXIT_OK
        if args.command == "show":
            sys.stdout.write(dumps(load_scenario(args.scenario, args.override)))
            return EXIT_OK
    except (ConfigurationError, ValueError) as exc:
        print(f"phrod: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"phrod: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
