"""Command-line entry points: single runs and parameter-plane sweeps.

`telespin run <config>` writes trace.csv / summary.csv (and trace.png);
`telespin sweep <config>` writes grid.csv / heatmap.pgm (and heatmap.png,
sweep.log).  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.  All state flows through the config file and flags; there are no
environment-variable overrides.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .bath import CorrelationTable, DecayFit, compute_correlations, decay_time
from .config import RunConfig, SweepConfig, apply_axis, parse_config, resolve_step
from .dynamics import (
    AveragedState,
    BlochState,
    Evolution,
    SolverConfig,
    solve_averaged,
)
from .errors import ConfigError, NumericalError, StabilityError
from .nonmarkov import BlpResult, DistinguishabilityTrace, blp_measure, optimal_initial_pair

log = logging.getLogger("telespin")

_NAN_GRAY = 128  # PGM level for failed sweep cells


@dataclass
class TrajectoryRecord:
    """Everything run_single knows about one method's evolution."""

    method: str
    evolution: Evolution
    distinguishability: np.ndarray
    blp: BlpResult
    decay: DecayFit


def _fmt(x: float) -> str:
    return repr(float(x))


def _solver_config(run: RunConfig, method: str) -> SolverConfig:
    step = resolve_step(run)
    return SolverConfig(
        horizon=run.solver.horizon,
        step=step,
        method=method,
        averaging=run.solver.averaging,
        n_traj=run.solver.trajectories,
        seed=run.solver.seed,
        batch=run.solver.batch,
    )


def _bath_table(run: RunConfig, step: float) -> CorrelationTable:
    n = int(round(run.solver.horizon / step))
    return compute_correlations(run.bath, run.solver.horizon, n)


def evolve_method(run: RunConfig, method: str,
                  bath: CorrelationTable | None = None,
                  decay: DecayFit | None = None) -> TrajectoryRecord:
    """Evolve the first optimal initial state and derive D(t) and the measure.

    The second member of the optimal pair is the coherence mirror of the
    first (the coherence block is linear and homogeneous, the population
    block is shared), so D(t) = sqrt(Px^2 + Py^2) of the single run.
    """
    cfg = _solver_config(run, method)
    if bath is None:
        bath = _bath_table(run, cfg.step)
    rho1, _ = optimal_initial_pair()
    ev = solve_averaged(bath, run.system, run.noise, cfg, AveragedState.from_bloch(rho1))
    d = np.hypot(ev.states[:, 0], ev.states[:, 1])
    blp = blp_measure(DistinguishabilityTrace(times=ev.times, d=d))
    if decay is None:
        decay = decay_time(run.bath)
    return TrajectoryRecord(method=method, evolution=ev, distinguishability=d,
                            blp=blp, decay=decay)


def _write_trace_csv(path: str, records: list[TrajectoryRecord]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,t,Px,Py,Pz,ax,ay,az,D\n")
        for rec in records:
            ev = rec.evolution
            for k, t in enumerate(ev.times):
                row = [rec.method, _fmt(t)]
                row.extend(_fmt(v) for v in ev.states[k])
                row.append(_fmt(rec.distinguishability[k]))
                fh.write(",".join(row) + "\n")


def _intervals_str(blp: BlpResult) -> str:
    return ";".join(f"{_fmt(a)}:{_fmt(b)}" for a, b in blp.growth_intervals)


def _write_summary_csv(path: str, records: list[TrajectoryRecord],
                       outputs: tuple[str, ...]):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("method,N,tau_d,growth_intervals\n")
        for rec in records:
            n_val = _fmt(rec.blp.measure) if "blp" in outputs else ""
            tau = _fmt(rec.decay.tau_d) if "tau_d" in outputs else ""
            ivals = _intervals_str(rec.blp) if "blp" in outputs else ""
            fh.write(f"{rec.method},{n_val},{tau},{ivals}\n")


def run_single(run: RunConfig, outdir: str, plot: bool = True) -> dict[str, str]:
    """Execute one configuration; returns the mapping of written files."""
    os.makedirs(outdir, exist_ok=True)
    step = resolve_step(run)
    bath = _bath_table(run, step)
    decay = decay_time(run.bath) if "tau_d" in run.outputs else DecayFit(
        tau_d=float("nan"), model=None, decayed=False, oscillatory=False)
    records = [evolve_method(run, method, bath, decay) for method in run.solver.methods]

    written: dict[str, str] = {}
    if "trace" in run.outputs:
        path = os.path.join(outdir, "trace.csv")
        _write_trace_csv(path, records)
        written["trace"] = path
    if "blp" in run.outputs or "tau_d" in run.outputs:
        path = os.path.join(outdir, "summary.csv")
        _write_summary_csv(path, records, run.outputs)
        written["summary"] = path
    if plot and "trace" in run.outputs:
        from .plots import render_trace

        path = os.path.join(outdir, "trace.png")
        render_trace(path, {
            rec.method: (rec.evolution.times, rec.evolution.states,
                         rec.distinguishability)
            for rec in records
        })
        written["plot"] = path
    return written


# --------------------------------------------------------------------------
# sweeps
# --------------------------------------------------------------------------


def _cell_seed(master: int, index: int) -> int:
    return int(np.random.SeedSequence([master, index]).generate_state(1)[0])


def sweep_cell(args) -> tuple[int, float, float, str]:
    """Evaluate one sweep cell; returns (index, value, horizon_sensitivity,
    error message or "")."""
    index, cfg, quantity, master_seed = args
    try:
        if quantity == "tau_d":
            fit = decay_time(cfg.bath)
            return index, math.log10(fit.tau_d), 0.0, ""
        method = "nz" if quantity == "N_nz" else "tcl"
        step = resolve_step(cfg)
        solver = SolverConfig(
            horizon=cfg.solver.horizon, step=step, method=method,
            averaging=cfg.solver.averaging, n_traj=cfg.solver.trajectories,
            seed=_cell_seed(master_seed, index), batch=cfg.solver.batch,
        )
        bath = compute_correlations(cfg.bath, solver.horizon, solver.n_steps)
        rho1, rho2 = optimal_initial_pair()
        delta0 = BlochState(rho1.px - rho2.px, rho1.py - rho2.py, rho1.pz - rho2.pz)
        ev = solve_averaged(bath, cfg.system, cfg.noise, solver,
                            AveragedState.from_bloch(delta0), homogeneous=True)
        d = ev.half_bloch_norm()
        full = blp_measure(DistinguishabilityTrace(ev.times, d)).measure
        cut = int(0.9 * len(d))
        early = blp_measure(DistinguishabilityTrace(ev.times[:cut], d[:cut])).measure
        return index, full, abs(full - early), ""
    except Exception as exc:  # cell failures are recorded, not fatal
        return index, float("nan"), 0.0, f"{type(exc).__name__}: {exc}"


def _write_grid_csv(path: str, a1: np.ndarray, a2: np.ndarray, axis1: str,
                    axis2: str, values: np.ndarray):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{axis1},{axis2},value\n")
        for i, v1 in enumerate(a1):
            for j, v2 in enumerate(a2):
                fh.write(f"{_fmt(v1)},{_fmt(v2)},{_fmt(values[i, j])}\n")


def _write_pgm(path: str, values: np.ndarray):
    """Plain (P2) graymap; rows follow axis1 order, columns axis2 order."""
    finite = values[np.isfinite(values)]
    lo = finite.min() if len(finite) else 0.0
    span = (finite.max() - lo) if len(finite) else 0.0
    with np.errstate(invalid="ignore"):
        pix = np.zeros(values.shape, dtype=int) if span == 0.0 else np.clip(
            np.round(255.0 * (values - lo) / span), 0, 255
        )
    pix = np.where(np.isfinite(values), pix, _NAN_GRAY).astype(int)
    lines = [f"P2\n{values.shape[1]} {values.shape[0]}\n255\n"]
    for row in pix:
        lines.append(" ".join(str(int(v)) for v in row) + "\n")
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(lines)


def run_sweep(cfg: SweepConfig, workers: int, outdir: str,
              master_seed: int | None = None, plot: bool = True) -> dict[str, str]:
    """Evaluate the grid (row-major over axis1 x axis2) and write outputs.

    Cells run as independent tasks; results are gathered by cell index so
    the output is identical for any worker count.  Failed cells become NaN
    (mid-gray pixels) and are listed in failed_cells.csv.
    """
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    os.makedirs(outdir, exist_ok=True)
    seed = cfg.fixed.solver.seed if master_seed is None else master_seed
    a1, a2 = cfg.axis1.values(), cfg.axis2.values()
    tasks = []
    for i, v1 in enumerate(a1):
        for j, v2 in enumerate(a2):
            cell = apply_axis(apply_axis(cfg.fixed, cfg.axis1.name, v1),
                              cfg.axis2.name, v2)
            tasks.append((i * len(a2) + j, cell, cfg.quantity, seed))

    results = [None] * len(tasks)
    if workers == 1:
        for task in tasks:
            results[task[0]] = sweep_cell(task)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for res in pool.map(sweep_cell, tasks, chunksize=1):
                results[res[0]] = res

    values = np.empty((len(a1), len(a2)))
    failures = []
    sens = []
    for index, value, sensitivity, err in results:
        i, j = divmod(index, len(a2))
        values[i, j] = value
        sens.append(sensitivity)
        if err:
            failures.append((i, j, err))
            log.warning("cell (%s=%.6g, %s=%.6g) failed: %s",
                        cfg.axis1.name, a1[i], cfg.axis2.name, a2[j], err)

    written: dict[str, str] = {}
    grid_path = os.path.join(outdir, "grid.csv")
    _write_grid_csv(grid_path, a1, a2, cfg.axis1.name, cfg.axis2.name, values)
    written["grid"] = grid_path
    pgm_path = os.path.join(outdir, "heatmap.pgm")
    _write_pgm(pgm_path, values)
    written["heatmap"] = pgm_path

    log_path = os.path.join(outdir, "sweep.log")
    with open(log_path, "w", encoding="utf-8") as fh:
        fh.write(f"quantity={cfg.quantity} horizon={cfg.fixed.solver.horizon} "
                 f"cells={len(tasks)} failed={len(failures)}\n")
        if cfg.quantity != "tau_d":
            fh.write("max measure change when the horizon is cut to 90%: "
                     f"{max(sens):.6g}\n")
        for i, j, err in failures:
            fh.write(f"FAILED {cfg.axis1.name}={a1[i]!r} {cfg.axis2.name}={a2[j]!r}: "
                     f"{err}\n")
    written["log"] = log_path

    if failures:
        fc_path = os.path.join(outdir, "failed_cells.csv")
        with open(fc_path, "w", encoding="utf-8") as fh:
            fh.write(f"{cfg.axis1.name},{cfg.axis2.name},error\n")
            for i, j, err in failures:
                fh.write(f"{_fmt(a1[i])},{_fmt(a2[j])},\"{err}\"\n")
        written["failed_cells"] = fc_path

    if plot:
        from .plots import render_heatmap

        png_path = os.path.join(outdir, "heatmap.png")
        title = {"N_nz": "BLP measure (NZ)", "N_tcl": "BLP measure (TCL)",
                 "tau_d": "log10 decay time"}[cfg.quantity]
        render_heatmap(png_path, values, a1, a2, cfg.axis1.name, cfg.axis2.name, title)
        written["plot"] = png_path
    return written


# --------------------------------------------------------------------------
# entry point
# --------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="telespin",
                                     description="Telegraph-driven dissipative "
                                                 "two-state dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single configuration run")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--no-plot", action="store_true")

    p_sweep = sub.add_parser("sweep", help="two-axis parameter sweep")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--workers", type=int, default=1)
    p_sweep.add_argument("--seed", type=int, default=None,
                         help="override the master seed from the config")
    p_sweep.add_argument("--out", default=".", help="output directory")
    p_sweep.add_argument("--no-plot", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        if args.command == "run":
            if isinstance(cfg, SweepConfig):
                raise ConfigError("config contains a [sweep] section; use 'telespin sweep'")
            written = run_single(cfg, args.out, plot=not args.no_plot)
        else:
            if not isinstance(cfg, SweepConfig):
                raise ConfigError("config has no [sweep] section; use 'telespin run'")
            written = run_sweep(cfg, args.workers, args.out,
                                master_seed=args.seed, plot=not args.no_plot)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, StabilityError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    for kind, path in written.items():
        print(f"{kind}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
