"""Command line scenario runner.

Subcommands mirror the scenario kinds: simulate, tpbvp, impulsive,
smooth, convergence.  Each takes --config <toml>, optional --out <dir>
(also overridable by the SE3OPT_OUT environment variable), --seed and
--no-figures, writes the trajectory CSV, a versioned JSON report and,
where applicable, an iteration-log JSON plus rendered figures, and exits
0 on convergence, 2 on solver failure, 1 on configuration errors.
"""

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import figures
from .dynamics import simulate
from .errors import (
    ConfigError,
    MaxIterationsError,
    NoConvergenceError,
    Se3OptError,
)
from .impulsive import (
    FullState,
    ImpulsiveProblem,
    solve_impulsive,
    solve_tpbvp,
    terminal_constraints,
)
from .linearize import boundary_error
from .liegroup import log_so3
from .reporting import (
    RunReport,
    trajectory_diagnostics,
    write_iteration_log_json,
    write_report_json,
    write_trajectory_csv,
)
from .scenarios import load_config
from .shooting import SmoothProblem, performance_index, solve_shooting

OUT_ENV_VAR = "SE3OPT_OUT"


def convergence_study(body, gravity, initial, t_final, h_values, orders=(2, 1)):
    """Terminal-state error against a fine reference for each step size.

    The reference is the second-order flow at one eighth of the smallest
    step.  Returns the error table and the least-squares fitted order per
    flow; a flow whose errors sit at round-off is flagged exact and gets
    no fit.
    """
    h_values = sorted(h_values, reverse=True)
    counts = [int(round(t_final / h)) for h in h_values]
    n_ref = 8 * max(counts)
    ref = simulate(body, gravity, t_final / n_ref, initial,
                   n_steps=n_ref, order=2).final_state()

    def terminal_error(traj):
        s = traj.final_state()
        return (
            float(np.linalg.norm(s.x - ref.x))
            + float(np.linalg.norm(s.gamma - ref.gamma))
            + float(np.linalg.norm(log_so3(s.R.T @ ref.R)))
            + float(np.linalg.norm(s.Pi - ref.Pi))
        )

    errors = {}
    fits = {}
    exact = {}
    for order in orders:
        errs = []
        for h, n in zip(h_values, counts):
            traj = simulate(body, gravity, t_final / n, initial,
                            n_steps=n, order=order)
            errs.append(terminal_error(traj))
        errors[order] = errs
        if max(errs) < 1e-12:
            exact[order] = True
            fits[order] = None
        else:
            exact[order] = False
            fits[order] = float(np.polyfit(np.log(h_values), np.log(errs), 1)[0])
    return {
        "h_values": list(h_values),
        "errors": errors,
        "fitted_order": fits,
        "exact": exact,
    }


def _resolve_out(cfg, cli_out):
    out = cli_out or os.environ.get(OUT_ENV_VAR) or cfg.out_dir
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _run_simulate(cfg, out, report):
    traj = simulate(cfg.body, cfg.gravity, cfg.h, cfg.initial,
                    n_steps=cfg.n_steps, order=cfg.order)
    write_trajectory_csv(out / "trajectory.csv", cfg.body, cfg.gravity, traj)
    report.artifacts["trajectory"] = "trajectory.csv"
    report.invariants = trajectory_diagnostics(cfg.body, cfg.gravity, traj)
    report.converged = True
    if cfg.figures:
        figures.trajectory_figure(traj, out / "fig_trajectory.png", cfg.label)
        from .dynamics import trajectory_invariants
        inv = trajectory_invariants(cfg.body, cfg.gravity, traj,
                                    stride=max(1, traj.n_steps // 2000))
        figures.invariants_figure(inv["t"], inv["energy"],
                                  inv["angular_momentum"],
                                  inv["rotation_defect"],
                                  out / "fig_invariants.png", cfg.label)
        report.artifacts["figures"] = ["fig_trajectory.png", "fig_invariants.png"]


def _run_tpbvp(cfg, out, report):
    prob = ImpulsiveProblem(cfg.body, cfg.gravity, cfg.initial,
                            cfg.n_steps, cfg.h, FullState(cfg.desired))
    sol = solve_tpbvp(prob, tol=min(1e-12, cfg.solver.eps_stop))
    traj = sol.trajectory
    write_trajectory_csv(out / "trajectory.csv", cfg.body, cfg.gravity, traj)
    report.artifacts["trajectory"] = "trajectory.csv"
    report.invariants = trajectory_diagnostics(cfg.body, cfg.gravity, traj)
    report.cost = sol.cost
    report.iterations = {"newton": sol.iterations}
    from .dynamics import RigidBodyState
    post = RigidBodyState(traj.R[-1], traj.x[-1],
                          cfg.desired.Pi, cfg.desired.gamma)
    report.constraint_violation = float(
        np.abs(boundary_error(post, cfg.desired)).max())
    report.converged = True
    if cfg.figures:
        figures.trajectory_figure(traj, out / "fig_trajectory.png", cfg.label)
        figures.velocities_figure(
            traj, cfg.body, out / "fig_velocities.png",
            pre_velocity=cfg.initial.gamma / cfg.body.m,
            post_velocity=cfg.desired.gamma / cfg.body.m,
            title=cfg.label,
        )
        report.artifacts["figures"] = ["fig_trajectory.png", "fig_velocities.png"]


def _run_impulsive(cfg, out, report):
    prob = ImpulsiveProblem(cfg.body, cfg.gravity, cfg.initial,
                            cfg.n_steps, cfg.h, cfg.relaxed)
    sol = solve_impulsive(prob)
    traj = sol.trajectory
    write_trajectory_csv(out / "trajectory.csv", cfg.body, cfg.gravity, traj)
    report.artifacts["trajectory"] = "trajectory.csv"
    report.invariants = trajectory_diagnostics(cfg.body, cfg.gravity, traj)
    report.cost = sol.cost
    report.iterations = {"sqp": sol.iterations}
    report.constraint_violation = float(np.abs(
        terminal_constraints(prob, sol.decision, trajectory=traj)).max())
    report.extra["stationarity"] = sol.stationarity
    report.converged = True
    if cfg.figures:
        figures.trajectory_figure(traj, out / "fig_trajectory.png", cfg.label)
        figures.velocities_figure(
            traj, cfg.body, out / "fig_velocities.png",
            pre_velocity=cfg.initial.gamma / cfg.body.m,
            post_velocity=sol.gamma_N_plus / cfg.body.m,
            title=cfg.label,
        )
        report.artifacts["figures"] = ["fig_trajectory.png", "fig_velocities.png"]


def _run_smooth(cfg, out, report):
    prob = SmoothProblem(cfg.body, cfg.gravity, cfg.initial, cfg.desired,
                         cfg.n_steps, cfg.h, cfg.W_f, cfg.W_m)
    try:
        sol = solve_shooting(prob, config=cfg.solver)
        ext, log = sol.extremal, sol.log
        report.converged = True
        report.iterations = {"outer": sol.outer_iterations,
                             "inner": sol.inner_iterations}
        report.extra["psi12_condition"] = sol.psi12_condition
    except MaxIterationsError as exc:
        if exc.best is None:
            raise
        ext, log = exc.best[2], exc.log
        report.converged = False
        report.extra["failure"] = str(exc)
    traj = ext.trajectory
    write_trajectory_csv(out / "trajectory.csv", cfg.body, cfg.gravity, traj)
    write_iteration_log_json(out / "iterations.json", log)
    report.artifacts["trajectory"] = "trajectory.csv"
    report.artifacts["iteration_log"] = "iterations.json"
    report.invariants = trajectory_diagnostics(cfg.body, cfg.gravity, traj)
    report.performance_index = performance_index(traj, cfg.W_f, cfg.W_m)
    err = boundary_error(traj.final_state(), cfg.desired)
    report.boundary_error_norm = float(np.linalg.norm(err))
    report.constraint_violation = float(np.abs(err).max())
    if cfg.figures:
        figures.trajectory_figure(traj, out / "fig_trajectory.png", cfg.label)
        figures.controls_figure(traj, out / "fig_controls.png", cfg.label)
        figures.convergence_figure(log, out / "fig_convergence.png", cfg.label)
        report.artifacts["figures"] = [
            "fig_trajectory.png", "fig_controls.png", "fig_convergence.png",
        ]


def _run_convergence(cfg, out, report):
    table = convergence_study(cfg.body, cfg.gravity, cfg.initial,
                              cfg.t_final, cfg.h_values)
    with open(out / "convergence_table.csv", "w") as fh:
        fh.write("h,error_order2,error_order1\n")
        for i, h in enumerate(table["h_values"]):
            fh.write(
                f"{h:.17g},{table['errors'][2][i]:.17g},"
                f"{table['errors'][1][i]:.17g}\n"
            )
    report.artifacts["table"] = "convergence_table.csv"
    report.extra["fitted_order"] = {
        str(k): v for k, v in table["fitted_order"].items()
    }
    report.extra["exact"] = {str(k): v for k, v in table["exact"].items()}
    report.converged = True
    for order in (2, 1):
        fit = table["fitted_order"][order]
        if table["exact"][order]:
            print(f"order-{order} flow: errors at round-off (exact)")
        else:
            print(f"order-{order} flow: fitted order {fit:.3f}")
    if cfg.figures:
        figures.order_figure(
            table["h_values"],
            {k: v for k, v in table["errors"].items()
             if not table["exact"][k]},
            table["fitted_order"],
            out / "fig_order.png",
            cfg.label,
        )
        report.artifacts["figures"] = ["fig_order.png"]


_RUNNERS = {
    "simulate": _run_simulate,
    "tpbvp": _run_tpbvp,
    "impulsive": _run_impulsive,
    "smooth": _run_smooth,
    "convergence": _run_convergence,
}


def run(config_path, kind=None, out_dir=None, seed=None, render_figures=None):
    """Execute a scenario config; returns the RunReport (artifacts on disk)."""
    cfg = load_config(config_path, kind=kind)
    if seed is not None:
        cfg.seed = int(seed)
        cfg.solver.seed = int(seed)
    if render_figures is not None:
        cfg.figures = bool(render_figures)
    out = _resolve_out(cfg, out_dir)
    report = RunReport(scenario=cfg.kind, label=cfg.label, converged=False,
                       seed=cfg.seed)
    t0 = time.perf_counter()
    try:
        _RUNNERS[cfg.kind](cfg, out, report)
    except (NoConvergenceError, MaxIterationsError) as exc:
        report.converged = False
        report.extra["failure"] = str(exc)
    report.wall_time_s = time.perf_counter() - t0
    report.artifacts["report"] = "report.json"
    write_report_json(out / "report.json", report)
    return report


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="se3opt",
        description="Structure-preserving rigid-body maneuvers on SE(3)",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, blurb in (
        ("simulate", "propagate an uncontrolled trajectory"),
        ("tpbvp", "impulsive transfer to a fully specified state"),
        ("impulsive", "optimal impulsive transfer to a relaxed orbit"),
        ("smooth", "minimum-effort controlled maneuver (shooting)"),
        ("convergence", "integrator order verification study"),
    ):
        p = sub.add_parser(name, help=blurb)
        p.add_argument("--config", required=True, help="scenario TOML file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the scenario seed")
        p.add_argument("--no-figures", action="store_true",
                       help="skip figure rendering")
    args = parser.parse_args(argv)

    try:
        report = run(
            args.config,
            kind=args.command,
            out_dir=args.out,
            seed=args.seed,
            render_figures=False if args.no_figures else None,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Se3OptError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    status = "converged" if report.converged else "did not converge"
    print(f"{report.scenario} '{report.label}': {status} "
          f"(wall time {report.wall_time_s:.2f} s)")
    if report.constraint_violation is not None:
        print(f"constraint violation (inf-norm): "
              f"{report.constraint_violation:.3e}")
    if report.performance_index is not None:
        print(f"performance index: {report.performance_index:.6f}")
    if report.cost is not None:
        print(f"impulse cost: {report.cost:.6f}")
    return 0 if report.converged else 2


if __name__ == "__main__":
    sys.exit(main())
