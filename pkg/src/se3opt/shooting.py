"""Smooth optimal control on SE(3) by the neighboring extremal method.

The discrete necessary conditions couple the first-order flow with a
multiplier recursion and feedback controls

    uf_{k+1} = -W_f^{-1} lam_k[dgamma],   um_{k+1} = -W_m^{-1} lam_k[dPi],
    lam_k    = A_{k+1}^T lam_{k+1},

so a guessed initial multiplier lam_0 determines the whole extremal.  The
shooting loop updates lam_0 along D = Psi12^{-1} with an Armijo
backtracking line search until the terminal boundary error is below the
stopping tolerance.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import (
    ControlSample,
    RigidBodyState,
    Trajectory,
    step1,
)
from .errors import (
    MaxIterationsError,
    NoConvergenceError,
    SingularJacobianError,
    StepTooLargeError,
)
from .linearize import (
    DGAMMA,
    DPI,
    ZETA,
    boundary_error,
    check_spd,
    propagate_psi,
    step_jacobian,
)


@dataclass
class SmoothProblem:
    """Fixed-endpoint minimum-control-effort maneuver over N steps."""

    body: object
    gravity: object
    initial: RigidBodyState
    desired: RigidBodyState
    n_steps: int
    h: float
    W_f: np.ndarray
    W_m: np.ndarray

    def __post_init__(self):
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")
        if not (self.h > 0.0 and math.isfinite(self.h)):
            raise ValueError(f"step size must be finite and > 0, got {self.h}")
        self.W_f = check_spd(self.W_f, "W_f")
        self.W_m = check_spd(self.W_m, "W_m")


@dataclass
class SolverConfig:
    """Newton-Armijo settings: stopping tolerance, sufficient-decrease
    scale, backtracking divisor and iteration limits."""

    eps_stop: float = 1e-10
    alpha: float = 1e-4
    backtrack: float = 10.0
    max_outer: int = 100
    max_inner: int = 25
    cond_limit: float = 1e12
    seed: int = 0
    guess_scale: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.alpha < 0.5):
            raise ValueError(f"alpha must be in (0, 1/2), got {self.alpha}")
        if self.backtrack <= 1.0:
            raise ValueError(f"backtrack divisor must exceed 1, got {self.backtrack}")


@dataclass
class ExtremalTrajectory:
    """States 0..N, multipliers lam_0..lam_{N-1} and controls u_1..u_N.

    The cached one-step Jacobians A_0..A_{N-1} along the trajectory feed
    the sensitivity assembly without recomputation.
    """

    trajectory: Trajectory
    multipliers: np.ndarray        # (N, 12)
    step_jacobians: np.ndarray     # (N, 12, 12)
    diagnostics: dict = field(default_factory=dict)

    def final_state(self):
        return self.trajectory.final_state()


@dataclass
class IterationRecord:
    outer_index: int
    inner_index: int
    c: float
    error: float


@dataclass
class IterationLog:
    """Per-trial shooting history; outer entries are the accepted trials."""

    records: list = field(default_factory=list)

    def append(self, outer_index, inner_index, c, error):
        self.records.append(IterationRecord(outer_index, inner_index, c, error))

    def accepted_errors(self):
        """Boundary error after each accepted outer iteration (index 0 is
        the initial guess)."""
        out = []
        last_outer = None
        for r in self.records:
            if last_outer is None or r.outer_index != last_outer:
                out.append(r.error)
                last_outer = r.outer_index
            else:
                out[-1] = r.error
        return np.array(out)

    def to_json_obj(self):
        return [
            {
                "outer_index": r.outer_index,
                "inner_index": r.inner_index,
                "c": r.c,
                "error": r.error if math.isfinite(r.error) else None,
            }
            for r in self.records
        ]

    def dumps(self):
        return json.dumps(self.to_json_obj(), indent=1)


@dataclass
class ShootingSolution:
    extremal: ExtremalTrajectory
    log: IterationLog
    boundary_error: np.ndarray
    error_norm: float
    outer_iterations: int
    inner_iterations: int
    psi12_condition: float


def default_multiplier_guess(prob=None, config=None):
    """Small random initial multiplier with a reproducible seed.

    The rotational blocks are scaled by the inertia magnitude: the
    multipliers conjugate to (zeta, dPi) live on the torque/angular
    momentum scale, and an unscaled perturbation of a small body drives
    the extremal outside the solvable step range.
    """
    config = config or SolverConfig()
    rng = np.random.default_rng(config.seed)
    raw = config.guess_scale * rng.uniform(-1.0, 1.0, 12)
    if prob is not None:
        jscale = float(np.abs(prob.body.J).max())
        raw[ZETA] *= jscale
        raw[DPI] *= jscale
    return raw


def propagate_extremal(prob, lam0):
    """March the necessary conditions forward from an initial multiplier.

    The multiplier update inverts A_{k+1}^T (one refinement pass keeps the
    recursion residual at round-off); the step Jacobian at index k+1 is
    available as soon as state_{k+1} is, because the configuration flow of
    the first-order step does not involve the arrival-index control.
    """
    lam0 = np.asarray(lam0, dtype=float)
    if lam0.shape != (12,) or not np.all(np.isfinite(lam0)):
        raise ValueError("lam0 must be a finite 12-vector")
    body, gravity, h, n = prob.body, prob.gravity, prob.h, prob.n_steps
    Wf_inv = np.linalg.inv(prob.W_f)
    Wm_inv = np.linalg.inv(prob.W_m)

    states = [prob.initial]
    lams = np.empty((n, 12))
    lams[0] = lam0
    A_all = np.empty((n, 12, 12))
    A_all[0] = step_jacobian(body, gravity, h, prob.initial, order=1)
    uf = np.zeros((n + 1, 3))
    um = np.zeros((n + 1, 3))

    state = prob.initial
    lam = lam0
    for k in range(n):
        uf[k + 1] = -Wf_inv @ lam[DGAMMA]
        um[k + 1] = -Wm_inv @ lam[DPI]
        state = step1(body, gravity, h, state,
                      ControlSample(uf[k + 1], um[k + 1]))
        states.append(state)
        if k < n - 1:
            A = step_jacobian(body, gravity, h, state, order=1)
            A_all[k + 1] = A
            try:
                nxt = np.linalg.solve(A.T, lam)
                # one refinement pass against the exact recursion
                nxt += np.linalg.solve(A.T, lam - A.T @ nxt)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobianError(
                    f"A^T singular at step {k + 1}"
                ) from exc
            lam = nxt
            lams[k + 1] = lam

    traj = Trajectory(
        h=h,
        order=1,
        R=np.array([s.R for s in states]),
        x=np.array([s.x for s in states]),
        Pi=np.array([s.Pi for s in states]),
        gamma=np.array([s.gamma for s in states]),
        uf=uf,
        um=um,
    )
    return ExtremalTrajectory(
        trajectory=traj, multipliers=lams, step_jacobians=A_all
    )


def extremal_residuals(prob, ext):
    """Max pointwise residuals of the necessary conditions.

    Returns a dict keyed by equation group; every entry of a returned
    extremal should sit at round-off regardless of boundary convergence.
    """
    body, h, n = prob.body, prob.h, prob.n_steps
    tr = ext.trajectory
    m = body.m
    Wf_inv = np.linalg.inv(prob.W_f)
    Wm_inv = np.linalg.inv(prob.W_m)
    from .dynamics import force_moment

    r_pos = r_mom = r_rot = r_att = r_ctrl = r_lam = 0.0
    for k in range(n):
        lam = ext.multipliers[k]
        r_pos = max(r_pos, np.abs(
            tr.x[k + 1] - tr.x[k] - (h / m) * tr.gamma[k]).max())
        f1, M1 = force_moment(body, prob.gravity, tr.R[k + 1], tr.x[k + 1])
        r_mom = max(r_mom, np.abs(
            tr.gamma[k + 1] - tr.gamma[k] - h * f1 - h * tr.uf[k + 1]).max())
        F = tr.R[k].T @ tr.R[k + 1]
        lhs = F @ body.J_d - body.J_d @ F.T
        rhs = np.array([
            [0.0, -tr.Pi[k][2], tr.Pi[k][1]],
            [tr.Pi[k][2], 0.0, -tr.Pi[k][0]],
            [-tr.Pi[k][1], tr.Pi[k][0], 0.0],
        ]) * h
        r_rot = max(r_rot, np.abs(lhs - rhs).max())
        r_att = max(r_att, np.abs(
            tr.Pi[k + 1] - F.T @ tr.Pi[k] - h * M1 - h * tr.um[k + 1]).max())
        r_ctrl = max(r_ctrl, np.abs(
            tr.uf[k + 1] + Wf_inv @ lam[DGAMMA]).max())
        r_ctrl = max(r_ctrl, np.abs(
            tr.um[k + 1] + Wm_inv @ lam[DPI]).max())
        if k < n - 1:
            r_lam = max(r_lam, np.abs(
                lam - ext.step_jacobians[k + 1].T @ ext.multipliers[k + 1]
            ).max())
    return {
        "position": r_pos,
        "linear_momentum": r_mom,
        "relative_rotation": r_rot,
        "angular_momentum": r_att,
        "control": r_ctrl,
        "multiplier": r_lam,
    }


def performance_index(traj, W_f, W_m):
    """Accumulated weighted quadratic control effort h/2 u^T W u."""
    uf = traj.uf[1:]
    um = traj.um[1:]
    W_f = np.asarray(W_f, dtype=float)
    W_m = np.asarray(W_m, dtype=float)
    return 0.5 * traj.h * float(
        np.einsum("ki,ij,kj->", uf, W_f, uf)
        + np.einsum("ki,ij,kj->", um, W_m, um)
    )


def solve_shooting(prob, lam0=None, config=None):
    """Newton-Armijo iteration on the unspecified initial multiplier.

    Outer iterations recompute the sensitivity Psi12 of the terminal
    boundary error; inner iterations backtrack the step scale c until the
    sufficient-decrease test Error_t <= (1 - 2 alpha c) Error passes.
    Raises MaxIterationsError (carrying the best iterate and the log) if
    either loop hits its limit, and SingularJacobianError only if the
    least-squares fallback for an ill-conditioned Psi12 also fails.

    Returns a ShootingSolution; the iteration log serializes one record
    per trial so convergence plots can mark outer iterations.
    """
    config = config or SolverConfig()
    if lam0 is None:
        lam0 = default_multiplier_guess(prob, config)
    lam0 = np.asarray(lam0, dtype=float)

    log = IterationLog()
    ext = None
    for shrink in range(4):
        try:
            ext = propagate_extremal(prob, lam0)
            break
        except (NoConvergenceError, StepTooLargeError):
            # guess drives the extremal outside the solvable range
            if shrink == 3:
                raise
            lam0 = 0.1 * lam0
    zN = boundary_error(ext.final_state(), prob.desired)
    err = float(np.linalg.norm(zN))
    log.append(0, 0, 0.0, err)
    best = (err, lam0, ext)
    cond = 0.0
    outer = 0
    inner_total = 0

    while err > config.eps_stop:
        outer += 1
        if outer > config.max_outer:
            raise MaxIterationsError(
                f"no convergence in {config.max_outer} outer iterations "
                f"(best error {best[0]:.3e})",
                best=best, log=log,
            )
        tm = propagate_psi(
            prob.body, prob.gravity, prob.h,
            [ext.trajectory.state(k) for k in range(prob.n_steps + 1)],
            ext.multipliers, prob.W_f, prob.W_m,
        )
        psi12 = tm.psi12
        cond = float(np.linalg.cond(psi12))
        if not math.isfinite(cond) or cond > config.cond_limit:
            # ill-conditioned sensitivity: fall back to least squares
            step = np.linalg.lstsq(psi12, zN, rcond=None)[0]
        else:
            try:
                step = np.linalg.solve(psi12, zN)
            except np.linalg.LinAlgError as exc:
                raise SingularJacobianError(
                    f"Psi12 singular (cond {cond:.3e})", cond=cond
                ) from exc
        c = 1.0
        err_t = math.inf
        inner = 0
        lam_t, ext_t, zN_t = lam0, ext, zN
        while err_t > (1.0 - 2.0 * config.alpha * c) * err:
            inner += 1
            inner_total += 1
            if inner > config.max_inner:
                raise MaxIterationsError(
                    f"line search stalled at outer iteration {outer} "
                    f"(best error {best[0]:.3e})",
                    best=best, log=log,
                )
            lam_t = lam0 + c * step
            try:
                ext_t = propagate_extremal(prob, lam_t)
                zN_t = boundary_error(ext_t.final_state(), prob.desired)
                err_t = float(np.linalg.norm(zN_t))
            except Exception:
                err_t = math.inf
            log.append(outer, inner, c, err_t)
            c /= config.backtrack
        lam0, ext, zN, err = lam_t, ext_t, zN_t, err_t
        if err < best[0]:
            best = (err, lam0, ext)

    ext.diagnostics["boundary_error_norm"] = err
    return ShootingSolution(
        extremal=ext,
        log=log,
        boundary_error=zN,
        error_norm=err,
        outer_iterations=outer,
        inner_iterations=inner_total,
        psi12_condition=cond,
    )
