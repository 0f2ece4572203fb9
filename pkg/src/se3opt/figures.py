"""Figure rendering for scenario reports.

Figures are rendered next to the delimited output; the CSV remains the
data contract and every plotted quantity can be regenerated from it.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

FIG_DPI = 130


def _save(fig, path):
    fig.savefig(path, dpi=FIG_DPI, bbox_inches="tight")
    plt.close(fig)


def trajectory_figure(traj, path, title=""):
    """Orbit trace: 3D path plus its projection onto the reference plane."""
    fig = plt.figure(figsize=(9, 4))
    ax3 = fig.add_subplot(1, 2, 1, projection="3d")
    ax3.plot(traj.x[:, 0], traj.x[:, 1], traj.x[:, 2], lw=0.8)
    ax3.scatter([0], [0], [0], color="k", s=12)
    ax3.scatter(*traj.x[0], color="g", s=14, label="start")
    ax3.scatter(*traj.x[-1], color="r", s=14, label="end")
    ax3.set_xlabel("x1")
    ax3.set_ylabel("x2")
    ax3.set_zlabel("x3")
    ax3.legend(fontsize=7)
    ax2 = fig.add_subplot(1, 2, 2)
    ax2.plot(traj.x[:, 0], traj.x[:, 1], lw=0.8)
    ax2.scatter([0], [0], color="k", s=12)
    ax2.set_aspect("equal", adjustable="datalim")
    ax2.set_xlabel("x1")
    ax2.set_ylabel("x2")
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def invariants_figure(times, energy, angmom, rot_defect, path, title=""):
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    axes[0].plot(times, energy - energy[0], lw=0.7)
    axes[0].set_ylabel("energy drift")
    axes[1].plot(times, np.linalg.norm(angmom - angmom[0], axis=1), lw=0.7)
    axes[1].set_ylabel("|ang. mom. drift|")
    axes[2].semilogy(times, np.maximum(rot_defect, 1e-18), lw=0.7)
    axes[2].set_ylabel("||R'R - I||")
    axes[2].set_xlabel("t")
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def controls_figure(traj, path, title=""):
    t = traj.times
    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    for i, lbl in enumerate(("uf1", "uf2", "uf3")):
        axes[0].plot(t, traj.uf[:, i], lw=0.8, label=lbl)
    axes[0].set_ylabel("control force")
    axes[0].legend(fontsize=7)
    for i, lbl in enumerate(("um1", "um2", "um3")):
        axes[1].plot(t, traj.um[:, i], lw=0.8, label=lbl)
    axes[1].set_ylabel("control moment")
    axes[1].set_xlabel("t")
    axes[1].legend(fontsize=7)
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def convergence_figure(log, path, title=""):
    """Boundary error per trial, outer-iteration acceptances circled."""
    errors = []
    accepted_idx = []
    accepted_err = []
    last_outer = None
    for r in log.records:
        errors.append(r.error if np.isfinite(r.error) else np.nan)
        if last_outer is None or r.outer_index != last_outer:
            accepted_idx.append(len(errors) - 1)
            accepted_err.append(errors[-1])
            last_outer = r.outer_index
        else:
            accepted_idx[-1] = len(errors) - 1
            accepted_err[-1] = errors[-1]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(range(len(errors)), errors, ".-", lw=0.7, ms=3)
    ax.semilogy(accepted_idx, accepted_err, "o", color="red", mfc="none",
                ms=7, label="outer iteration")
    ax.set_xlabel("iteration")
    ax.set_ylabel("terminal boundary error")
    ax.legend(fontsize=8)
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def velocities_figure(traj, body, path, pre_velocity=None, post_velocity=None,
                      title=""):
    """Velocity components along a coast; impulse endpoints circled red."""
    t = traj.times
    v = traj.gamma / body.m
    fig, ax = plt.subplots(figsize=(7, 4))
    for i, lbl in enumerate(("v1", "v2", "v3")):
        ax.plot(t, v[:, i], lw=0.8, label=lbl)
    if pre_velocity is not None:
        ax.plot([t[0]] * 3, pre_velocity, "o", color="red", mfc="none", ms=7)
    if post_velocity is not None:
        ax.plot([t[-1]] * 3, post_velocity, "o", color="red", mfc="none", ms=7)
    ax.set_xlabel("t")
    ax.set_ylabel("velocity")
    ax.legend(fontsize=7)
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)


def order_figure(h_values, errors_by_order, fits, path, title=""):
    fig, ax = plt.subplots(figsize=(6, 4))
    for order, errs in errors_by_order.items():
        label = f"order-{order} flow (fit {fits[order]:.2f})"
        ax.loglog(h_values, errs, "o-", lw=0.8, ms=4, label=label)
    ax.set_xlabel("step size h")
    ax.set_ylabel("terminal state error")
    ax.legend(fontsize=8)
    ax.grid(True, which="both", lw=0.3, alpha=0.5)
    if title:
        fig.suptitle(title, fontsize=10)
    _save(fig, path)
