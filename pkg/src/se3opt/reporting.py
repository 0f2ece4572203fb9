"""Delimited trajectory output, run reports and their JSON forms.

The CSV is the data contract: one row per step with full-precision
(17 significant digit) values, the rotation matrix stored whole rather
than in any chart.  Reports are recomputed from the output trajectory,
never copied from solver internals, and serialize deterministically
(wall time is printed, not serialized, so reruns are byte-identical).
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Trajectory, trajectory_invariants

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    ["k", "t"]
    + [f"x{i}" for i in (1, 2, 3)]
    + [f"gamma{i}" for i in (1, 2, 3)]
    + [f"R{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"Pi{i}" for i in (1, 2, 3)]
    + [f"uf{i}" for i in (1, 2, 3)]
    + [f"um{i}" for i in (1, 2, 3)]
    + ["energy"]
    + [f"angmom{i}" for i in (1, 2, 3)]
)


def _fmt(v):
    return format(float(v), ".17g")


def write_trajectory_csv(path, body, gravity, traj):
    """One row per trajectory index, energy and momentum recomputed."""
    inv = trajectory_invariants(body, gravity, traj, stride=1)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(CSV_COLUMNS) + "\n")
        for k in range(traj.x.shape[0]):
            row = (
                [str(k), _fmt(k * traj.h)]
                + [_fmt(v) for v in traj.x[k]]
                + [_fmt(v) for v in traj.gamma[k]]
                + [_fmt(v) for v in traj.R[k].reshape(-1)]
                + [_fmt(v) for v in traj.Pi[k]]
                + [_fmt(v) for v in traj.uf[k]]
                + [_fmt(v) for v in traj.um[k]]
                + [_fmt(inv["energy"][k])]
                + [_fmt(v) for v in inv["angular_momentum"][k]]
            )
            fh.write(",".join(row) + "\n")


def read_trajectory_csv(path):
    """Columns of a trajectory CSV as a dict of float arrays."""
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size == 0:
        raise ValueError(f"empty trajectory file {path}")
    return {name: data[:, i] for i, name in enumerate(header)}


def trajectory_from_csv(path, h=None, order=2):
    """Rebuild a Trajectory from its CSV (for round-trip verification)."""
    cols = read_trajectory_csv(path)
    n = len(cols["k"])
    R = np.stack(
        [cols[f"R{i}{j}"] for i in (1, 2, 3) for j in (1, 2, 3)], axis=1
    ).reshape(n, 3, 3)
    if h is None:
        h = float(cols["t"][1] - cols["t"][0]) if n > 1 else 1.0
    return Trajectory(
        h=h,
        order=order,
        R=R,
        x=np.stack([cols[f"x{i}"] for i in (1, 2, 3)], axis=1),
        Pi=np.stack([cols[f"Pi{i}"] for i in (1, 2, 3)], axis=1),
        gamma=np.stack([cols[f"gamma{i}"] for i in (1, 2, 3)], axis=1),
        uf=np.stack([cols[f"uf{i}"] for i in (1, 2, 3)], axis=1),
        um=np.stack([cols[f"um{i}"] for i in (1, 2, 3)], axis=1),
    )


@dataclass
class RunReport:
    """Quantities of record for one scenario run.

    ``wall_time_s`` is intentionally excluded from the JSON form: reports
    must be byte-identical across reruns with the same config and seed.
    """

    scenario: str
    label: str
    converged: bool
    seed: int
    iterations: dict = field(default_factory=dict)
    performance_index: float = None
    cost: float = None
    constraint_violation: float = None
    boundary_error_norm: float = None
    invariants: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    wall_time_s: float = None
    schema: int = SCHEMA_VERSION

    def to_json_obj(self):
        obj = {
            "schema": self.schema,
            "scenario": self.scenario,
            "label": self.label,
            "converged": self.converged,
            "seed": self.seed,
            "iterations": self.iterations,
            "invariants": self.invariants,
            "artifacts": self.artifacts,
        }
        for name in ("performance_index", "cost", "constraint_violation",
                     "boundary_error_norm"):
            value = getattr(self, name)
            if value is not None:
                obj[name] = value
        if self.extra:
            obj["extra"] = self.extra
        return obj

    def dumps(self):
        return json.dumps(self.to_json_obj(), indent=2, sort_keys=True)


def trajectory_diagnostics(body, gravity, traj, stride=1):
    """Invariant drift summary recomputed from a trajectory."""
    inv = trajectory_invariants(body, gravity, traj, stride=stride)
    dE = inv["energy"] - inv["energy"][0]
    dL = inv["angular_momentum"] - inv["angular_momentum"][0]
    return {
        "energy_drift_max": float(np.abs(dE).max()),
        "rotation_defect_max": float(inv["rotation_defect"].max()),
        "angular_momentum_drift_max": float(np.abs(dL).max()),
    }


def write_report_json(path, report):
    with open(path, "w") as fh:
        fh.write(report.dumps())
        fh.write("\n")


def write_iteration_log_json(path, log):
    with open(path, "w") as fh:
        fh.write(json.dumps(log.to_json_obj(), indent=1))
        fh.write("\n")
