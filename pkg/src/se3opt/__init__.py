"""Structure-preserving simulation and optimal control of a rigid body on SE(3)."""

from .dynamics import (
    BodyParams,
    ControlSample,
    GravityParams,
    RigidBodyState,
    Trajectory,
    conserved_quantities,
    default_dumbbell,
    force_moment,
    potential_energy,
    reference_gravity,
    simulate,
    solve_relative_rotation,
    step1,
    step2,
)
from .liegroup import exp_so3, hat, log_so3, vee

__version__ = "0.1.0"

__all__ = [
    "BodyParams",
    "ControlSample",
    "GravityParams",
    "RigidBodyState",
    "Trajectory",
    "conserved_quantities",
    "default_dumbbell",
    "exp_so3",
    "force_moment",
    "hat",
    "log_so3",
    "potential_energy",
    "reference_gravity",
    "simulate",
    "solve_relative_rotation",
    "step1",
    "step2",
    "vee",
]
