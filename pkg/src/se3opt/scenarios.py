"""Scenario configuration: TOML parsing, validation and shipped presets.

Every run of the command line is described by one human-editable TOML
file.  The four shipped presets reconstruct the reference maneuvers
(radius-doubling transfer with attitude change, relaxed radius doubling,
a 60 degree inclination change and an orbital capture) with desk-scale
parameters; the original body geometry, horizon and step size behind the
published figures are not public, so these values are reconstructions
chosen for robust convergence, not replicas.
"""

import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .dynamics import BodyParams, GravityParams, RigidBodyState, default_dumbbell
from .errors import ConfigError
from .impulsive import RelaxedOrbit
from .liegroup import exp_so3
from .shooting import SolverConfig

KINDS = ("simulate", "tpbvp", "impulsive", "smooth", "convergence")


@dataclass
class ScenarioConfig:
    kind: str
    label: str
    body: BodyParams
    gravity: GravityParams
    h: float
    n_steps: int
    initial: RigidBodyState
    seed: int = 0
    order: int = 2
    desired: RigidBodyState = None          # tpbvp / smooth
    relaxed: RelaxedOrbit = None            # impulsive
    W_f: np.ndarray = None                  # smooth
    W_m: np.ndarray = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    t_final: float = None                   # convergence
    h_values: tuple = ()                    # convergence
    out_dir: str = "out"
    figures: bool = True


def _get(table, key, field_name, required=True, default=None):
    if key not in table:
        if required:
            raise ConfigError(field_name, "missing required field")
        return default
    return table[key]


def _vec3(value, field_name):
    try:
        v = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(field_name, f"not a numeric 3-vector: {value!r}")
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ConfigError(field_name, f"must be a finite 3-vector, got {value!r}")
    return v


def _positive(value, field_name):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ConfigError(field_name, f"not a number: {value!r}")
    if not (v > 0.0 and math.isfinite(v)):
        raise ConfigError(field_name, f"must be finite and > 0, got {value}")
    return v


def _weight(value, field_name):
    """Scalar -> w*I, 3-vector -> diagonal, 3x3 rows -> full matrix."""
    arr = np.asarray(value, dtype=float)
    if arr.shape == ():
        W = float(arr) * np.eye(3)
    elif arr.shape == (3,):
        W = np.diag(arr)
    elif arr.shape == (3, 3):
        W = arr
    else:
        raise ConfigError(field_name, "expected scalar, 3-vector or 3x3 matrix")
    if np.linalg.eigvalsh(0.5 * (W + W.T)).min() <= 0.0:
        raise ConfigError(field_name, "weight must be positive definite")
    return W


def _parse_body(table):
    if table is None:
        return default_dumbbell()
    m = _positive(table.get("mass", 1.0), "body.mass")
    if "dumbbell_length" in table:
        return default_dumbbell(
            length=_positive(table["dumbbell_length"], "body.dumbbell_length"),
            sphere_radius=_positive(
                table.get("sphere_radius", 0.005), "body.sphere_radius"
            ),
            m=m,
        )
    inertia = _get(table, "inertia", "body.inertia")
    J = np.asarray(inertia, dtype=float)
    if J.shape == (3,):
        J = np.diag(J)
    rho = np.asarray(_get(table, "rho", "body.rho"), dtype=float)
    try:
        return BodyParams(m=m, J=J, rho=rho)
    except ValueError as exc:
        raise ConfigError("body", str(exc))


def _parse_state(table, field_name):
    if table is None:
        raise ConfigError(field_name, "missing required table")
    x = _vec3(_get(table, "x", f"{field_name}.x"), f"{field_name}.x")
    gamma = _vec3(_get(table, "gamma", f"{field_name}.gamma"),
                  f"{field_name}.gamma")
    rotvec = _vec3(table.get("rotvec", (0.0, 0.0, 0.0)), f"{field_name}.rotvec")
    Pi = _vec3(table.get("Pi", (0.0, 0.0, 0.0)), f"{field_name}.Pi")
    return RigidBodyState(exp_so3(rotvec), x, Pi, gamma)


def load_config(path, kind=None):
    """Parse and validate a scenario TOML file into a ScenarioConfig."""
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("path", f"no such config file: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("toml", f"parse error: {exc}")

    cfg_kind = raw.get("kind")
    if cfg_kind not in KINDS:
        raise ConfigError("kind", f"must be one of {KINDS}, got {cfg_kind!r}")
    if kind is not None and cfg_kind != kind:
        raise ConfigError(
            "kind", f"config is for {cfg_kind!r}, command expects {kind!r}"
        )

    body = _parse_body(raw.get("body"))
    grav_tab = raw.get("gravity", {})
    mu = grav_tab.get("mu", 4.0 * math.pi**2)
    try:
        gravity = GravityParams(mu=float(mu))
    except (TypeError, ValueError) as exc:
        raise ConfigError("gravity.mu", str(exc))

    integ = raw.get("integration", {})
    h = _positive(_get(integ, "h", "integration.h"), "integration.h")
    n_steps = _get(integ, "n_steps", "integration.n_steps")
    if not isinstance(n_steps, int) or n_steps < 0:
        raise ConfigError("integration.n_steps",
                          f"must be a non-negative integer, got {n_steps!r}")
    order = integ.get("order", 2)
    if order not in (1, 2):
        raise ConfigError("integration.order", f"must be 1 or 2, got {order!r}")

    try:
        initial = _parse_state(raw.get("initial"), "initial")
    except ValueError as exc:
        raise ConfigError("initial", str(exc))

    cfg = ScenarioConfig(
        kind=cfg_kind,
        label=raw.get("label", cfg_kind),
        body=body,
        gravity=gravity,
        h=h,
        n_steps=n_steps,
        initial=initial,
        order=order,
    )

    if cfg_kind in ("tpbvp", "smooth"):
        try:
            cfg.desired = _parse_state(raw.get("target"), "target")
        except ValueError as exc:
            raise ConfigError("target", str(exc))
    if cfg_kind == "impulsive":
        tgt = raw.get("target")
        if tgt is None:
            raise ConfigError("target", "missing required table")
        try:
            cfg.relaxed = RelaxedOrbit(
                r_d=_positive(_get(tgt, "r_d", "target.r_d"), "target.r_d"),
                e_n=_vec3(_get(tgt, "e_n", "target.e_n"), "target.e_n"),
                body_axis=_vec3(_get(tgt, "body_axis", "target.body_axis"),
                                "target.body_axis"),
                spin_rate=float(tgt.get("spin_rate", 0.0)),
            )
        except ValueError as exc:
            raise ConfigError("target", str(exc))
    if cfg_kind == "smooth":
        weights = raw.get("weights", {})
        cfg.W_f = _weight(weights.get("w_f", 1.0), "weights.w_f")
        cfg.W_m = _weight(weights.get("w_m", 1.0), "weights.w_m")

    solver = raw.get("solver", {})
    try:
        cfg.solver = SolverConfig(
            eps_stop=float(solver.get("eps_stop", 1e-10)),
            alpha=float(solver.get("alpha", 1e-4)),
            backtrack=float(solver.get("backtrack", 10.0)),
            max_outer=int(solver.get("max_outer", 100)),
            max_inner=int(solver.get("max_inner", 25)),
            seed=int(solver.get("seed", raw.get("seed", 0))),
        )
    except ValueError as exc:
        raise ConfigError("solver", str(exc))
    cfg.seed = cfg.solver.seed

    if cfg_kind == "convergence":
        conv = raw.get("convergence", {})
        cfg.t_final = _positive(_get(conv, "t_final", "convergence.t_final"),
                                "convergence.t_final")
        hv = _get(conv, "h_values", "convergence.h_values")
        if not isinstance(hv, list) or len(hv) < 3:
            raise ConfigError("convergence.h_values",
                              "need at least three step sizes")
        cfg.h_values = tuple(_positive(v, "convergence.h_values") for v in hv)
        for v in cfg.h_values:
            ratio = cfg.t_final / v
            if abs(ratio - round(ratio)) > 1e-9:
                raise ConfigError(
                    "convergence.h_values",
                    f"t_final/h must be an integer step count, got {ratio}"
                )

    out = raw.get("output", {})
    cfg.out_dir = out.get("dir", "out")
    cfg.figures = bool(out.get("figures", True))
    return cfg


def preset_path(name):
    """Filesystem path of a shipped preset (e.g. 'smooth_inclination_60deg')."""
    ref = resources.files("se3opt") / "presets" / f"{name}.toml"
    return str(ref)


def preset_names():
    pkg = resources.files("se3opt") / "presets"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".toml"))
