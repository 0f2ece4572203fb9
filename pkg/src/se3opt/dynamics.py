"""Rigid-body model and Lie group variational integrators on SE(3).

The body state lives on T*SE(3) as (R, x, Pi, gamma): attitude, inertial
position, body-frame angular momentum, inertial linear momentum.  The body
is a collection of point masses at body-frame offsets ``rho`` (two equal
spheres for the dumbbell spacecraft) in an inverse-square central gravity
field, so both a net force and a gravity-gradient moment act on it.

Two discrete flows are provided:

* :func:`step2` -- the second-order structure-preserving integrator.  The
  attitude is updated by group multiplication ``R_{k+1} = R_k F_k`` where
  the relative rotation ``F_k`` solves an implicit 3-dimensional equation
  in the Lie algebra; no reprojection or constraint enforcement is ever
  applied.
* :func:`step1` -- the first-order variant whose compact update equations
  are the ones the discrete optimal-control necessary conditions are
  written against.

Long runs go through a scalar hot loop (see ``_mat3``); the public
functions take and return numpy arrays and dataclasses.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import _mat3 as m3
from .errors import (
    NoConvergenceError,
    SingularPotentialError,
    StepTooLargeError,
)
from .liegroup import check_rotation, exp_so3, hat

# distance below which the potential is treated as singular
POTENTIAL_EPS = 1e-9

# default convergence of the implicit relative-rotation solve
SOLVE_TOL = 1e-13
SOLVE_MAX_ITER = 50


@dataclass(frozen=True)
class GravityParams:
    """Central gravity field, entering only through mu = G*M.

    mu = 0 switches gravity off entirely (free rigid body); the per-sphere
    distances are then never evaluated.
    """

    mu: float

    def __post_init__(self):
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")


@dataclass
class BodyParams:
    """Mass, inertia and mass-element geometry of the rigid body.

    ``J_d = tr(J)/2 * I - J`` and ``J_inv`` are derived in __post_init__
    and must not be assigned.  ``rho`` holds the body-frame offsets of the
    point masses; each carries an equal share m/len(rho) of the mass.
    """

    m: float
    J: np.ndarray
    rho: np.ndarray
    J_d: np.ndarray = field(init=False, repr=False)
    J_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not (self.m > 0.0 and math.isfinite(self.m)):
            raise ValueError(f"mass must be finite and > 0, got {self.m}")
        J = np.asarray(self.J, dtype=float)
        if J.shape != (3, 3):
            raise ValueError(f"inertia must be 3x3, got {J.shape}")
        if np.abs(J - J.T).max() > 1e-12 * max(1.0, np.abs(J).max()):
            raise ValueError("inertia matrix must be symmetric")
        if np.linalg.eigvalsh(J).min() <= 0.0:
            raise ValueError("inertia matrix must be positive definite")
        rho = np.atleast_2d(np.asarray(self.rho, dtype=float))
        if rho.shape[1] != 3 or not np.all(np.isfinite(rho)):
            raise ValueError("rho must be a list of finite 3-vectors")
        self.J = J
        self.rho = rho
        self.J_d = 0.5 * np.trace(J) * np.eye(3) - J
        self.J_inv = np.linalg.inv(J)


def default_dumbbell(length=0.02, sphere_radius=0.005, m=1.0):
    """Dumbbell of two equal solid spheres on the body e1 axis.

    Axial inertia is the spheres' own; the transverse terms add the
    m l^2 / 4 separation contribution.  The defaults give a body whose
    gravity-gradient torque at unit orbital radius is small but resolvable.
    """
    half = 0.5 * length
    j_sphere = 0.4 * (0.5 * m) * sphere_radius**2
    j_axial = 2.0 * j_sphere
    j_trans = 2.0 * (j_sphere + (0.5 * m) * half**2)
    J = np.diag([j_axial, j_trans, j_trans])
    rho = np.array([[half, 0.0, 0.0], [-half, 0.0, 0.0]])
    return BodyParams(m=m, J=J, rho=rho)


def reference_gravity():
    """mu = 4 pi^2: the unit circular orbit has period one."""
    return GravityParams(mu=4.0 * math.pi**2)


@dataclass
class RigidBodyState:
    """Point on T*SE(3): attitude R, position x, momenta (Pi, gamma)."""

    R: np.ndarray
    x: np.ndarray
    Pi: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        self.R = check_rotation(self.R)
        for name in ("x", "Pi", "gamma"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            setattr(self, name, v)

    def copy(self):
        return RigidBodyState(
            self.R.copy(), self.x.copy(), self.Pi.copy(), self.gamma.copy()
        )


@dataclass
class ControlSample:
    """Control force (inertial frame) and moment (body frame) at one index."""

    uf: np.ndarray
    um: np.ndarray

    def __post_init__(self):
        for name in ("uf", "um"):
            v = np.asarray(getattr(self, name), dtype=float)
            if v.shape != (3,) or not np.all(np.isfinite(v)):
                raise ValueError(f"{name} must be a finite 3-vector")
            setattr(self, name, v)


ZERO_CONTROL = ControlSample(np.zeros(3), np.zeros(3))


@dataclass
class Trajectory:
    """Discrete trajectory: states 0..N plus the control samples used.

    ``uf``/``um`` hold one row per index; for the first-order flow row 0 is
    unused (zero) because controls are indexed 1..N there.
    """

    h: float
    order: int
    R: np.ndarray      # (N+1, 3, 3)
    x: np.ndarray      # (N+1, 3)
    Pi: np.ndarray     # (N+1, 3)
    gamma: np.ndarray  # (N+1, 3)
    uf: np.ndarray     # (N+1, 3)
    um: np.ndarray     # (N+1, 3)

    @property
    def n_steps(self):
        return self.x.shape[0] - 1

    @property
    def times(self):
        return self.h * np.arange(self.x.shape[0])

    def state(self, k):
        return RigidBodyState(self.R[k], self.x[k], self.Pi[k], self.gamma[k])

    def final_state(self):
        return self.state(self.n_steps)


# ---------------------------------------------------------------------------
# scalar core


class _CorePack:
    """Precomputed scalar view of (BodyParams, GravityParams)."""

    __slots__ = ("m", "mu", "half_mu_m", "J9", "Jd9", "Jinv9", "rhos", "jscale")

    def __init__(self, body, gravity):
        self.m = float(body.m)
        self.mu = float(gravity.mu)
        self.half_mu_m = 0.5 * self.mu * self.m
        self.J9 = m3.m9(body.J)
        self.Jd9 = m3.m9(body.J_d)
        self.Jinv9 = m3.m9(body.J_inv)
        self.rhos = tuple(m3.v3(r) for r in body.rho)
        self.jscale = max(abs(e) for e in self.J9)


def _potential_core(pk, R, x):
    if pk.mu == 0.0:
        return 0.0
    u = 0.0
    for rho in pk.rhos:
        y = m3.add3(x, m3.mv(R, rho))
        n = m3.norm3(y)
        if n < POTENTIAL_EPS:
            raise SingularPotentialError(
                f"mass element within {POTENTIAL_EPS} of the attracting center"
            )
        u -= pk.half_mu_m / n
    return u


def _force_moment_core(pk, R, x):
    """Gravity force (inertial) and moment (body) at configuration (R, x)."""
    if pk.mu == 0.0:
        return (0.0, 0.0, 0.0), (0.0, 0.0, 0.0)
    f = (0.0, 0.0, 0.0)
    M = (0.0, 0.0, 0.0)
    for rho in pk.rhos:
        y = m3.add3(x, m3.mv(R, rho))
        n2 = m3.dot3(y, y)
        n = math.sqrt(n2)
        if n < POTENTIAL_EPS:
            raise SingularPotentialError(
                f"mass element within {POTENTIAL_EPS} of the attracting center"
            )
        fq = m3.scale3(y, -pk.half_mu_m / (n2 * n))
        f = m3.add3(f, fq)
        M = m3.add3(M, m3.cross3(rho, m3.mtv(R, fq)))
    return f, M


def _g_coeffs(theta, theta2):
    """Scalars of the algebra-side residual g and its derivative.

    g(phi) = a * J phi + b * (J_d phi x phi) with a = sin t / t and
    b = (1 - cos t)/t^2 equals vee(F J_d - J_d F^T) for F = exp(hat(phi));
    da_t and db_t are a'(t)/t and b'(t)/t.
    """
    if theta < 1e-4:
        a = 1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0
        b = 0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0
        da_t = -1.0 / 3.0 + theta2 / 30.0
        db_t = -1.0 / 12.0 + theta2 / 180.0
    else:
        st = math.sin(theta)
        ct = math.cos(theta)
        a = st / theta
        b = (1.0 - ct) / theta2
        da_t = (theta * ct - st) / (theta2 * theta)
        db_t = (theta * st - 2.0 * (1.0 - ct)) / (theta2 * theta2)
    return a, b, da_t, db_t


def _g_jacobian(J, Jd, phi, Jp, Dp, cr, a, b, da_t, db_t):
    p0, p1, p2 = phi
    # S(Dp) - S(phi) @ Jd, assembled row-wise
    s00 = -(-p2 * Jd[3] + p1 * Jd[6])
    s01 = -Dp[2] - (-p2 * Jd[4] + p1 * Jd[7])
    s02 = Dp[1] - (-p2 * Jd[5] + p1 * Jd[8])
    s10 = Dp[2] - (p2 * Jd[0] - p0 * Jd[6])
    s11 = -(p2 * Jd[1] - p0 * Jd[7])
    s12 = -Dp[0] - (p2 * Jd[2] - p0 * Jd[8])
    s20 = -Dp[1] - (-p1 * Jd[0] + p0 * Jd[3])
    s21 = Dp[0] - (-p1 * Jd[1] + p0 * Jd[4])
    s22 = -(-p1 * Jd[2] + p0 * Jd[5])
    return (
        a * J[0] + da_t * Jp[0] * p0 + b * s00 + db_t * cr[0] * p0,
        a * J[1] + da_t * Jp[0] * p1 + b * s01 + db_t * cr[0] * p1,
        a * J[2] + da_t * Jp[0] * p2 + b * s02 + db_t * cr[0] * p2,
        a * J[3] + da_t * Jp[1] * p0 + b * s10 + db_t * cr[1] * p0,
        a * J[4] + da_t * Jp[1] * p1 + b * s11 + db_t * cr[1] * p1,
        a * J[5] + da_t * Jp[1] * p2 + b * s12 + db_t * cr[1] * p2,
        a * J[6] + da_t * Jp[2] * p0 + b * s20 + db_t * cr[2] * p0,
        a * J[7] + da_t * Jp[2] * p1 + b * s21 + db_t * cr[2] * p1,
        a * J[8] + da_t * Jp[2] * p2 + b * s22 + db_t * cr[2] * p2,
    )


def _g_eval(J, Jd, phi, t):
    """Residual of the algebra equation and intermediates for its Jacobian."""
    theta2 = m3.dot3(phi, phi)
    a, b, da_t, db_t = _g_coeffs(math.sqrt(theta2), theta2)
    Jp = m3.mv(J, phi)
    Dp = m3.mv(Jd, phi)
    cr = m3.cross3(Dp, phi)
    r = (
        a * Jp[0] + b * cr[0] - t[0],
        a * Jp[1] + b * cr[1] - t[1],
        a * Jp[2] + b * cr[2] - t[2],
    )
    return r, m3.norm3(r), (Jp, Dp, cr, a, b, da_t, db_t)


def _solve_phi(pk, h, rhs, want_jacobian=False):
    """Damped Newton solve of g(phi) = h * rhs in the Lie algebra.

    The initial iterate h * J^{-1} rhs sits inside the solvability margin
    ||h J^{-1} rhs|| < pi/2 that is enforced up front.  Iterates until the
    residual reaches its round-off floor; the contract bound
    1e-13 * max(1, ||h rhs||) is only the acceptance threshold.  Steps
    that would increase the residual are halved (large rotation angles
    near the existence boundary of the equation).
    """
    w = m3.mv(pk.Jinv9, rhs)
    if h * m3.norm3(w) >= 0.5 * math.pi:
        raise StepTooLargeError(
            f"h * ||J^-1 rhs|| = {h * m3.norm3(w):.3e} >= pi/2; "
            "reduce the step size"
        )
    t = m3.scale3(rhs, h)
    tol = SOLVE_TOL * max(1.0, m3.norm3(t))
    phi = m3.scale3(w, h)
    # round-off floor of the residual evaluation
    floor = 32.0 * 2.3e-16 * pk.jscale * max(m3.norm3(phi), 1e-30)
    J, Jd = pk.J9, pk.Jd9
    r, res, aux = _g_eval(J, Jd, phi, t)
    prev = math.inf
    for _ in range(SOLVE_MAX_ITER):
        if res <= floor or (res <= tol and res >= 0.25 * prev):
            if want_jacobian:
                Jp, Dp, cr, a, b, da_t, db_t = aux
                return phi, _g_jacobian(J, Jd, phi, Jp, Dp, cr, a, b, da_t, db_t)
            return phi
        Jp, Dp, cr, a, b, da_t, db_t = aux
        G = _g_jacobian(J, Jd, phi, Jp, Dp, cr, a, b, da_t, db_t)
        d = m3.solve33(G, r)
        if d is None:
            raise NoConvergenceError(
                "singular Jacobian in relative-rotation solve", residual=res
            )
        scale = 1.0
        for _ in range(8):
            cand = m3.sub3(phi, m3.scale3(d, scale))
            r_c, res_c, aux_c = _g_eval(J, Jd, cand, t)
            if res_c < res:
                break
            scale *= 0.5
        else:
            # no descent along the Newton direction: no nearby root
            raise NoConvergenceError(
                f"relative-rotation solve stalled at residual {res:.3e} "
                f"(tolerance {tol:.1e}); the step may be outside the "
                "solvable range",
                residual=res,
            )
        phi, r, aux = cand, r_c, aux_c
        prev, res = res, res_c
    if res <= tol:
        if want_jacobian:
            Jp, Dp, cr, a, b, da_t, db_t = aux
            return phi, _g_jacobian(J, Jd, phi, Jp, Dp, cr, a, b, da_t, db_t)
        return phi
    raise NoConvergenceError(
        f"relative-rotation solve did not reach {tol:.1e} in "
        f"{SOLVE_MAX_ITER} iterations (residual {res:.3e})",
        residual=res,
    )


def _step2_core(pk, h, R, x, Pi, gam, f, M, ufk, umk, ufk1, umk1):
    """One second-order step; (f, M) belong to the incoming configuration."""
    mo = pk.m
    ax = m3.add3(f, ufk)
    x1 = m3.add3(
        m3.add3(x, m3.scale3(gam, h / mo)), m3.scale3(ax, h * h / (2.0 * mo))
    )
    rhs = m3.add3(Pi, m3.scale3(m3.add3(M, umk), 0.5 * h))
    phi = _solve_phi(pk, h, rhs)
    F = m3.exp9(phi)
    R1 = m3.mm(R, F)
    f1, M1 = _force_moment_core(pk, R1, x1)
    gam1 = m3.add3(
        gam,
        m3.add3(m3.scale3(ax, 0.5 * h), m3.scale3(m3.add3(f1, ufk1), 0.5 * h)),
    )
    Pi1 = m3.add3(m3.mtv(F, rhs), m3.scale3(m3.add3(M1, umk1), 0.5 * h))
    return R1, x1, Pi1, gam1, f1, M1


def _step1_core(pk, h, R, x, Pi, gam, ufk1, umk1):
    """One first-order step; controls are indexed at the arrival point."""
    x1 = m3.add3(x, m3.scale3(gam, h / pk.m))
    phi = _solve_phi(pk, h, Pi)
    F = m3.exp9(phi)
    R1 = m3.mm(R, F)
    f1, M1 = _force_moment_core(pk, R1, x1)
    gam1 = m3.add3(gam, m3.scale3(m3.add3(f1, ufk1), h))
    Pi1 = m3.add3(m3.mtv(F, Pi), m3.scale3(m3.add3(M1, umk1), h))
    return R1, x1, Pi1, gam1, f1, M1


# ---------------------------------------------------------------------------
# public operations


def potential_energy(body, gravity, R, x):
    """Gravitational potential of the body at configuration (R, x)."""
    pk = _CorePack(body, gravity)
    return _potential_core(pk, m3.m9(R), m3.v3(x))


def force_moment(body, gravity, R, x):
    """Force (inertial frame) and moment (body frame) from the potential."""
    pk = _CorePack(body, gravity)
    f, M = _force_moment_core(pk, m3.m9(R), m3.v3(x))
    return np.array(f), np.array(M)


def force_moment_gradients(body, gravity, R, x):
    """Derivatives of (f, M) in perturbation coordinates.

    Returns (Fx, Fz, Mx, Mz): Fx = df/dx, Fz = df/dzeta for the attitude
    perturbation dR = R hat(zeta), and likewise for the moment.  Used by
    the analytic one-step Jacobians.
    """
    mu = gravity.mu
    if mu == 0.0:
        z = np.zeros((3, 3))
        return z, z.copy(), z.copy(), z.copy()
    R = np.asarray(R, dtype=float)
    x = np.asarray(x, dtype=float)
    w = 0.5 * mu * body.m
    Fx = np.zeros((3, 3))
    Fz = np.zeros((3, 3))
    Mx = np.zeros((3, 3))
    Mz = np.zeros((3, 3))
    eye = np.eye(3)
    for rho in body.rho:
        y = x + R @ rho
        n2 = float(y @ y)
        n = math.sqrt(n2)
        if n < POTENTIAL_EPS:
            raise SingularPotentialError(
                f"mass element within {POTENTIAL_EPS} of the attracting center"
            )
        K = -w * (eye / (n2 * n) - 3.0 * np.outer(y, y) / (n2 * n2 * n))
        fq = -w * y / (n2 * n)
        Sr = hat(rho)
        RtK = R.T @ K
        Fx += K
        Fz -= K @ R @ Sr
        Mx += Sr @ RtK
        Mz += Sr @ (hat(R.T @ fq) - RtK @ R @ Sr)
    return Fx, Fz, Mx, Mz


def solve_relative_rotation(body, h, rhs):
    """Relative attitude F of one discrete step.

    Solves h * hat(rhs) = F J_d - J_d F^T for F in SO(3); the computation
    happens on the 3-dimensional rotation vector of F.
    """
    if not (h > 0.0 and math.isfinite(h)):
        raise ValueError(f"step size must be finite and > 0, got {h}")
    pk = _CorePack(body, GravityParams(mu=0.0))
    phi = _solve_phi(pk, float(h), m3.v3(rhs))
    return exp_so3(np.array(phi))


def _as_tuples(state):
    return (
        m3.m9(state.R),
        m3.v3(state.x),
        m3.v3(state.Pi),
        m3.v3(state.gamma),
    )


def step2(body, gravity, h, state, u_k=None, u_kp1=None):
    """One step of the second-order integrator with trapezoidal controls.

    ``u_k`` acts at the departure index, ``u_kp1`` at the arrival index;
    the force and moment at the arrival configuration are evaluated after
    the configuration update.
    """
    u_k = u_k or ZERO_CONTROL
    u_kp1 = u_kp1 or ZERO_CONTROL
    pk = _CorePack(body, gravity)
    R, x, Pi, gam = _as_tuples(state)
    f, M = _force_moment_core(pk, R, x)
    R1, x1, Pi1, gam1, _, _ = _step2_core(
        pk, float(h), R, x, Pi, gam, f, M,
        m3.v3(u_k.uf), m3.v3(u_k.um), m3.v3(u_kp1.uf), m3.v3(u_kp1.um),
    )
    return RigidBodyState(
        np.array(R1).reshape(3, 3), np.array(x1), np.array(Pi1), np.array(gam1)
    )


def step1(body, gravity, h, state, u_kp1=None):
    """One step of the first-order integrator (control at arrival index)."""
    u_kp1 = u_kp1 or ZERO_CONTROL
    pk = _CorePack(body, gravity)
    R, x, Pi, gam = _as_tuples(state)
    R1, x1, Pi1, gam1, _, _ = _step1_core(
        pk, float(h), R, x, Pi, gam, m3.v3(u_kp1.uf), m3.v3(u_kp1.um)
    )
    return RigidBodyState(
        np.array(R1).reshape(3, 3), np.array(x1), np.array(Pi1), np.array(gam1)
    )


def _controls_to_arrays(controls, n_samples):
    if controls is None:
        z = np.zeros((n_samples, 3))
        return z, z.copy()
    if isinstance(controls, np.ndarray):
        c = np.asarray(controls, dtype=float)
        if c.shape != (n_samples, 6):
            raise ValueError(
                f"control array must have shape ({n_samples}, 6), got {c.shape}"
            )
        return c[:, :3].copy(), c[:, 3:].copy()
    if len(controls) != n_samples:
        raise ValueError(
            f"expected {n_samples} control samples, got {len(controls)}"
        )
    uf = np.zeros((n_samples, 3))
    um = np.zeros((n_samples, 3))
    for k, u in enumerate(controls):
        if u is not None:
            uf[k] = u.uf
            um[k] = u.um
    return uf, um


def simulate(body, gravity, h, state0, controls=None, order=2, n_steps=None):
    """Propagate ``n_steps`` steps; returns a deterministic Trajectory.

    For order 2 the controls are the N+1 samples at indices 0..N (the
    final sample enters the last momentum update and may be zero); for
    order 1 they are the N samples applied at arrival indices 1..N.
    ``controls`` may be None (coast), an (n, 6) array of [uf, um] rows, or
    a sequence of ControlSample.
    """
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if not (h > 0.0 and math.isfinite(h)):
        raise ValueError(f"step size must be finite and > 0, got {h}")
    if n_steps is None:
        if controls is None:
            raise ValueError("need n_steps when controls is None")
        n_steps = len(controls) - 1 if order == 2 else len(controls)
    n_steps = int(n_steps)
    if n_steps < 0:
        raise ValueError("n_steps must be >= 0")
    n_samples = n_steps + 1 if order == 2 else n_steps
    uf_in, um_in = _controls_to_arrays(controls, n_samples)

    pk = _CorePack(body, gravity)
    R, x, Pi, gam = _as_tuples(state0)
    Rs, xs, Pis, gams = [R], [x], [Pi], [gam]
    h = float(h)

    if order == 2:
        ufs = [m3.v3(r) for r in uf_in]
        ums = [m3.v3(r) for r in um_in]
        f, M = _force_moment_core(pk, R, x)
        for k in range(n_steps):
            R, x, Pi, gam, f, M = _step2_core(
                pk, h, R, x, Pi, gam, f, M,
                ufs[k], ums[k], ufs[k + 1], ums[k + 1],
            )
            Rs.append(R)
            xs.append(x)
            Pis.append(Pi)
            gams.append(gam)
        uf_out, um_out = uf_in, um_in
    else:
        ufs = [m3.v3(r) for r in uf_in]
        ums = [m3.v3(r) for r in um_in]
        for k in range(n_steps):
            R, x, Pi, gam, _, _ = _step1_core(pk, h, R, x, Pi, gam, ufs[k], ums[k])
            Rs.append(R)
            xs.append(x)
            Pis.append(Pi)
            gams.append(gam)
        uf_out = np.vstack([np.zeros((1, 3)), uf_in])
        um_out = np.vstack([np.zeros((1, 3)), um_in])

    return Trajectory(
        h=h,
        order=order,
        R=np.array(Rs).reshape(-1, 3, 3),
        x=np.array(xs),
        Pi=np.array(Pis),
        gamma=np.array(gams),
        uf=uf_out,
        um=um_out,
    )


def conserved_quantities(body, gravity, state):
    """Total energy and total angular momentum x cross gamma + R Pi.

    The total angular momentum is conserved for coasting motion because
    the potential is invariant under simultaneous rotation of x and R
    about the attracting center.
    """
    kinetic = float(state.gamma @ state.gamma) / (2.0 * body.m)
    rotational = 0.5 * float(state.Pi @ (body.J_inv @ state.Pi))
    u = potential_energy(body, gravity, state.R, state.x)
    energy = kinetic + rotational + u
    ang = np.cross(state.x, state.gamma) + state.R @ state.Pi
    return energy, ang


def trajectory_invariants(body, gravity, traj, stride=1):
    """Vectorized invariant series along a trajectory.

    Returns a dict with times, energy, total angular momentum rows and the
    Frobenius deviation of R^T R from identity, sampled every ``stride``
    steps (the final state is always included).
    """
    idx = np.arange(0, traj.x.shape[0], stride)
    if idx[-1] != traj.x.shape[0] - 1:
        idx = np.append(idx, traj.x.shape[0] - 1)
    R = traj.R[idx]
    x = traj.x[idx]
    Pi = traj.Pi[idx]
    gam = traj.gamma[idx]

    kinetic = np.einsum("ki,ki->k", gam, gam) / (2.0 * body.m)
    rotational = 0.5 * np.einsum("ki,ij,kj->k", Pi, body.J_inv, Pi)
    if gravity.mu == 0.0:
        u = np.zeros(len(idx))
    else:
        y = x[:, None, :] + np.einsum("kij,qj->kqi", R, body.rho)
        n = np.linalg.norm(y, axis=2)
        if n.min() < POTENTIAL_EPS:
            raise SingularPotentialError("trajectory passes through the center")
        u = -0.5 * gravity.mu * body.m * np.sum(1.0 / n, axis=1)
    energy = kinetic + rotational + u

    ang = np.cross(x, gam) + np.einsum("kij,kj->ki", R, Pi)
    rtr = np.einsum("kji,kjl->kil", R, R) - np.eye(3)
    rtr_defect = np.sqrt(np.einsum("kij,kij->k", rtr, rtr))
    return {
        "t": traj.h * idx,
        "index": idx,
        "energy": energy,
        "angular_momentum": ang,
        "rotation_defect": rtr_defect,
    }
