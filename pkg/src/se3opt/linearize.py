"""Perturbation calculus along discrete SE(3) trajectories.

Perturbations of a state (R, x, Pi, gamma) are 12-vectors

    z = [dx, dgamma, zeta, dPi]

where the attitude perturbation zeta lives in the Lie algebra through
dR = R hat(zeta); positions and momenta perturb additively.  One-step
Jacobians A with z_{k+1} = A z_k are available both in closed form
(default) and by central finite differences of the exact nonlinear step
(the oracle the closed form is tested against).

The coupled state/multiplier sensitivity assembles the forward recursion

    z_{k+1}      = A_k z_k + A12 dlam_k
    dlam_{k+1}   = A_{k+1}^{-T} (dlam_k - A21_{k+1} z_{k+1})

into a single 24x24 transition matrix whose upper-right block drives the
shooting method.
"""

from dataclasses import dataclass

import numpy as np

from . import _mat3 as m3
from .dynamics import (
    ControlSample,
    RigidBodyState,
    _CorePack,
    _force_moment_core,
    _solve_phi,
    force_moment_gradients,
    step1,
    step2,
)
from .errors import Se3OptError, SingularWeightError, StepTooLargeError
from .liegroup import exp_so3, hat, log_so3, right_jacobian

# block layout of a perturbation vector
DX = slice(0, 3)
DGAMMA = slice(3, 6)
ZETA = slice(6, 9)
DPI = slice(9, 12)

# columns of the momentum perturbations (dgamma, dPi)
MOMENTUM_COLUMNS = (3, 4, 5, 9, 10, 11)

FD_EPS = 1e-6


def apply_perturbation(state, z):
    """State displaced by perturbation z (attitude multiplicatively)."""
    z = np.asarray(z, dtype=float)
    return RigidBodyState(
        state.R @ exp_so3(z[ZETA]),
        state.x + z[DX],
        state.Pi + z[DPI],
        state.gamma + z[DGAMMA],
    )


def state_difference(nominal, perturbed):
    """Perturbation z with perturbed ~ nominal (+) z."""
    z = np.empty(12)
    z[DX] = perturbed.x - nominal.x
    z[DGAMMA] = perturbed.gamma - nominal.gamma
    z[ZETA] = log_so3(nominal.R.T @ perturbed.R)
    z[DPI] = perturbed.Pi - nominal.Pi
    return z


def boundary_error(state, desired):
    """Desired-minus-actual perturbation [dx, dgamma, zeta, dPi].

    The sign convention makes lam + c D z_N a descent update in the
    shooting iteration.
    """
    z = np.empty(12)
    z[DX] = desired.x - state.x
    z[DGAMMA] = desired.gamma - state.gamma
    z[ZETA] = log_so3(state.R.T @ desired.R)
    z[DPI] = desired.Pi - state.Pi
    return z


# ---------------------------------------------------------------------------
# one-step Jacobians


def _solve_phi_jac(pk, h, rhs):
    """phi, F (3x3), inv-Jacobian-scaled tangent B = h J_r(phi) G^{-1}."""
    phi, G9 = _solve_phi(pk, h, rhs, want_jacobian=True)
    phi_np = np.array(phi)
    F = np.array(m3.exp9(phi)).reshape(3, 3)
    G = np.array(G9).reshape(3, 3)
    B = h * right_jacobian(phi_np) @ np.linalg.inv(G)
    return phi_np, F, B


def _jacobian_order1(body, gravity, h, state):
    """Closed-form step Jacobian of the first-order flow, plus the step.

    Returns (A, next config pieces (R1, x1)).  The entries need force and
    moment gradients only at the arrival configuration, which does not
    depend on the arrival-index control.
    """
    pk = _CorePack(body, gravity)
    m = body.m
    phi, F, B = _solve_phi_jac(pk, h, m3.v3(state.Pi))
    x1 = state.x + (h / m) * state.gamma
    R1 = state.R @ F
    Fx1, Fz1, Mx1, Mz1 = force_moment_gradients(body, gravity, R1, x1)

    X = np.zeros((3, 12))
    X[:, DX] = np.eye(3)
    X[:, DGAMMA] = (h / m) * np.eye(3)

    Z = np.zeros((3, 12))
    Z[:, ZETA] = F.T
    Z[:, DPI] = B

    G_ = np.zeros((3, 12))
    G_[:, DGAMMA] = np.eye(3)
    G_ += h * (Fx1 @ X + Fz1 @ Z)

    P = np.zeros((3, 12))
    P[:, DPI] = F.T + hat(F.T @ state.Pi) @ B
    P += h * (Mx1 @ X + Mz1 @ Z)

    A = np.vstack([X, G_, Z, P])
    return A, R1, x1


def _jacobian_order2(body, gravity, h, state, u_k):
    """Closed-form step Jacobian of the second-order flow, plus the step."""
    pk = _CorePack(body, gravity)
    m = body.m
    f0, M0 = _force_moment_core(pk, m3.m9(state.R), m3.v3(state.x))
    f0 = np.array(f0)
    M0 = np.array(M0)
    rhs = state.Pi + 0.5 * h * (M0 + u_k.um)
    phi, F, B = _solve_phi_jac(pk, h, m3.v3(rhs))
    x1 = state.x + (h / m) * state.gamma + (h * h / (2 * m)) * (f0 + u_k.uf)
    R1 = state.R @ F

    Fx0, Fz0, Mx0, Mz0 = force_moment_gradients(body, gravity, state.R, state.x)
    Fx1, Fz1, Mx1, Mz1 = force_moment_gradients(body, gravity, R1, x1)

    X = np.zeros((3, 12))
    X[:, DX] = np.eye(3) + (h * h / (2 * m)) * Fx0
    X[:, DGAMMA] = (h / m) * np.eye(3)
    X[:, ZETA] = (h * h / (2 * m)) * Fz0

    # variation of rhs = Pi + (h/2) (M_k + um_k)
    Rv = np.zeros((3, 12))
    Rv[:, DX] = 0.5 * h * Mx0
    Rv[:, ZETA] = 0.5 * h * Mz0
    Rv[:, DPI] = np.eye(3)
    Xi = B @ Rv  # variation of the relative-rotation vector xi

    Z = np.zeros((3, 12))
    Z[:, ZETA] = F.T
    Z += Xi

    Gk = np.zeros((3, 12))
    Gk[:, DX] = Fx0
    Gk[:, ZETA] = Fz0
    G_ = np.zeros((3, 12))
    G_[:, DGAMMA] = np.eye(3)
    G_ += 0.5 * h * (Gk + Fx1 @ X + Fz1 @ Z)

    P = hat(F.T @ rhs) @ Xi + F.T @ Rv
    P += 0.5 * h * (Mx1 @ X + Mz1 @ Z)

    A = np.vstack([X, G_, Z, P])
    return A, R1, x1


def perturbation_scales(body):
    """Natural magnitude of each perturbation component.

    Momentum perturbations conjugate to the attitude live on the angular
    momentum scale of the body; everything else is order one in the
    normalized units.
    """
    s = np.ones(12)
    s[DPI] = max(float(np.abs(body.J).max()), 1e-30)
    return s


def _fd_jacobian(body, gravity, h, state, u_k, u_kp1, order, eps=FD_EPS):
    if order == 1:
        def flow(s):
            return step1(body, gravity, h, s, u_kp1)
    else:
        def flow(s):
            return step2(body, gravity, h, s, u_k, u_kp1)

    base = flow(state)
    scales = perturbation_scales(body)
    A = np.empty((12, 12))
    for j in range(12):
        dz = np.zeros(12)
        dz[j] = eps * scales[j]
        zp = state_difference(base, flow(apply_perturbation(state, dz)))
        zm = state_difference(base, flow(apply_perturbation(state, -dz)))
        A[:, j] = (zp - zm) / (2.0 * eps * scales[j])
    return A


def step_jacobian(body, gravity, h, state, u_k=None, u_kp1=None, order=2,
                  method="analytic"):
    """Exact Jacobian A of the one-step map in perturbation coordinates.

    Controls are held fixed; for the first-order flow A does not depend on
    them at all, for the second-order flow only the departure-index sample
    ``u_k`` enters.  ``method="fd"`` differences the nonlinear step
    instead and serves as the oracle for the closed form.
    """
    u_k = u_k or ControlSample(np.zeros(3), np.zeros(3))
    u_kp1 = u_kp1 or ControlSample(np.zeros(3), np.zeros(3))
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if method == "fd":
        return _fd_jacobian(body, gravity, h, state, u_k, u_kp1, order)
    if method != "analytic":
        raise ValueError(f"unknown method {method!r}")
    if order == 1:
        A, _, _ = _jacobian_order1(body, gravity, h, state)
    else:
        A, _, _ = _jacobian_order2(body, gravity, h, state, u_k)
    return A


def step_with_jacobian(body, gravity, h, state, u_k=None, u_kp1=None, order=2):
    """Advance one step and return (next_state, A) sharing the work."""
    u_k = u_k or ControlSample(np.zeros(3), np.zeros(3))
    u_kp1 = u_kp1 or ControlSample(np.zeros(3), np.zeros(3))
    if order == 1:
        A, _, _ = _jacobian_order1(body, gravity, h, state)
        nxt = step1(body, gravity, h, state, u_kp1)
    else:
        A, _, _ = _jacobian_order2(body, gravity, h, state, u_k)
        nxt = step2(body, gravity, h, state, u_k, u_kp1)
    return nxt, A


# ---------------------------------------------------------------------------
# control injection and multiplier linearization


def check_spd(W, name="weight"):
    """Validated symmetric positive definite 3x3 matrix."""
    W = np.asarray(W, dtype=float)
    if W.shape != (3, 3):
        raise SingularWeightError(f"{name} must be 3x3, got {W.shape}")
    if np.abs(W - W.T).max() > 1e-10 * max(1.0, np.abs(W).max()):
        raise SingularWeightError(f"{name} is not symmetric")
    if np.linalg.eigvalsh(W).min() <= 0.0:
        raise SingularWeightError(f"{name} is not positive definite")
    return W


def control_injection(h, W_f, W_m):
    """Injection block mapping multiplier perturbations into the state.

    Block-diagonal -h * diag[0, W_f^{-1}, 0, W_m^{-1}] in the perturbation
    ordering [dx, dgamma, zeta, dPi].
    """
    W_f = check_spd(W_f, "W_f")
    W_m = check_spd(W_m, "W_m")
    A12 = np.zeros((12, 12))
    A12[DGAMMA, DGAMMA] = -h * np.linalg.inv(W_f)
    A12[DPI, DPI] = -h * np.linalg.inv(W_m)
    return A12


def multiplier_state_jacobian(body, gravity, h, state, lam, order=1,
                              eps=FD_EPS, jac_method="analytic"):
    """Derivative of A(state)^T lam with respect to the state perturbation.

    Central finite differences of the multiplier update map in the same
    perturbation coordinates (momentum directions scaled by the body's
    angular momentum magnitude); linear in lam by construction.  Falls
    back to a one-sided difference when a perturbed step sits outside the
    solvable range.
    """
    lam = np.asarray(lam, dtype=float)
    scales = perturbation_scales(body)
    base = None
    out = np.empty((12, 12))
    for j in range(12):
        dz = np.zeros(12)
        dz[j] = eps * scales[j]
        try:
            Ap = step_jacobian(body, gravity, h, apply_perturbation(state, dz),
                               order=order, method=jac_method)
        except Se3OptError:
            Ap = None
        try:
            Am = step_jacobian(body, gravity, h, apply_perturbation(state, -dz),
                               order=order, method=jac_method)
        except Se3OptError:
            Am = None
        if Ap is not None and Am is not None:
            out[:, j] = (Ap.T @ lam - Am.T @ lam) / (2.0 * eps * scales[j])
            continue
        if Ap is None and Am is None:
            raise StepTooLargeError(
                "state perturbation leaves the solvable step range on both sides"
            )
        if base is None:
            base = step_jacobian(body, gravity, h, state, order=order,
                                 method=jac_method)
        side = Ap if Ap is not None else Am
        sign = 1.0 if Ap is not None else -1.0
        out[:, j] = sign * (side.T @ lam - base.T @ lam) / (eps * scales[j])
    return out


# ---------------------------------------------------------------------------
# transition matrices


@dataclass
class TransitionMatrices:
    """State sensitivity Phi (12x12) and coupled sensitivity Psi (24x24)."""

    phi: np.ndarray
    psi: np.ndarray

    @property
    def psi11(self):
        return self.psi[:12, :12]

    @property
    def psi12(self):
        return self.psi[:12, 12:]

    @property
    def psi21(self):
        return self.psi[12:, :12]

    @property
    def psi22(self):
        return self.psi[12:, 12:]


def propagate_phi(jacobians):
    """Ordered product A_{N-1} ... A_1 A_0 mapping z_0 to z_N."""
    jacobians = list(jacobians)
    if not jacobians:
        raise ValueError("need at least one step Jacobian")
    phi = np.eye(12)
    for A in jacobians:
        phi = A @ phi
    return phi


def phi_momentum_columns(phi):
    """Columns of Phi against the initial momentum perturbations (12x6)."""
    return np.asarray(phi)[:, MOMENTUM_COLUMNS]


def propagate_psi(body, gravity, h, states, multipliers, W_f, W_m):
    """Coupled state/multiplier transition matrices along an extremal.

    ``states`` is the list of trajectory states 0..N, ``multipliers`` the
    array of lam_0..lam_{N-1}.  The backward multiplier linearization is
    folded into a forward 24x24 recursion by inverting A_{k+1}^T per step,
    which is well conditioned for step sizes inside the solvability guard.
    The multiplier block of the final step carries dlam_{N-1} through
    unchanged (lam_N is not part of the extremal map).
    """
    n = len(states) - 1
    if n < 1:
        raise ValueError("need at least one step")
    multipliers = np.asarray(multipliers, dtype=float)
    A12 = control_injection(h, W_f, W_m)
    A_list = [
        step_jacobian(body, gravity, h, states[k], order=1) for k in range(n)
    ]
    phi = propagate_phi(A_list)

    psi = np.eye(24)
    T = np.empty((24, 24))
    for k in range(n):
        A = A_list[k]
        T[:12, :12] = A
        T[:12, 12:] = A12
        if k < n - 1:
            A21 = multiplier_state_jacobian(
                body, gravity, h, states[k + 1], multipliers[k + 1], order=1
            )
            At_inv = np.linalg.inv(A_list[k + 1].T)
            T[12:, :12] = -At_inv @ A21 @ A
            T[12:, 12:] = At_inv @ (np.eye(12) - A21 @ A12)
        else:
            T[12:, :12] = 0.0
            T[12:, 12:] = np.eye(12)
        psi = T @ psi
    return TransitionMatrices(phi=phi, psi=psi)
