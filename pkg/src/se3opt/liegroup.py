"""Exact SO(3) primitives: hat/vee isomorphisms, exponential and logarithm.

All functions are pure and operate on plain numpy arrays.  Rotations are
3x3 matrices; no quaternions or Euler angles anywhere.  Attitude drift is
diagnosed, never repaired: ``check_rotation`` validates but does not
re-orthonormalize.
"""

import math

import numpy as np

from .errors import NotSkewError

SKEW_TOL = 1e-10
ROTATION_TOL = 1e-10

# series switch points for the removable singularities of exp/log
_SMALL_ANGLE = 1e-4
_NEAR_PI = 1e-3


def hat(v):
    """Skew-symmetric matrix of ``v``, satisfying hat(v) @ w == cross(v, w)."""
    v0, v1, v2 = (float(v[0]), float(v[1]), float(v[2]))
    return np.array([[0.0, -v2, v1], [v2, 0.0, -v0], [-v1, v0, 0.0]])


def vee(m):
    """Inverse of :func:`hat`.

    Raises :class:`NotSkewError` if the symmetric part of ``m`` exceeds
    ``SKEW_TOL`` in any entry.
    """
    m = np.asarray(m, dtype=float)
    sym = 0.5 * (m + m.T)
    worst = float(np.abs(sym).max())
    if worst > SKEW_TOL:
        raise NotSkewError(
            f"matrix is not skew-symmetric: symmetric part has magnitude {worst:.3e}"
        )
    return np.array([m[2, 1] - m[1, 2], m[0, 2] - m[2, 0], m[1, 0] - m[0, 1]]) * 0.5


def _exp_coeffs(theta):
    """Rodrigues coefficients (sin t / t, (1 - cos t) / t^2)."""
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / (theta * theta)
    return a, b


def exp_so3(v):
    """Rotation exp(hat(v)) by the closed-form Rodrigues formula."""
    v = np.asarray(v, dtype=float)
    theta = math.sqrt(float(v @ v))
    a, b = _exp_coeffs(theta)
    S = hat(v)
    return np.eye(3) + a * S + b * (S @ S)


def log_so3(r):
    """Rotation vector of ``r`` with norm <= pi.

    Uses the series expansion of theta/sin(theta) below ``_SMALL_ANGLE`` and
    an axis extraction from the symmetrized matrix near theta = pi, where the
    antisymmetric part degenerates.
    """
    r = np.asarray(r, dtype=float)
    s = np.array([r[2, 1] - r[1, 2], r[0, 2] - r[2, 0], r[1, 0] - r[0, 1]]) * 0.5
    c = 0.5 * (np.trace(r) - 1.0)
    c = min(1.0, max(-1.0, c))

    sn = math.sqrt(float(s @ s))
    if c > math.cos(_SMALL_ANGLE):
        # theta from asin is well conditioned near zero
        theta = math.asin(min(1.0, sn))
        t2 = theta * theta
        factor = 1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0
        return factor * s
    if c < -math.cos(_NEAR_PI):
        # near pi: (sym(r) - c I) / (1 - c) equals axis * axis^T exactly
        B = (0.5 * (r + r.T) - c * np.eye(3)) / (1.0 - c)
        i = int(np.argmax(np.diag(B)))
        axis = B[:, i] / math.sqrt(float(B[:, i] @ B[:, i]))
        if float(axis @ s) < 0.0:
            axis = -axis
        theta = math.pi - math.asin(min(1.0, sn))
        return theta * axis
    theta = math.acos(c)
    return (theta / sn) * s


def right_jacobian(v):
    """Right-trivialized tangent of exp_so3.

    Satisfies exp_so3(v + d) == exp_so3(v) @ exp_so3(right_jacobian(v) @ d)
    to first order in d.
    """
    v = np.asarray(v, dtype=float)
    theta = math.sqrt(float(v @ v))
    if theta < _SMALL_ANGLE:
        t2 = theta * theta
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
        c = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0
    else:
        b = (1.0 - math.cos(theta)) / (theta * theta)
        c = (theta - math.sin(theta)) / (theta * theta * theta)
    S = hat(v)
    return np.eye(3) - b * S + c * (S @ S)


def rotation_defect(r):
    """Frobenius norm of R^T R - I (group-structure drift diagnostic)."""
    r = np.asarray(r, dtype=float)
    return float(np.linalg.norm(r.T @ r - np.eye(3)))


def check_rotation(r, tol=ROTATION_TOL):
    """Validate that ``r`` lies on SO(3); returns it as a float array.

    Never re-orthonormalizes: a matrix that drifted off the group is a
    defect to surface, not to hide.
    """
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3):
        raise ValueError(f"rotation must be 3x3, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise ValueError("rotation has non-finite entries")
    defect = rotation_defect(r)
    if defect > tol:
        raise ValueError(f"matrix is not orthonormal: ||R^T R - I|| = {defect:.3e}")
    if np.linalg.det(r) <= 0.0:
        raise ValueError("matrix has non-positive determinant (not a rotation)")
    return r
