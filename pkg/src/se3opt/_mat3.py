"""Scalar 3-vector / 3x3-matrix helpers for the integrator hot loop.

Vectors are 3-tuples of floats, matrices are row-major 9-tuples.  These
exist because numpy's per-call overhead (~1 us) dominates a 3x3 workload;
long propagation runs go through this module, the public API converts at
the boundary.
"""

import math


def v3(a):
    """Any length-3 sequence -> float 3-tuple."""
    return (float(a[0]), float(a[1]), float(a[2]))


def m9(a):
    """Any 3x3 array -> row-major float 9-tuple."""
    return (
        float(a[0][0]), float(a[0][1]), float(a[0][2]),
        float(a[1][0]), float(a[1][1]), float(a[1][2]),
        float(a[2][0]), float(a[2][1]), float(a[2][2]),
    )


IDENTITY9 = (1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0)


def add3(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def sub3(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


def scale3(a, s):
    return (a[0] * s, a[1] * s, a[2] * s)


def neg3(a):
    return (-a[0], -a[1], -a[2])


def dot3(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def norm3(a):
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def cross3(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def mv(m, v):
    """m @ v."""
    return (
        m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
        m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
        m[6] * v[0] + m[7] * v[1] + m[8] * v[2],
    )


def mtv(m, v):
    """m^T @ v."""
    return (
        m[0] * v[0] + m[3] * v[1] + m[6] * v[2],
        m[1] * v[0] + m[4] * v[1] + m[7] * v[2],
        m[2] * v[0] + m[5] * v[1] + m[8] * v[2],
    )


def mm(a, b):
    """a @ b."""
    return (
        a[0] * b[0] + a[1] * b[3] + a[2] * b[6],
        a[0] * b[1] + a[1] * b[4] + a[2] * b[7],
        a[0] * b[2] + a[1] * b[5] + a[2] * b[8],
        a[3] * b[0] + a[4] * b[3] + a[5] * b[6],
        a[3] * b[1] + a[4] * b[4] + a[5] * b[7],
        a[3] * b[2] + a[4] * b[5] + a[5] * b[8],
        a[6] * b[0] + a[7] * b[3] + a[8] * b[6],
        a[6] * b[1] + a[7] * b[4] + a[8] * b[7],
        a[6] * b[2] + a[7] * b[5] + a[8] * b[8],
    )


def exp9(v):
    """Rodrigues rotation of a 3-tuple rotation vector, as a 9-tuple."""
    t2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2]
    theta = math.sqrt(t2)
    if theta < 1e-4:
        a = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
        b = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    else:
        a = math.sin(theta) / theta
        b = (1.0 - math.cos(theta)) / t2
    x, y, z = v
    xx, yy, zz = x * x, y * y, z * z
    xy, yz, zx = x * y, y * z, z * x
    return (
        1.0 - b * (yy + zz), b * xy - a * z, b * zx + a * y,
        b * xy + a * z, 1.0 - b * (xx + zz), b * yz - a * x,
        b * zx - a * y, b * yz + a * x, 1.0 - b * (xx + yy),
    )


def solve33(m, r):
    """Solve m @ x = r by Cramer's rule.  Returns None if det is zero."""
    c0 = m[4] * m[8] - m[5] * m[7]
    c1 = m[5] * m[6] - m[3] * m[8]
    c2 = m[3] * m[7] - m[4] * m[6]
    det = m[0] * c0 + m[1] * c1 + m[2] * c2
    if det == 0.0:
        return None
    inv = 1.0 / det
    x0 = (r[0] * c0
          + m[1] * (m[5] * r[2] - r[1] * m[8])
          + m[2] * (r[1] * m[7] - m[4] * r[2])) * inv
    x1 = (m[0] * (r[1] * m[8] - m[5] * r[2])
          + r[0] * c1
          + m[2] * (m[3] * r[2] - r[1] * m[6])) * inv
    x2 = (m[0] * (m[4] * r[2] - r[1] * m[7])
          + m[1] * (r[1] * m[6] - m[3] * r[2])
          + r[0] * c2) * inv
    return (x0, x1, x2)
