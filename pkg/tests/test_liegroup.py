import math

import numpy as np
import numpy.testing as npt
import pytest

from se3opt.errors import NotSkewError
from se3opt.liegroup import (
    check_rotation,
    exp_so3,
    hat,
    log_so3,
    right_jacobian,
    rotation_defect,
    vee,
)


def test_hat_on_basis_and_generic():
    npt.assert_array_equal(hat([1, 0, 0]),
                           [[0, 0, 0], [0, 0, -1], [0, 1, 0]])
    npt.assert_array_equal(hat([0, 0, 0]), np.zeros((3, 3)))
    npt.assert_array_equal(hat([1, 2, 3]),
                           [[0, -3, 2], [3, 0, -1], [-2, 1, 0]])


def test_hat_is_cross_product(rng):
    for _ in range(300):
        v = rng.uniform(-1, 1, 3)
        w = rng.uniform(-1, 1, 3)
        npt.assert_allclose(hat(v) @ w, np.cross(v, w), atol=1e-15)


def test_vee_inverts_hat_exactly(rng):
    for _ in range(100):
        v = rng.uniform(-10, 10, 3)
        npt.assert_array_equal(vee(hat(v)), v)
    npt.assert_array_equal(vee(np.zeros((3, 3))), np.zeros(3))


def test_vee_rejects_symmetric_part():
    m = hat([1.0, 2.0, 3.0])
    m[0, 1] += 2e-3  # symmetric part of magnitude 1e-3
    with pytest.raises(NotSkewError):
        vee(m)
    # within tolerance passes and returns the skew part
    m2 = hat([1.0, 2.0, 3.0])
    m2[0, 1] += 1e-11
    vee(m2)


def test_exp_identity_and_quarter_turn():
    npt.assert_array_equal(exp_so3([0, 0, 0]), np.eye(3))
    npt.assert_allclose(
        exp_so3([math.pi / 2, 0, 0]),
        [[1, 0, 0], [0, 0, -1], [0, 1, 0]],
        atol=1e-15,
    )


def test_exp_small_angle_series():
    v = np.array([1e-9, 0.0, 0.0])
    # independent small-angle oracle: I + hat(v) truncates at O(theta^2)
    oracle = np.eye(3) + hat(v)
    assert np.abs(exp_so3(v) - oracle).max() <= 1e-17


def test_exp_lands_on_group(rng):
    for _ in range(200):
        v = rng.uniform(-1, 1, 3) * math.pi
        assert rotation_defect(exp_so3(v)) < 1e-14


def test_log_identity_and_round_trip():
    npt.assert_array_equal(log_so3(np.eye(3)), np.zeros(3))
    v = np.array([0.3, -0.2, 0.1])
    npt.assert_allclose(log_so3(exp_so3(v)), v, atol=1e-13)


def test_log_half_turn():
    r = exp_so3([0, 0, math.pi])
    v = log_so3(r)
    assert abs(np.linalg.norm(v) - math.pi) < 1e-12
    assert abs(abs(v[2]) - math.pi) < 1e-12
    # the returned vector reproduces the input rotation
    npt.assert_allclose(exp_so3(v), r, atol=1e-12)


def test_log_exp_round_trip_over_ball(rng):
    for _ in range(400):
        u = rng.normal(size=3)
        u /= np.linalg.norm(u)
        theta = rng.uniform(0.0, math.pi)
        v = theta * u
        npt.assert_allclose(log_so3(exp_so3(v)), v, atol=1e-10)
    # the delicate limits explicitly
    for theta in (1e-12, 1e-8, 1e-5, 1e-4, math.pi - 1e-8, math.pi - 1e-4,
                  math.pi - 1e-2, math.pi):
        v = theta * np.array([0.48, -0.6, 0.64])
        npt.assert_allclose(log_so3(exp_so3(v)), v, atol=1e-10)


def test_log_norm_bounded_by_pi(rng):
    for _ in range(100):
        v = rng.normal(size=3)
        v *= rng.uniform(0, math.pi) / np.linalg.norm(v)
        assert np.linalg.norm(log_so3(exp_so3(v))) <= math.pi + 1e-12


def test_conjugation_identity(rng):
    # hat(R^T x) == R^T hat(x) R
    for _ in range(100):
        R = exp_so3(rng.uniform(-math.pi, math.pi, 3) * 0.9)
        x = rng.uniform(-2, 2, 3)
        npt.assert_allclose(hat(R.T @ x), R.T @ hat(x) @ R, atol=1e-13)


def test_right_jacobian_tangent_convention(rng):
    eps = 1e-7
    for _ in range(20):
        phi = rng.uniform(-1.5, 1.5, 3)
        d = rng.uniform(-1, 1, 3)
        lhs = exp_so3(phi + eps * d)
        rhs = exp_so3(phi) @ exp_so3(eps * (right_jacobian(phi) @ d))
        assert np.abs(lhs - rhs).max() < 50 * eps * eps


def test_check_rotation_validates_but_never_repairs():
    good = exp_so3([0.1, 0.2, 0.3])
    npt.assert_array_equal(check_rotation(good), good)
    bad = good.copy()
    bad[0, 0] += 1e-6
    with pytest.raises(ValueError):
        check_rotation(bad)
    reflection = np.diag([1.0, 1.0, -1.0])
    with pytest.raises(ValueError):
        check_rotation(reflection)
