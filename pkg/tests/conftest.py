import math

import numpy as np
import pytest

from se3opt import (
    BodyParams,
    GravityParams,
    RigidBodyState,
    default_dumbbell,
    reference_gravity,
)


@pytest.fixture(scope="session")
def gravity():
    return reference_gravity()


@pytest.fixture(scope="session")
def no_gravity():
    return GravityParams(mu=0.0)


@pytest.fixture(scope="session")
def dumbbell():
    """Small dumbbell: gravity-gradient torque is weak but resolvable."""
    return default_dumbbell()


@pytest.fixture(scope="session")
def big_dumbbell():
    """Larger dumbbell used by the maneuver scenarios."""
    return default_dumbbell(length=0.3, sphere_radius=0.1)


@pytest.fixture(scope="session")
def point_mass():
    return BodyParams(m=1.0, J=1e-4 * np.eye(3), rho=np.zeros((2, 3)))


def circular_state(mu, radius=1.0, Pi=None):
    """State on the counterclockwise circular orbit of the given radius."""
    v = math.sqrt(mu / radius)
    return RigidBodyState(
        np.eye(3),
        [radius, 0.0, 0.0],
        np.zeros(3) if Pi is None else Pi,
        [0.0, radius * 0.0 + v, 0.0],
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
