import math

import numpy as np
import pytest

from armsense.frames import FULL_AVAILABILITY, HandSide, MotionType, SensorFrame
from armsense.rotations import euler_to_quaternion, gravity_from_euler, quaternion_inverse


def random_frame(rng: np.random.Generator, motion=MotionType.BICEP_CURLS, side=HandSide.LEFT,
                 respondent="S01", timestamp=None) -> SensorFrame:
    """A valid frame with consistent orientation channels and random sensor values."""
    euler = tuple(rng.uniform(-math.pi, math.pi, 3))
    q = euler_to_quaternion(euler)
    return SensorFrame(
        respondent=respondent,
        timestamp=float(rng.uniform(1e9, 2e9)) if timestamp is None else timestamp,
        accelerometer=tuple(rng.normal(0, 5, 3)),
        magnetometer=tuple(rng.normal(20, 10, 3)),
        gyroscope=tuple(rng.normal(0, 2, 3)),
        linear_accelerometer=tuple(rng.normal(0, 3, 3)),
        gravity=gravity_from_euler(euler),
        euler=euler,
        quaternion=q,
        inverse_quaternion=quaternion_inverse(q),
        relative_orientation=tuple(rng.normal(0, 1, 3)),
        motion_type=motion,
        side=side,
        availability_mask=FULL_AVAILABILITY,
    )


@pytest.fixture
def frame_rng():
    return np.random.Generator(np.random.PCG64(424242))


@pytest.fixture
def valid_frame(frame_rng):
    return random_frame(frame_rng)
