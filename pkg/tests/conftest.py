import numpy as np
import pytest

from balancelab.skeleton import desk_biped


@pytest.fixture(scope="session")
def biped():
    return desk_biped()


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


def random_pose_rows(skel, rng, n, pitch_scale=0.5):
    """Random in-limit configurations as (n, 3+J) rows."""
    t = skel.tables
    rows = np.zeros((n, skel.num_dof))
    rows[:, 0] = rng.uniform(-1.0, 1.0, n)
    rows[:, 1] = rng.uniform(0.3, 1.2, n)
    rows[:, 2] = rng.uniform(-pitch_scale, pitch_scale, n)
    rows[:, 3:] = rng.uniform(t.angle_lo, t.angle_hi, (n, skel.num_joints))
    return rows
