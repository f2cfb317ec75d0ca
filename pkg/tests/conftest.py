from __future__ import annotations

import numpy as np
import pytest

from suspension_limit.core import MicroState


def random_state(rng, n=5, eps=0.05, umax=0.5, dstar_scale=1.0, time=0.0):
    """State with positive random gaps summing to 1 - 2 eps n and pinned walls."""
    slack = 1.0 - 2 * eps * n
    gaps = rng.uniform(0.5, 1.5, n)
    gaps *= slack / gaps.sum()
    q = np.concatenate([[0.0], np.cumsum(gaps + 2 * eps)])
    q[-1] = 1.0
    u = rng.uniform(-umax, umax, n + 1)
    u[0] = u[-1] = 0.0
    dstar = dstar_scale * rng.uniform(0.0, 2.0, n) * slack / n
    return MicroState(time, eps, q, u, dstar)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
