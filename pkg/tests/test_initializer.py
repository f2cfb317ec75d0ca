from __future__ import annotations

import numpy as np
import pytest
from oracles import dense_cdf_partition, dense_mean

from suspension_limit.core import ConfigError
from suspension_limit.initializer import (Primitive, assign_critical_distances,
                                          build_initial_state, partition_positions,
                                          sample_velocities)
from suspension_limit.macro_fields import density_field
from suspension_limit.profiles import Profile
from suspension_limit.scenarios import preset_config

BUMP = dict(center=0.5, width=0.1)
RHO3 = Profile.gaussian(0.6, 0.2, **BUMP)
RS3 = Profile.gaussian(0.6, -0.2, **BUMP)


def test_constant_density_gives_uniform_positions():
    q = partition_positions(Profile.constant(0.7), 10)
    assert np.array_equal(q, np.arange(11) / 10)
    d = np.diff(q) - 2 * 0.035
    assert np.allclose(d, 0.03, atol=1e-15)


@pytest.mark.parametrize("n", [7, 50, 400])
def test_constant_gap_equals_lower_bound(n):
    eps = 0.7 / (2 * n)
    d = np.diff(partition_positions(Profile.constant(0.7), n)) - 2 * eps
    assert np.allclose(d, 0.3 / n, rtol=0, atol=1e-15)
    assert np.allclose(d, 2 * eps * (1 / 0.7 - 1), rtol=0, atol=1e-15)


def test_case3_cell_masses_match_dense_oracle():
    n = 100
    q = partition_positions(RHO3, n)
    q_ref, m0 = dense_cdf_partition(RHO3, n)
    eps = m0 / (2 * n)
    # masses computed by a separate dense quadrature on each cell
    masses = np.array([dense_mean(RHO3, a, b) * (b - a) for a, b in zip(q[:-1], q[1:])])
    assert np.max(np.abs(masses - 2 * eps)) < 1e-10
    assert np.max(np.abs(q - q_ref)) < 1e-9


def test_case3_gap_bounds():
    n = 100
    cfg = preset_config("case3", n)
    state, report = build_initial_state(cfg)
    d = state.d
    eps = state.eps
    assert np.all(np.diff(state.q) > 0)
    assert np.all(d >= 2 * eps * (1 / 0.8 - 1) - 1e-14)
    assert np.all(d <= 2 * eps * (1 / 0.4 - 1) + 1e-14)
    assert report.c0 >= 2 * (1 / 0.8 - 1) - 1e-12


def test_mass_identity():
    state, _ = build_initial_state(preset_config("case3", 64))
    rho = 2 * state.eps / np.diff(state.q)
    m0 = Primitive(RHO3, 1 << 16).total
    assert abs(np.sum(rho * np.diff(state.q)) - m0) < 1e-10


def test_critical_distances_examples():
    q = np.arange(11) / 10
    assert np.all(assign_critical_distances(Profile.constant(1.0), q, 0.035) == 0.0)
    ds = assign_critical_distances(Profile.constant(0.7), q, 0.035)
    assert np.allclose(ds, 0.03, rtol=0, atol=1e-15)


def test_case3_critical_distances_match_oracle_and_scale():
    incs = []
    for n in (50, 100, 200):
        state, report = build_initial_state(preset_config("case3", n))
        q, eps = state.q, state.eps
        m = np.array([dense_mean(RS3, a, b) for a, b in zip(q[:-1], q[1:])])
        assert np.allclose(state.dstar, 2 * eps * (1 / m - 1), rtol=0, atol=1e-12)
        assert np.all(state.dstar >= 0) and np.all(state.dstar <= 2 * eps * (1 / 0.4 - 1))
        incs.append((eps, report.max_inc_dstar))
    eps, inc = np.array(incs).T
    slope = np.polyfit(np.log(eps), np.log(inc), 1)[0]
    assert 1.8 <= slope <= 2.2
    assert np.all(inc <= 4 * eps ** 2 * np.max(inc / eps ** 2))


def test_case3_gap_increment_scaling():
    rows = []
    for n in (50, 100, 200):
        state, report = build_initial_state(preset_config("case3", n))
        rows.append((state.eps, report.max_inc_d))
    eps, inc = np.array(rows).T
    slope = np.polyfit(np.log(eps), np.log(inc), 1)[0]
    assert 1.8 <= slope <= 2.2


def test_sample_velocities():
    q = np.linspace(0, 1, 5)
    assert np.all(sample_velocities(Profile.constant(0.0), q) == 0)
    u = sample_velocities(Profile.sinusoid(0.5), q)
    assert np.allclose(u, [0, 0.5, 0, -0.5, 0], atol=1e-15)
    assert u[0] == 0 and u[-1] == 0


def test_case1_initial_state():
    state, report = build_initial_state(preset_config("case1", 50))
    assert state.eps == pytest.approx(0.007)
    assert np.allclose(state.d, 0.006, atol=1e-15)
    assert np.allclose(state.dstar, 0.006, atol=1e-15)
    assert report.max_inc_d == pytest.approx(0.0, abs=1e-15)
    assert report.max_inc_dstar == pytest.approx(0.0, abs=1e-15)
    assert report.c0 == pytest.approx(6 / 7)
    s100, _ = build_initial_state(preset_config("case1", 100))
    assert np.max(np.abs(s100.u)) <= 0.5


def test_case2b_critical_distances_vanish():
    state, _ = build_initial_state(preset_config("case2b", 40))
    assert np.all(state.dstar == 0.0)


@pytest.mark.parametrize("name", ["case1", "case3"])
def test_initial_density_close_to_profile(name):
    """sup |rho^eps(0) - rho0| <= L0 2 eps / delta."""
    for n in (25, 100):
        cfg = preset_config(name, n)
        state, _ = build_initial_state(cfg)
        x = np.linspace(0, 1, 20001)
        err = np.max(np.abs(density_field(state)(x) - cfg.init.rho0(x)))
        bound = cfg.init.rho0.lipschitz() * 2 * state.eps / cfg.init.delta
        assert err <= bound + 1e-12


def test_invalid_profiles_rejected():
    with pytest.raises(ConfigError, match="negative gap"):
        partition_positions(Profile.constant(1.0), 5)
    with pytest.raises(ConfigError, match="negative gap"):
        partition_positions(Profile.tabulated([0, 0.5, 1], [0.5, 1.8, 0.5]), 20)
    with pytest.raises(ConfigError):
        assign_critical_distances(Profile.constant(1.5), np.linspace(0, 1, 5), 0.1)
