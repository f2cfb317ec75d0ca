from __future__ import annotations

import numpy as np
import pytest
from conftest import random_state
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import rk4

from suspension_limit.core import IntegratorControls, MicroState, check_state
from suspension_limit.diagnostics import energy_check
from suspension_limit.initializer import build_initial_state
from suspension_limit.integrator import (IntegrationAborted, StepRejected, advance,
                                         solve_velocities, step)
from suspension_limit.micro_dynamics import repulsion_from_gaps
from suspension_limit.scenarios import preset_config

seeds = st.integers(min_value=0, max_value=2**32 - 1)


def _cfg(n, **kw):
    return preset_config("case1", n).with_(**kw)


def test_equilibrium_is_fixed_point():
    n, eps = 10, 0.035
    s = MicroState(0.0, eps, np.arange(n + 1) / n, np.zeros(n + 1), np.full(n, 0.02))
    for dt in (1e-6, 1e-2, 10.0):
        new = step(s, _cfg(n, gamma=2.0), dt)
        assert np.allclose(new.q, s.q, atol=1e-15) and np.allclose(new.u, 0.0, atol=1e-15)


def test_single_particle_pushed_toward_larger_gap():
    eps = 0.1
    s = MicroState(0.0, eps, [0.0, 0.4, 1.0], [0.0, 0.0, 0.0], [0.1, 0.1])
    new = step(s, _cfg(2), 1e-3)
    assert new.u[1] > 0


def test_step_matches_rk4_oracle(rng):
    # the scheme's local error grows with |u|; small velocities keep it below 1e-8
    for _ in range(3):
        s = random_state(rng, n=5, umax=0.1)
        cfg = _cfg(5, mu=1.0, gamma=2.0)
        new = step(s, cfg, 1e-6)
        _, u_ref = rk4(s.q, s.u, s.dstar, s.eps, 1.0, 2.0, 1e-9, 1000)
        assert np.max(np.abs(new.u - u_ref)) <= 1e-8


def test_step_keeps_walls_and_constants(rng):
    s = random_state(rng, n=8, eps=0.03)
    new = step(s, _cfg(8, gamma=1.5), 1e-3)
    assert new.q[0] == 0.0 and new.q[-1] == 1.0 and new.u[0] == 0.0 and new.u[-1] == 0.0
    assert np.array_equal(new.dstar, s.dstar) and new.eps == s.eps


def test_step_rejects_instead_of_committing_contact():
    eps = 0.1
    s = MicroState(0.0, eps, [0.0, 0.21, 0.6, 1.0], [0.0, -5.0, 0.0, 0.0], [0.0, 0.0, 0.0])
    with pytest.raises(StepRejected) as err:
        step(s, _cfg(3, mu=1e-3, repulsion=False), 0.1)
    assert err.value.index == 1


@given(seeds, st.floats(1e-6, 10.0))
@settings(max_examples=40)
def test_velocity_solve_contracts_without_forces(seed, dt):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n=int(rng.integers(2, 25)), eps=0.01)
    cfg = _cfg(s.n, mu=rng.uniform(0.01, 2.0), repulsion=False)
    u = solve_velocities(s, cfg, dt)
    assert np.linalg.norm(u) <= np.linalg.norm(s.u) * (1 + 1e-12)


@given(seeds)
@settings(max_examples=20, deadline=None)
def test_discrete_maximum_principle(seed):
    rng = np.random.default_rng(seed)
    s = random_state(rng, n=int(rng.integers(2, 25)), eps=0.01)
    cfg = _cfg(s.n, mu=rng.uniform(0.01, 2.0), gamma=rng.uniform(1.0, 5.0))
    dt = 10 ** rng.uniform(-6, -2)
    G = repulsion_from_gaps(s.d, s.dstar, s.eps, cfg.gamma)
    b = G[:-1] - G[1:]
    u = solve_velocities(s, cfg, dt)
    bound = dt * np.max(np.abs(b)) / (2 * s.eps)
    assert u.max() <= max(s.u.max(), 0.0) + bound + 1e-12
    assert u.min() >= min(s.u.min(), 0.0) - bound - 1e-12


def test_case1_run_keeps_gaps_positive_and_conserves_gap_sum():
    cfg = preset_config("case1", 50, horizon=0.5,
                        integrator=IntegratorControls(dt_init=1e-3, output_times=tuple(np.linspace(0, 0.5, 11))))
    state, _ = build_initial_state(cfg)
    traj = advance(state, cfg)
    assert len(traj.frames) == 11 and traj.frames[-1].time == 0.5
    assert traj.step_log.min_gap.min() > 0
    total = 1 - 2 * state.eps * 50
    for f in traj.frames:
        check_state(f)
        assert abs(f.d.sum() - total) < 1e-12


def test_energy_non_increasing_without_force():
    cfg = preset_config("case1", 50, horizon=0.5)
    traj = advance(build_initial_state(cfg)[0], cfg)
    log = traj.step_log
    e = log.kinetic + log.potential + log.dissipation
    assert np.all(np.diff(e) <= 1e-8 * e[0])
    assert energy_check(traj).passed


def test_richardson_first_order():
    cfg = preset_config("case1", 20, horizon=0.05)
    s0, _ = build_initial_state(cfg)

    def run(n):
        s = s0
        for _ in range(n):
            s = step(s, cfg, 0.05 / n)
        return np.concatenate([s.q, s.u])

    sols = [run(n) for n in (50, 100, 200, 400)]
    errs = [np.max(np.abs(a - b)) for a, b in zip(sols, sols[1:])]
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    assert np.all((ratios >= 1.9) & (ratios <= 2.1)), ratios


def test_adaptive_run_matches_fine_fixed_steps():
    cfg = preset_config("case1", 20, horizon=0.1,
                        integrator=IntegratorControls(dt_init=1e-4, output_times=(0.1,)))
    s0, _ = build_initial_state(cfg)
    traj = advance(s0, cfg)
    s = s0
    for _ in range(1000):
        s = step(s, cfg, 1e-4)
    assert np.max(np.abs(traj.frames[-1].u - s.u)) < 1e-10


def test_rejection_halves_dt_and_recovers():
    # strongly closing pair: the first attempts at dt_init violate the gap floor
    eps = 0.05
    q = [0.0, 0.3, 0.42, 1.0]
    s = MicroState(0.0, eps, q, [0.0, 3.0, -3.0, 0.0], [0.0, 0.0, 0.0])
    cfg = _cfg(3, mu=0.05, gamma=1.0, horizon=0.05,
               integrator=IntegratorControls(dt_init=1e-2, cfl_safety=1.0, du_tol=10.0))
    traj = advance(s, cfg)
    assert traj.step_log.dt[1] < 1e-2
    assert traj.step_log.min_gap.min() > 0


def test_abort_reports_gap_and_time():
    eps = 0.05
    s = MicroState(0.0, eps, [0.0, 0.3, 0.42, 1.0], [0.0, 3.0, -3.0, 0.0], [0.0, 0.0, 0.0])
    cfg = _cfg(3, mu=0.05, horizon=0.05,
               integrator=IntegratorControls(dt_init=1e-2, dt_min=5e-3, cfl_safety=1.0,
                                             du_tol=1e-6))
    with pytest.raises(IntegrationAborted) as err:
        advance(s, cfg)
    assert err.value.time == 0.0 and err.value.index in (1, 2, 3)


@pytest.mark.parametrize("n", [25, 50, 100, 200])
def test_distance_brackets_independent_of_n(n):
    cfg = preset_config("case1", n, horizon=0.5)
    traj = advance(build_initial_state(cfg)[0], cfg)
    eps = traj.frames[0].eps
    lo = traj.step_log.min_gap.min() / eps
    hi = max(f.d.max() for f in traj.frames) / eps
    assert 0.2 < lo < 6 / 7 + 1e-12
    assert 6 / 7 - 1e-12 <= hi < 2.0
