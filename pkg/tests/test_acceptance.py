"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""

from __future__ import annotations

import time
from pathlib import Path

import numpy as np
import pytest
from oracles import rk4

from suspension_limit.cli import main
from suspension_limit.clusters import advance_clustered
from suspension_limit.core import IntegratorControls, MicroState
from suspension_limit.diagnostics import distance_certificate, energy_check, invariant_drifts
from suspension_limit.harness import congestion_profile, convergence_study, gamma_sweep, pde_params
from suspension_limit.initializer import build_initial_state
from suspension_limit.integrator import advance, step
from suspension_limit.macro_solver import pde_solve, transport
from suspension_limit.scenarios import GAMMA_SWEEP, PRESET_MU, initial_profiles, preset_config

SWEEP = (25, 50, 100, 200)
SCENARIOS = ("case1", "case2a", "case2b", "case3")


@pytest.fixture
def report(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[criterion {number}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    return emit


class _Runs:
    """Particle runs shared between criteria, keyed by (scenario, N, T)."""

    def __init__(self):
        self.cache = {}
        self.seconds = {}

    def get(self, name, n, T):
        key = (name, n, T)
        if key not in self.cache:
            cfg = preset_config(name, n, horizon=T)
            start = time.perf_counter()
            self.cache[key] = advance(build_initial_state(cfg)[0], cfg)
            self.seconds[key] = time.perf_counter() - start
        return self.cache[key]


@pytest.fixture(scope="module")
def runs():
    return _Runs()


def test_criterion_1_energy_inequality(runs, report):
    worst, slowest, ok = np.inf, 0.0, True
    for n in SWEEP:
        traj = runs.get("case1", n, 0.5)
        led = energy_check(traj)
        ok &= led.passed and traj.config.force.is_zero
        worst = min(worst, float(np.min(led.margin + led.tolerance)))
        slowest = max(slowest, runs.seconds[("case1", n, 0.5)])
    ok &= slowest < 60.0
    report(1, "energy inequality, case1 N=25..200 T=0.5", ok,
           f"min(margin + tol) = {worst:.3e}, slowest run {slowest:.1f} s")
    assert ok


def test_criterion_2_non_contact(runs, report):
    details, ok = [], True
    for name in SCENARIOS:
        lows = np.array([distance_certificate(runs.get(name, n, 0.5)).min_gap_over_eps
                         for n in SWEEP])
        spread = lows.max() / lows.min()
        ok &= bool(np.all(lows > 0.0) and spread <= 2.0)
        details.append(f"{name} min d/eps {lows.min():.3f} spread {spread:.3f}")
    report(2, "non-contact with N-independent lower envelope", ok, "; ".join(details))
    assert ok


def test_criterion_3_increment_scaling(runs, report):
    eps, inc = [], []
    for n in SWEEP:
        traj = runs.get("case3", n, 0.2)
        eps.append(traj.frames[0].eps)
        inc.append(float(np.max(traj.step_log.max_increment)))
    slope = float(np.polyfit(np.log(eps), np.log(inc), 1)[0])
    ok = 1.8 <= slope <= 2.2
    report(3, "increment scaling, case3 T=0.2", ok,
           f"log-log slope {slope:.3f}, inc/eps^2 = "
           + ", ".join(f"{i / e ** 2:.1f}" for i, e in zip(inc, eps)))
    assert ok


def test_criterion_4_hydrodynamic_convergence(report):
    start = time.perf_counter()
    table = convergence_study(preset_config("case1", SWEEP[0], horizon=0.2), SWEEP, 800)
    seconds = time.perf_counter() - start
    trend = table.trend()
    ok = trend["rho_decreasing"] and trend["u_decreasing"] and seconds < 300.0
    rho = ", ".join(f"{e:.2e}" for e in table.column("err_rho_L1"))
    u = ", ".join(f"{e:.2e}" for e in table.column("err_u_L2"))
    report(4, "case1 particle vs M=800 continuum at T=0.2", ok,
           f"err_rho_L1 [{rho}], err_u_L2 [{u}], flagged {trend['rho_non_monotone_pairs']}, "
           f"{seconds:.0f} s")
    assert ok


@pytest.fixture(scope="module")
def macro400():
    out = {}
    for name in SCENARIOS:
        cfg = preset_config(name)
        out[name] = pde_solve(cfg.init, pde_params(cfg), 400, 1.0)
    return out


def test_criterion_5_qualitative_reproduction(macro400, report):
    c1 = congestion_profile(macro400["case1"])
    c2a = congestion_profile(macro400["case2a"])
    c2b = congestion_profile(macro400["case2b"])
    _, sweep = gamma_sweep(initial_profiles("case1"), GAMMA_SWEEP, PRESET_MU, 400, 1.0)
    checks = {
        "a": float(np.max(np.abs(macro400["case1"].frames[-1].rho - 0.7))) <= 0.05,
        "b": (c2a["peak"] >= 0.9 and c2a["peak"] <= 1 - 1e-4
              and c2a["sag_after_formation"] is not None and c2a["sag_after_formation"] <= 0.01),
        "c": (abs(c2b["peak_time"] - 0.2) <= 0.05 and c2b["drop_time"] is not None
              and c1["drop_time"] is not None and c2b["drop_time"] > c1["drop_time"]),
        "d": sweep["strictly_decreasing"],
    }
    ok = all(checks.values())
    report(5, "continuum qualitative behaviour", ok,
           f"(a) case1 dev {c1['final_deviation']:.4f}; "
           f"(b) case2a peak {c2a['peak']:.4f} sag {c2a['sag_after_formation']}; "
           f"(c) case2b peak t={c2b['peak_time']:.3f} drop {c2b['drop_time']} vs case1 {c1['drop_time']}; "
           f"(d) max rho {[round(v, 4) for v in sweep['max_rho']]}; "
           + " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in checks.items()))
    assert ok


def _random_state(rng, n=5, eps=0.05, umax=0.1):
    gaps = rng.uniform(0.5, 1.5, n)
    gaps *= (1 - 2 * eps * n) / gaps.sum()
    q = np.concatenate([[0.0], np.cumsum(gaps + 2 * eps)])
    q[-1] = 1.0
    u = rng.uniform(-umax, umax, n + 1)
    u[0] = u[-1] = 0.0
    return MicroState(0.0, eps, q, u, rng.uniform(0.0, 2.0, n) * gaps.mean())


def _transport_error(M, T=0.1):
    bump = lambda x: 0.6 + 0.3 * np.exp(-((x - 0.4) / 0.1) ** 2)  # noqa: E731
    faces, cells = np.arange(M + 1) / M, (np.arange(M) + 0.5) / M
    u = np.sin(np.pi * faces)
    u[0] = u[-1] = 0.0
    rho, rs = np.full(M, 0.5), bump(cells)
    steps = int(np.ceil(T * M / 0.4))
    for _ in range(steps):
        rho, rs = transport(rho, rs, u, T / steps)
    x0 = 2 / np.pi * np.arctan(np.tan(np.pi * cells / 2) * np.exp(-np.pi * T))
    return float(np.mean(np.abs(rs - bump(x0))))


def test_criterion_6_oracle_equivalences(report):
    rng = np.random.default_rng(6)
    cfg = preset_config("case1", 5).with_(mu=1.0, gamma=2.0)
    rk_err = 0.0
    for _ in range(10):
        s = _random_state(rng)
        new = step(s, cfg, 1e-6)
        _, u_ref = rk4(s.q, s.u, s.dstar, s.eps, 1.0, 2.0, 1e-9, 1000)
        rk_err = max(rk_err, float(np.max(np.abs(new.u - u_ref))))

    # one constant C = 0.3 bounds error / dx at every resolution
    tr = [_transport_error(M) * M for M in (100, 200, 400, 800)]
    transport_ok = max(tr) <= 0.3

    c = preset_config("case1", 40, horizon=0.3,
                      integrator=IntegratorControls(dt_init=1e-3,
                                                    output_times=tuple(np.linspace(0, 0.3, 7))))
    s, _ = build_initial_state(c)
    plain, clustered = advance(s, c), advance_clustered(s, c)
    cl_err = max(max(np.max(np.abs(a.q - b.q)), np.max(np.abs(a.u - b.u)))
                 for a, b in zip(plain.frames, clustered.frames))

    ok = rk_err <= 1e-8 and transport_ok and cl_err <= 1e-12
    report(6, "oracle equivalences", ok,
           f"step vs RK4 {rk_err:.2e}; transport L1/dx {[round(v, 4) for v in tr]}; "
           f"singleton clusters vs plain {cl_err:.1e}")
    assert ok


def test_criterion_7_exact_invariants(runs, macro400, report):
    worst = {"mass": 0.0, "gap_sum": 0.0, "dstar_multiset": 0.0}
    for name in SCENARIOS:
        for n in SWEEP:
            for k, v in invariant_drifts(runs.get(name, n, 0.5)).items():
                worst[k] = max(worst[k], v)
    sols = list(macro400.values())
    sols += list(gamma_sweep(initial_profiles("case1"), GAMMA_SWEEP, PRESET_MU, 400, 1.0)[0].values())
    macro = max(float(np.max(np.abs(s.mass_hist - s.mass_hist[0]))) for s in sols)
    ok = max(worst.values()) <= 1e-10 and macro <= 1e-10
    report(7, "exact invariants on every shipped run", ok,
           ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + f", macro mass {macro:.1e}")
    assert ok


def _snapshot(directory: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(directory.iterdir())}


def test_criterion_8_determinism(tmp_path, report):
    first, second = tmp_path / "a", tmp_path / "b"
    codes = [main(["run", "case1", "--seed", "7", "--out", str(d)]) for d in (first, second)]
    a, b = _snapshot(first), _snapshot(second)
    differing = sorted(k for k in a if a[k] != b.get(k))
    ok = codes == [0, 0] and a.keys() == b.keys() and not differing and len(a) > 0
    report(8, "run case1 --seed 7 is byte-identical", ok,
           f"{len(a)} files, {sum(map(len, a.values())) / 1e6:.1f} MB, differing {differing}")
    assert ok
