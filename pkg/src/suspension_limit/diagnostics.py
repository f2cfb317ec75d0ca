"""Certificates checked on finished trajectories: energy inequality, gap bounds,
velocity maximum principle and the exactly conserved quantities."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import Trajectory
from .macro_fields import density_field, total_variation
from .micro_dynamics import repulsion_from_gaps

ENERGY_REL_TOL = 1e-8
# first-order slack: c * max dt * (|E0| + source budget), with c = 1
ENERGY_SLACK = 1.0


@dataclass(frozen=True)
class EnergyLedger:
    t: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    dissipation_integral: np.ndarray
    source_budget: np.ndarray
    initial_energy: float
    tolerance: float
    log_potential: bool  # gamma = 1 uses the logarithmic primitive

    @property
    def total(self) -> np.ndarray:
        return self.kinetic + self.potential + self.dissipation_integral

    @property
    def margin(self) -> np.ndarray:
        """Room left in the inequality at every logged step (before the tolerance)."""
        return self.initial_energy + self.source_budget - self.total

    @property
    def passed(self) -> bool:
        return bool(np.all(self.margin >= -self.tolerance))

    def summary(self) -> dict:
        margin = self.margin[1:] if self.margin.size > 1 else self.margin
        k = int(np.argmin(margin)) + self.margin.size - margin.size
        return {"passed": self.passed, "initial_energy": self.initial_energy,
                "min_margin": float(self.margin[k]), "min_margin_time": float(self.t[k]),
                "tolerance": self.tolerance, "log_potential": self.log_potential,
                "dissipation_nondecreasing": bool(np.all(np.diff(self.dissipation_integral) >= 0))}


@dataclass(frozen=True)
class EstimateReport:
    min_gap_over_eps: float
    max_gap_over_eps: float
    max_increment_over_eps2: float
    max_abs_velocity: float
    max_abs_dxG: float
    tv_rho_max: float
    tv_rhostar_max: float

    def to_dict(self) -> dict:
        return asdict(self)


def free_gap_index(traj: Trajectory) -> np.ndarray:
    n = traj.frames[0].n
    if traj.clusters is None:
        return np.arange(n)
    return np.asarray(traj.clusters["heads"][1:], dtype=int) - 1


def gap_total(traj: Trajectory) -> float:
    """D_N = sum of all gaps, which equals 1 - 2 eps N at all times."""
    s = traj.frames[0]
    return 1.0 - 2.0 * s.eps * s.n


def energy_check(traj: Trajectory) -> EnergyLedger:
    cfg, log = traj.config, traj.step_log
    e0 = float(log.kinetic[0] + log.potential[0])
    source = log.f_l1_sq * gap_total(traj) / cfg.mu
    dt_max = float(np.max(log.dt)) if log.dt.size > 1 else 0.0
    scale = abs(e0) + float(source[-1])
    tol = ENERGY_REL_TOL * abs(e0) + ENERGY_SLACK * dt_max * scale
    return EnergyLedger(log.t, log.kinetic, log.potential, log.dissipation, source, e0, tol,
                        cfg.gamma == 1.0)


def distance_certificate(traj: Trajectory) -> EstimateReport:
    cfg, log = traj.config, traj.step_log
    eps = traj.frames[0].eps
    free = free_gap_index(traj)
    max_gap = tv_rho = tv_rs = dxg = 0.0
    for f in traj.frames:
        d = f.d[free]
        max_gap = max(max_gap, float(d.max()) if d.size else 0.0)
        cells = 2.0 * eps / (d + 2.0 * eps)
        tv_rho = max(tv_rho, total_variation(cells))
        tv_rs = max(tv_rs, total_variation(2.0 * eps / (f.dstar[free] + 2.0 * eps)))
        if cfg.repulsion and d.size > 1:
            G = repulsion_from_gaps(d, f.dstar[free], eps, cfg.gamma)
            dxg = max(dxg, float(np.max(np.abs(np.diff(G)))) / (2.0 * eps))
    return EstimateReport(float(np.min(log.min_gap)) / eps, max_gap / eps,
                          float(np.max(log.max_increment)) / eps ** 2,
                          float(np.max(log.max_abs_u)), dxg, tv_rho, tv_rs)


def velocity_certificate(traj: Trajectory) -> dict:
    """Discrete maximum principle: min u(0) - B(t) <= u_i(t) <= max u(0) + B(t),
    with B(t) the accumulated sup norms of the interaction slope and of the force."""
    log = traj.step_log
    u0 = traj.frames[0].u if traj.frames[0].time == log.t[0] else None
    B = log.dxG_int + log.f_sup_int
    hi = float(log.max_abs_u[0])
    ok_steps = bool(np.all(log.max_abs_u <= hi + B + 1e-12))
    worst = float(np.max(log.max_abs_u - hi - B))
    ok_frames = True
    if u0 is not None:
        lo_0, hi_0 = float(u0.min()), float(u0.max())
        for f in traj.frames:
            k = min(int(np.searchsorted(log.t, f.time)), log.t.size - 1)
            b = B[k]
            ok_frames &= bool(f.u.min() >= lo_0 - b - 1e-12 and f.u.max() <= hi_0 + b + 1e-12)
    return {"passed": ok_steps and ok_frames, "max_abs_velocity": float(np.max(log.max_abs_u)),
            "bound": float(hi + B[-1]), "worst_excess": worst}


def invariant_drifts(traj: Trajectory) -> dict:
    """Absolute drifts of quantities that are conserved exactly by construction."""
    s0 = traj.frames[0]
    m0 = 2.0 * s0.eps * s0.n
    d_total = gap_total(traj)
    rs0 = np.sort(s0.dstar)
    mass = gapsum = rs = 0.0
    for f in traj.frames:
        mass = max(mass, abs(density_field(f).integral() - m0))
        gapsum = max(gapsum, abs(float(np.sum(f.d)) - d_total))
        rs = max(rs, float(np.max(np.abs(np.sort(f.dstar) - rs0))))
    return {"mass": mass, "gap_sum": gapsum, "dstar_multiset": rs}


INVARIANT_TOL = 1e-10


def certify(traj: Trajectory) -> dict:
    """Run every certificate, attach the result to ``traj.diagnostics`` and return it."""
    energy = energy_check(traj).summary()
    dist = distance_certificate(traj)
    vel = velocity_certificate(traj)
    drifts = invariant_drifts(traj)
    invariants_ok = all(v <= INVARIANT_TOL for v in drifts.values())
    diag = {"energy": energy, "estimates": dist.to_dict(), "velocity": vel,
            "invariants": {**drifts, "passed": invariants_ok},
            "gaps_positive": dist.min_gap_over_eps > 0.0}
    diag["passed"] = bool(energy["passed"] and vel["passed"] and invariants_ok
                          and diag["gaps_positive"])
    traj.diagnostics = diag
    return diag


def summary_line(diag: dict) -> str:
    verdict = "PASS" if diag["passed"] else "FAIL"
    e, est = diag["energy"], diag["estimates"]
    return (f"{verdict} energy_margin={e['min_margin']:.3e} "
            f"min_gap/eps={est['min_gap_over_eps']:.4f} max|u|={diag['velocity']['max_abs_velocity']:.4f} "
            f"invariants={'ok' if diag['invariants']['passed'] else 'drift'}")
