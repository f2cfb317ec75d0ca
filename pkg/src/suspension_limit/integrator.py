"""Semi-implicit time stepping of the particle system with adaptive step control.

One step solves (2 eps/dt I + A(q^n)) u^{n+1} = (2 eps/dt) u^n + b(q^n) + 2 eps fbar(t^n, q^n)
and then moves q^{n+1} = q^n + dt u^{n+1}: lubrication implicit, repulsion and forcing
explicit. The system matrix is an M-matrix, so the velocity update obeys a discrete
maximum principle.
"""

from __future__ import annotations

import numpy as np

from .core import MicroState, SimConfig, StepLog, Trajectory
from .micro_dynamics import assemble, repulsion_from_gaps

_DOUBLE_AFTER = 5
_SLIVER = 1e-9


class StepRejected(RuntimeError):
    def __init__(self, index: int, reason: str):
        self.index = index
        super().__init__(f"step rejected at gap {index}: {reason}")


class IntegrationAborted(RuntimeError):
    """dt fell below dt_min; ``index`` names the gap that kept forcing rejections."""

    def __init__(self, index: int, time: float, dt: float):
        self.index = index
        self.time = time
        self.dt = dt
        super().__init__(f"dt = {dt:.3e} below dt_min at t = {time:.6g} (gap {index})")


def kinetic_energy(state: MicroState) -> float:
    return float(state.eps * np.sum(state.u ** 2))


def potential_energy(d, dstar, eps: float, gamma: float) -> float:
    """Primitive of the repulsion summed over gaps; the log form covers gamma = 1."""
    d, dstar = np.asarray(d), np.asarray(dstar)
    if gamma == 1.0:
        return float(np.sum((dstar + 2 * eps) * np.log((dstar + 2 * eps) / (d + 2 * eps))))
    G = repulsion_from_gaps(d, dstar, eps, gamma)
    return float(np.sum((d + 2 * eps) * G) / (gamma - 1.0))


def solve_velocities(state: MicroState, cfg: SimConfig, dt: float) -> np.ndarray:
    """Implicit velocity update, boundary entries pinned to zero."""
    fa = assemble(state, cfg)
    shift = 2.0 * state.eps / dt
    rhs = shift * state.u[1:-1] + fa.b + 2.0 * state.eps * fa.fbar
    u = np.zeros_like(state.u)
    u[1:-1] = fa.A.solve_shifted(shift, rhs)
    return u


def step(state: MicroState, cfg: SimConfig, dt: float) -> MicroState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    u = solve_velocities(state, cfg, dt)
    q = state.q + dt * u
    d = np.diff(q) - 2.0 * state.eps
    k = int(np.argmin(d))
    if d[k] <= 0.0:
        raise StepRejected(k + 1, f"gap would become {d[k]:.3e}")
    return MicroState(state.time + dt, state.eps, q, u, state.dstar)


class ParticleSystem:
    """Plain system: every gap is free and every interior particle moves on its own.

    The adaptive driver only talks to this interface, so the cluster system can
    substitute its reduced step and its own notion of which gaps are free.
    """

    def __init__(self, cfg: SimConfig, n: int):
        self.cfg = cfg
        self.free = np.arange(n)  # indices into the length-N gap vector

    def step(self, state: MicroState, dt: float) -> MicroState:
        return step(state, self.cfg, dt)

    def free_gaps(self, state: MicroState) -> np.ndarray:
        return (np.diff(state.q) - 2.0 * state.eps)[self.free]

    def free_jumps(self, state: MicroState) -> np.ndarray:
        return np.diff(state.u)[self.free]

    def repulsion(self, state: MicroState) -> np.ndarray:
        if not self.cfg.repulsion:
            return np.zeros(self.free.size)
        return repulsion_from_gaps(self.free_gaps(state), state.dstar[self.free],
                                   state.eps, self.cfg.gamma)

    def potential(self, state: MicroState) -> float:
        if not self.cfg.repulsion:
            return 0.0
        return potential_energy(self.free_gaps(state), state.dstar[self.free], state.eps,
                                self.cfg.gamma)


class _LogBuilder:
    def __init__(self, system: ParticleSystem, state: MicroState):
        self.system = system
        self.rows = []
        self.totals = np.zeros(4)  # dissipation, f_l1_sq, dxG_int, f_sup_int
        self._append(state, 0.0)

    def _append(self, state, dt):
        d = self.system.free_gaps(state)
        inc = float(np.max(np.abs(np.diff(d)))) if d.size > 1 else 0.0
        min_gap = float(d.min()) if d.size else np.inf
        self.rows.append((state.time, dt, min_gap, float(np.max(np.abs(state.u))),
                          kinetic_energy(state), self.system.potential(state), *self.totals, inc))

    def commit(self, old: MicroState, new: MicroState, dt: float):
        cfg = self.system.cfg
        d_mid = 0.5 * (self.system.free_gaps(old) + self.system.free_gaps(new))
        jumps = self.system.free_jumps(new)
        G = self.system.repulsion(old)
        slope = float(np.max(np.abs(np.diff(G)))) / (2.0 * old.eps) if G.size > 1 else 0.0
        self.totals += dt * np.array([
            0.25 * cfg.mu * float(np.sum(jumps ** 2 / d_mid)),
            cfg.force.l1_norm(old.time) ** 2,
            slope,
            cfg.force.sup_norm(old.time),
        ])
        self._append(new, dt)

    def build(self) -> StepLog:
        cols = np.array(self.rows, dtype=float).T
        return StepLog(*cols)


def _interpolate(a: MicroState, b: MicroState, t: float) -> MicroState:
    if t == b.time:
        return b
    if t == a.time:
        return a
    s = (t - a.time) / (b.time - a.time)
    return MicroState(t, a.eps, (1 - s) * a.q + s * b.q, (1 - s) * a.u + s * b.u, a.dstar)


def _closing_cap(d: np.ndarray, jumps: np.ndarray, safety: float) -> tuple[float, int]:
    """Largest dt closing no gap by more than ``safety`` of itself, and the limiting gap."""
    with np.errstate(divide="ignore"):
        times = np.where(jumps < 0.0, d / -jumps, np.inf)
    if times.size == 0:
        return np.inf, 0
    k = int(np.argmin(times))
    return safety * float(times[k]), k


def drive(system: ParticleSystem, state: MicroState, cfg: SimConfig) -> Trajectory:
    """Adaptive integration from ``state`` to cfg.horizon.

    A trial step is rejected and dt halved when a free gap would fall below
    gap_floor_frac of its current value or a velocity would change by more than
    du_tol; dt doubles (capped at dt_init) after five accepted steps in a row.
    """
    ic = cfg.integrator
    T = cfg.horizon
    out_times = list(ic.output_times) or [state.time, T]
    frames: list[MicroState] = []
    k_out = 0
    while k_out < len(out_times) and out_times[k_out] <= state.time:
        frames.append(state)
        k_out += 1

    log = _LogBuilder(system, state)
    dt = ic.dt_init
    streak = 0
    culprit = 0
    while state.time < T:
        d_old = system.free_gaps(state)
        cap, k_cap = _closing_cap(d_old, system.free_jumps(state), ic.cfl_safety)
        trial = min(dt, cap)
        # absorb a rounding sliver into the final step instead of taking it separately
        last = trial * (1.0 + _SLIVER) >= T - state.time
        if last:
            trial = T - state.time
        elif trial < ic.dt_min:
            raise IntegrationAborted(int(system.free[k_cap]) + 1, state.time, trial)
        try:
            new = system.step(state, trial)
            ratio = system.free_gaps(new) / d_old
            k = int(np.argmin(ratio)) if ratio.size else 0
            if ratio.size and ratio[k] < ic.gap_floor_frac:
                raise StepRejected(int(system.free[k]) + 1, "gap floor")
            if np.max(np.abs(new.u - state.u)) > ic.du_tol:
                raise StepRejected(int(np.argmax(np.abs(new.u - state.u))), "velocity change")
        except StepRejected as exc:
            culprit = exc.index
            dt = 0.5 * trial
            streak = 0
            if dt < ic.dt_min:
                raise IntegrationAborted(culprit, state.time, dt) from exc
            continue
        if last:
            new = new.with_(time=T)
        log.commit(state, new, trial)
        while k_out < len(out_times) and out_times[k_out] <= new.time:
            frames.append(_interpolate(state, new, out_times[k_out]))
            k_out += 1
        state = new
        streak += 1
        if streak >= _DOUBLE_AFTER:
            dt = min(2.0 * dt, ic.dt_init)
            streak = 0
    return Trajectory(cfg, frames, log.build())


def advance(state: MicroState, cfg: SimConfig) -> Trajectory:
    return drive(ParticleSystem(cfg, state.n), state, cfg)
