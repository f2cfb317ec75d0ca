"""Finite-difference solver for the continuum limit system

    d_t rho + d_x(rho u) = 0
    d_t(rho u) + d_x(rho u^2) - d_x(mu/(1 - rho) d_x u) + d_x (rho/rho*)^gamma = rho f
    d_t rho* + u d_x rho* = 0

on a staggered grid (cell densities, face velocities, u = 0 at both walls).
Each step is split: continuity, rho* transport, explicit momentum convection and
pressure, then an implicit solve for the singular viscosity.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import InitialProfiles
from .initializer import cell_means
from .micro_dynamics import solve_tridiagonal_spd
from .profiles import ForceSpec

CLAMP_ETA = 1e-6
RHO_FLOOR = 1e-10
CFL_SAFETY = 0.4


@dataclass(frozen=True)
class PdeParams:
    mu: float
    gamma: float
    force: ForceSpec = field(default_factory=ForceSpec.zero)
    pressure: bool = True
    # False freezes rho and rho* and drops the momentum flux: pure viscous relaxation
    convection: bool = True
    dt_max: float = 1e-2


@dataclass(frozen=True)
class PdeState:
    rho: np.ndarray
    rhostar: np.ndarray
    u: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        for name in ("rho", "rhostar", "u"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=float))
        if self.u.size != self.rho.size + 1 or self.rhostar.size != self.rho.size:
            raise ValueError("need len(u) == len(rho) + 1 == len(rhostar) + 1")
        self.u[0] = self.u[-1] = 0.0

    @property
    def M(self) -> int:
        return self.rho.size

    @property
    def dx(self) -> float:
        return 1.0 / self.M

    @property
    def cells(self) -> np.ndarray:
        return (np.arange(self.M) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return np.arange(self.M + 1) * self.dx

    @property
    def mass(self) -> float:
        return float(np.sum(self.rho) * self.dx)


def initial_state(init: InitialProfiles, M: int) -> PdeState:
    edges = np.linspace(0.0, 1.0, M + 1)
    return PdeState(cell_means(init.rho0, edges), cell_means(init.rhostar0, edges),
                    init.u0(edges), 0.0)


def pressure(rho, rhostar, gamma: float) -> np.ndarray:
    return (rho / rhostar) ** gamma


def cfl_dt(state: PdeState, params: PdeParams, safety: float = CFL_SAFETY) -> float:
    """safety * dx / (max |u| + c_max), c_max the largest pressure-wave speed."""
    if params.pressure:
        r = state.rho / state.rhostar
        c = float(np.max(np.sqrt(params.gamma * r ** (params.gamma - 1.0) / state.rhostar)))
    else:
        c = 0.0
    speed = max(float(np.max(np.abs(state.u))) + c, 1e-12)
    return min(safety * state.dx / speed, params.dt_max)


def _upwind_face_values(cell_values: np.ndarray, u_faces: np.ndarray) -> np.ndarray:
    """Value donated through each interior face by the upstream cell."""
    left, right = cell_values[:-1], cell_values[1:]
    return np.where(u_faces[1:-1] > 0.0, left, right)


def face_density(rho: np.ndarray) -> np.ndarray:
    return np.maximum(0.5 * (rho[:-1] + rho[1:]), RHO_FLOOR)


def viscous_solve(rho_face: np.ndarray, momentum: np.ndarray, rho_cell: np.ndarray, mu: float,
                  dt: float, dx: float) -> tuple[np.ndarray, int]:
    """Interior face velocities from rho_f u - dt/dx^2 [nu_R (u_R - u) - nu_L (u - u_L)] = m.

    The coefficient nu = mu / (1 - rho) lives on cells, where d_x u lives. Returns the
    velocities and the number of cells whose 1 - rho had to be clamped at CLAMP_ETA.
    """
    gap = 1.0 - rho_cell
    clamped = int(np.count_nonzero(gap < CLAMP_ETA))
    nu = mu / np.maximum(gap, CLAMP_ETA) * dt / dx ** 2
    u = solve_tridiagonal_spd(rho_face + nu[:-1] + nu[1:], -nu[1:-1], momentum)
    return u, clamped


def transport(rho: np.ndarray, rhostar: np.ndarray, u: np.ndarray,
              dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Upwind continuity (conservative) and rho* transport (non-conservative) for face velocities u."""
    dx = 1.0 / rho.size
    flux = np.zeros(rho.size + 1)
    flux[1:-1] = u[1:-1] * _upwind_face_values(rho, u)
    rho_new = rho - dt / dx * np.diff(flux)

    ubar = 0.5 * (u[:-1] + u[1:])
    back = np.diff(rhostar, prepend=rhostar[0])  # zero-gradient at the walls
    fwd = np.diff(rhostar, append=rhostar[-1])
    rs_new = rhostar - dt / dx * np.where(ubar > 0.0, ubar * back, ubar * fwd)
    return rho_new, rs_new


def pde_step(state: PdeState, params: PdeParams, dt: float) -> tuple[PdeState, int]:
    """One split step; returns the new state and the clamp activation count."""
    dx = state.dx
    rho, rs, u = state.rho, state.rhostar, state.u
    ui = u[1:-1]

    if params.convection:
        rho_new, rs_new = transport(rho, rs, u, dt)
    else:
        rho_new, rs_new = rho.copy(), rs.copy()

    m = face_density(rho) * ui
    if params.convection:
        mom_faces = np.zeros(state.M + 1)
        mom_faces[1:-1] = m
        ubar = 0.5 * (u[:-1] + u[1:])
        donor = np.where(ubar > 0.0, mom_faces[:-1], mom_faces[1:])
        m = m - dt / dx * np.diff(ubar * donor)
    if params.pressure:
        m = m - dt / dx * np.diff(pressure(rho, rs, params.gamma))
    if not params.force.is_zero:
        m = m + dt * face_density(rho) * params.force(state.time, state.faces[1:-1])

    ui_new, clamped = viscous_solve(face_density(rho_new), m, rho_new, params.mu, dt, dx)
    u_new = np.concatenate([[0.0], ui_new, [0.0]])
    return PdeState(rho_new, rs_new, u_new, state.time + dt), clamped


@dataclass
class PdeSolution:
    params: PdeParams
    frames: list[PdeState]
    t_hist: np.ndarray  # one entry per accepted step, starting at t = 0
    max_rho_hist: np.ndarray
    mass_hist: np.ndarray
    clamp_count: int

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames])

    def frame_at(self, t: float) -> PdeState:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.frames[k].time - t) > 1e-12:
            raise KeyError(f"no frame at t = {t}")
        return self.frames[k]

    def to_dict(self) -> dict:
        return {"params": {"mu": self.params.mu, "gamma": self.params.gamma,
                           "force": self.params.force.to_dict(), "pressure": self.params.pressure,
                           "dt_max": self.params.dt_max},
                "frames": [{"t": f.time, "rho": f.rho.tolist(), "rhostar": f.rhostar.tolist(),
                            "u": f.u.tolist()} for f in self.frames],
                "max_rho": {"t": self.t_hist.tolist(), "value": self.max_rho_hist.tolist()},
                "mass": self.mass_hist.tolist(), "clamp_count": self.clamp_count}


def pde_solve(init: InitialProfiles | PdeState, params: PdeParams, M: int, T: float,
              output_times=()) -> PdeSolution:
    state = init if isinstance(init, PdeState) else initial_state(init, M)
    targets = sorted(set(float(t) for t in output_times) | {T})
    if targets[0] < state.time or targets[-1] > T:
        raise ValueError("output times must lie in [0, T]")
    frames = [state] if targets[0] == state.time else []
    t_hist, max_rho, mass = [state.time], [float(state.rho.max())], [state.mass]
    clamps = 0
    for target in targets:
        if target == state.time:
            continue
        while state.time < target:
            dt = cfl_dt(state, params)
            last = dt * (1.0 + 1e-9) >= target - state.time
            if last:
                dt = target - state.time
            state, c = pde_step(state, params, dt)
            if last:
                state = PdeState(state.rho, state.rhostar, state.u, target)
            clamps += c
            t_hist.append(state.time)
            max_rho.append(float(state.rho.max()))
            mass.append(state.mass)
        frames.append(state)
    return PdeSolution(params, frames, np.array(t_hist), np.array(max_rho), np.array(mass), clamps)
