"""Well-prepared discrete initial data from macroscopic profiles.

Every cell [q_{i-1}, q_i] carries the same mass 2 eps of rho0, with eps = M0 / (2N);
critical distances make rho*_i equal to the cell mean of rho*0; velocities are sampled
at the particle centres.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .core import ConfigError, MicroState, SimConfig
from .profiles import Profile

_BISECT_TOL = 1e-13


class Primitive:
    """Cumulative integral x -> int_0^x g on [0, 1] of a profile g.

    Composite Simpson on a dense grid gives the node values; inside a grid interval the
    partial integral is again one Simpson panel, so evaluation costs O(1) per point.
    """

    def __init__(self, profile: Profile, n_intervals: int):
        self.profile = profile
        self.x = np.linspace(0.0, 1.0, n_intervals + 1)
        a, b = self.x[:-1], self.x[1:]
        panel = (b - a) / 6.0 * (profile(a) + 4.0 * profile(0.5 * (a + b)) + profile(b))
        self.nodes = np.concatenate([[0.0], np.cumsum(panel)])

    @property
    def total(self) -> float:
        return float(self.nodes[-1])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        k = np.clip(np.searchsorted(self.x, x, side="right") - 1, 0, self.x.size - 2)
        a = self.x[k]
        g = self.profile
        partial = (x - a) / 6.0 * (g(a) + 4.0 * g(0.5 * (a + x)) + g(x))
        return self.nodes[k] + partial

    def invert(self, levels) -> np.ndarray:
        """Positions x with F(x) = level, by vectorised bisection to 1e-13 in x."""
        levels = np.asarray(levels, dtype=float)
        if np.any(levels < 0.0) or np.any(levels > self.total * (1 + 1e-14)):
            raise ValueError("mass level not bracketed in [0, M0]")
        # bracket each level between consecutive grid nodes, then bisect inside
        k = np.clip(np.searchsorted(self.nodes, levels, side="right") - 1, 0, self.x.size - 2)
        lo, hi = self.x[k].copy(), self.x[k + 1].copy()
        while np.max(hi - lo) > _BISECT_TOL:
            mid = 0.5 * (lo + hi)
            below = self(mid) < levels
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def mean(self, a, b) -> np.ndarray:
        a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
        return (self(b) - self(a)) / (b - a)


def _grid_size(n: int) -> int:
    return max(64 * n, 4096)


def total_mass(rho0: Profile, n: int = 1) -> float:
    if rho0.is_constant:
        return float(rho0.params["value"])
    return Primitive(rho0, _grid_size(n)).total


def partition_positions(rho0: Profile, n: int) -> np.ndarray:
    """Positions q0[0..N] with int_{q0[i-1]}^{q0[i]} rho0 = 2 eps, eps = M0 / (2N)."""
    if rho0.is_constant:
        value = rho0.params["value"]
        if value >= 1.0:
            raise ConfigError("negative gap: rho0 >= 1")
        return np.arange(n + 1) / n
    prim = Primitive(rho0, _grid_size(n))
    m0 = prim.total
    levels = m0 * np.arange(1, n) / n
    q = np.concatenate([[0.0], prim.invert(levels), [1.0]])
    if np.any(np.diff(q) <= 0):
        raise ConfigError("positions not strictly increasing: rho0 must be positive")
    eps = m0 / (2 * n)
    if np.any(np.diff(q) - 2 * eps <= 0):
        raise ConfigError("negative gap: rho0 > 1 somewhere")
    return q


def cell_means(profile: Profile, q: np.ndarray) -> np.ndarray:
    if profile.is_constant:
        return np.full(q.size - 1, profile.params["value"])
    return Primitive(profile, _grid_size(q.size - 1)).mean(q[:-1], q[1:])


def assign_critical_distances(rhostar0: Profile, q0: np.ndarray, eps: float) -> np.ndarray:
    """d*_{0,i} = 2 eps (1/m_i - 1), m_i the mean of rho*0 over cell i."""
    m = cell_means(rhostar0, q0)
    if np.any(m <= 0.0) or np.any(m > 1.0 + 1e-12):
        raise ConfigError("rhostar0 cell mean outside (0, 1]")
    return np.maximum(2.0 * eps * (1.0 / np.minimum(m, 1.0) - 1.0), 0.0)


def sample_velocities(u0: Profile, q0: np.ndarray) -> np.ndarray:
    u = np.asarray(u0(q0), dtype=float)
    u[0] = u[-1] = 0.0
    return u


@dataclass(frozen=True)
class InitReport:
    eps: float
    c0: float
    C0: float
    max_inc_d: float
    max_inc_dstar: float

    def to_dict(self) -> dict:
        return asdict(self)


def build_initial_state(cfg: SimConfig) -> tuple[MicroState, InitReport]:
    n = cfg.n_particles
    ini = cfg.init
    q0 = partition_positions(ini.rho0, n)
    eps = total_mass(ini.rho0, n) / (2 * n)
    dstar = assign_critical_distances(ini.rhostar0, q0, eps)
    u = sample_velocities(ini.u0, q0)
    d = np.diff(q0) - 2 * eps
    report = InitReport(
        eps=eps,
        c0=float(d.min() / eps),
        C0=float(max(d.max(), dstar.max()) / eps),
        max_inc_d=float(np.max(np.abs(np.diff(d)))) if n > 1 else 0.0,
        max_inc_dstar=float(np.max(np.abs(np.diff(dstar)))) if n > 1 else 0.0,
    )
    return MicroState(0.0, eps, q0, u, dstar), report
