"""Initial data with particles in contact: clusters move rigidly.

A cluster of n + 1 particles in mutual contact behaves as one body of mass 2(n + 1) eps.
Only the gaps between clusters are free; lubrication and repulsion act across them.
The cluster containing particle 0 (or N) is pinned to the wall.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import MicroState, SimConfig, Trajectory
from .integrator import ParticleSystem, StepRejected, drive
from .micro_dynamics import external_average, repulsion_from_gaps, solve_tridiagonal_spd

CONTACT_TOL = 1e-12


@dataclass(frozen=True)
class ClusterPartition:
    heads: np.ndarray  # first particle of each cluster, increasing
    sizes: np.ndarray  # particles per cluster (n_k + 1)

    def __post_init__(self):
        object.__setattr__(self, "heads", np.asarray(self.heads, dtype=int))
        object.__setattr__(self, "sizes", np.asarray(self.sizes, dtype=int))
        if self.heads[0] != 0 or np.any(np.diff(self.heads) != self.sizes[:-1]):
            raise ValueError("clusters must partition 0..N in order")

    @property
    def count(self) -> int:
        return self.heads.size

    @property
    def n(self) -> int:
        return int(self.heads[-1] + self.sizes[-1] - 1)

    @property
    def free_gaps(self) -> np.ndarray:
        """Indices (into the length-N gap vector) of the gaps between clusters."""
        return self.heads[1:] - 1

    @property
    def labels(self) -> np.ndarray:
        return np.repeat(np.arange(self.count), self.sizes)

    @property
    def all_singletons(self) -> bool:
        return bool(np.all(self.sizes == 1))

    def to_dict(self) -> dict:
        return {"heads": self.heads.tolist(), "sizes": self.sizes.tolist()}


def detect_clusters(state: MicroState, tol: float = CONTACT_TOL) -> ClusterPartition:
    d = np.diff(state.q) - 2.0 * state.eps
    if np.any(d < -tol):
        raise ValueError("overlapping particles")
    heads = np.concatenate([[0], np.nonzero(d > tol)[0] + 1])
    sizes = np.diff(np.append(heads, state.n + 1))
    return ClusterPartition(heads, sizes)


def fully_congested(partition: ClusterPartition) -> bool:
    return partition.count == 1


def cluster_velocities(state: MicroState, partition: ClusterPartition) -> np.ndarray:
    """Momentum-averaged velocity per cluster; wall clusters get 0."""
    sums = np.bincount(partition.labels, weights=state.u, minlength=partition.count)
    U = sums / partition.sizes
    U[0] = U[-1] = 0.0
    return U


def make_rigid(state: MicroState, partition: ClusterPartition) -> MicroState:
    """Project velocities so every member moves with its cluster."""
    U = cluster_velocities(state, partition)
    return state.with_(u=U[partition.labels])


def _cluster_forces(state: MicroState, partition: ClusterPartition, cfg: SimConfig, t: float):
    free = partition.free_gaps
    d = (np.diff(state.q) - 2.0 * state.eps)[free]
    k = int(np.argmin(d))
    if d[k] <= 0.0:
        raise StepRejected(int(free[k]) + 1, "clusters in contact")
    c = cfg.mu / d
    if cfg.repulsion:
        G = repulsion_from_gaps(d, state.dstar[free], state.eps, cfg.gamma)
    else:
        G = np.zeros_like(d)
    mass = 2.0 * state.eps * partition.sizes[1:-1]
    fbar_particles = np.concatenate([[0.0], external_average(cfg.force, state, t), [0.0]])
    fsum = np.bincount(partition.labels, weights=fbar_particles, minlength=partition.count)
    fbar = (fsum / partition.sizes)[1:-1]
    return c, G, mass, fbar


def cluster_rhs(state: MicroState, partition: ClusterPartition, cfg: SimConfig,
                t: float | None = None) -> np.ndarray:
    """Acceleration of each interior (non-wall) cluster."""
    t = state.time if t is None else t
    c, G, mass, fbar = _cluster_forces(state, partition, cfg, t)
    U = cluster_velocities(state, partition)
    dU = np.diff(U)  # across each free gap
    force = c[1:] * dU[1:] - c[:-1] * dU[:-1] + G[:-1] - G[1:]
    return force / mass + fbar


def cluster_step(state: MicroState, partition: ClusterPartition, cfg: SimConfig,
                 dt: float) -> MicroState:
    if partition.count < 3:  # nothing can move
        return state.with_(time=state.time + dt)
    c, G, mass, fbar = _cluster_forces(state, partition, cfg, state.time)
    U = cluster_velocities(state, partition)[1:-1]
    rhs = mass / dt * U + G[:-1] - G[1:] + mass * fbar
    U_inner = solve_tridiagonal_spd(mass / dt + c[:-1] + c[1:], -c[1:-1], rhs)
    U_new = np.concatenate([[0.0], U_inner, [0.0]])
    u = U_new[partition.labels]
    q = state.q + dt * u
    d = (np.diff(q) - 2.0 * state.eps)[partition.free_gaps]
    k = int(np.argmin(d))
    if d[k] <= 0.0:
        raise StepRejected(int(partition.free_gaps[k]) + 1, "clusters would touch")
    return MicroState(state.time + dt, state.eps, q, u, state.dstar)


class ClusterSystem(ParticleSystem):
    def __init__(self, cfg: SimConfig, partition: ClusterPartition):
        self.cfg = cfg
        self.partition = partition
        self.free = partition.free_gaps

    def step(self, state: MicroState, dt: float) -> MicroState:
        return cluster_step(state, self.partition, self.cfg, dt)


def advance_clustered(state: MicroState, cfg: SimConfig,
                      partition: ClusterPartition | None = None) -> Trajectory:
    partition = detect_clusters(state) if partition is None else partition
    state = make_rigid(state, partition)
    traj = drive(ClusterSystem(cfg, partition), state, cfg)
    traj.clusters = {**partition.to_dict(), "count": partition.count,
                     "fully_congested": fully_congested(partition),
                     "strain_inside_clusters": "not reconstructed"}
    return traj
