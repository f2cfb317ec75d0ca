"""Forces of the particle model: gaps, roughness repulsion, lubrication matrix, forcing.

Interior particles are 1..N-1; vectors of length N-1 are indexed so that entry k
belongs to particle k+1. Gap and repulsion vectors have length N, entry k for the
pair (k, k+1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solveh_banded

from .core import ContactError, MicroState, SimConfig
from .profiles import ForceSpec

_SIMPSON_PANELS = 8


def gaps(state: MicroState) -> np.ndarray:
    d = state.d
    k = int(np.argmin(d))
    if d[k] <= 0.0:
        raise ContactError(k + 1, float(d[k]), state.time)
    return d


def repulsion_from_gaps(d, dstar, eps: float, gamma: float) -> np.ndarray:
    return ((dstar + 2.0 * eps) / (d + 2.0 * eps)) ** gamma


def repulsion(state: MicroState, gamma: float) -> np.ndarray:
    return repulsion_from_gaps(gaps(state), state.dstar, state.eps, gamma)


@dataclass(frozen=True)
class Tridiagonal:
    """Symmetric tridiagonal matrix stored by its diagonal and off-diagonal."""

    diag: np.ndarray
    off: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = self.diag * x
        y[:-1] += self.off * x[1:]
        y[1:] += self.off * x[:-1]
        return y

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def solve_shifted(self, shift: float, rhs) -> np.ndarray:
        """Solve (shift I + self) x = rhs."""
        return solve_tridiagonal_spd(self.diag + shift, self.off, rhs)


def solve_tridiagonal_spd(diag, off, rhs) -> np.ndarray:
    """Solve a symmetric positive definite tridiagonal system given by its two diagonals."""
    diag = np.asarray(diag, dtype=float)
    if diag.size == 1:
        return np.asarray(rhs, dtype=float) / diag
    ab = np.empty((2, diag.size))
    ab[0, 0] = 0.0
    ab[0, 1:] = off
    ab[1] = diag
    return solveh_banded(ab, rhs, check_finite=False)


def lubrication_from_gaps(d, mu: float) -> Tridiagonal:
    c = mu / np.asarray(d, dtype=float)
    return Tridiagonal(c[:-1] + c[1:], -c[1:-1])


def lubrication_matrix(state: MicroState, mu: float) -> Tridiagonal:
    return lubrication_from_gaps(gaps(state), mu)


def external_average(force: ForceSpec, state: MicroState, t: float) -> np.ndarray:
    """Mean of f(t, .) over each interior particle [q_i - eps, q_i + eps] (composite Simpson)."""
    qi = state.q[1:-1]
    if force.kind == "zero":
        return np.zeros_like(qi)
    if force.kind == "constant":
        return np.full_like(qi, force.params["value"])
    s = np.linspace(-1.0, 1.0, 2 * _SIMPSON_PANELS + 1)
    w = np.ones_like(s)
    w[1:-1:2], w[2:-1:2] = 4.0, 2.0
    w /= w.sum()
    x = qi[:, None] + state.eps * s[None, :]
    return force(t, x.ravel()).reshape(x.shape) @ w


def strain_rates(state: MicroState) -> np.ndarray:
    """w_i = (u_i - u_{i-1}) / d_i for every gap."""
    return np.diff(state.u) / gaps(state)


@dataclass(frozen=True)
class ForceAssembly:
    A: Tridiagonal
    G: np.ndarray
    b: np.ndarray
    fbar: np.ndarray


def assemble(state: MicroState, cfg: SimConfig, t: float | None = None) -> ForceAssembly:
    d = gaps(state)
    t = state.time if t is None else t
    if cfg.repulsion:
        G = repulsion_from_gaps(d, state.dstar, state.eps, cfg.gamma)
    else:
        G = np.zeros_like(d)
    return ForceAssembly(lubrication_from_gaps(d, cfg.mu), G, G[:-1] - G[1:],
                         external_average(cfg.force, state, t))


def rhs(state: MicroState, cfg: SimConfig, t: float | None = None) -> np.ndarray:
    """Accelerations of the interior particles: (-A u + b + 2 eps fbar) / (2 eps)."""
    fa = assemble(state, cfg, t)
    two_eps = 2.0 * state.eps
    return (-fa.A.matvec(state.u[1:-1]) + fa.b) / two_eps + fa.fbar
