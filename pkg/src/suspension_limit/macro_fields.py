"""Macroscopic fields reconstructed from a particle state.

Every field has an exact piecewise description: density, critical density and volume
fraction are piecewise constant on half-open intervals [a, b); the velocities u and v,
the strain w and the interaction field G are continuous and piecewise linear. Norms,
integrals and differences are computed from these descriptions, never from samples.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import MicroState, SimConfig
from .micro_dynamics import repulsion_from_gaps

CSV_COLUMNS = ("t", "x", "rho", "rhostar", "u", "v", "w", "G", "chi")


@dataclass(frozen=True)
class PiecewiseConstant:
    """values[k] on [edges[k], edges[k+1]); the last interval is closed at the right."""

    edges: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        values = np.asarray(self.values, dtype=float)
        keep = np.diff(edges) > 0.0  # drop empty intervals
        object.__setattr__(self, "edges", np.concatenate([edges[:1], edges[1:][keep]]))
        object.__setattr__(self, "values", values[keep])

    def __call__(self, x):
        k = np.searchsorted(self.edges, np.asarray(x, dtype=float), side="right") - 1
        return self.values[np.clip(k, 0, self.values.size - 1)]

    def integral(self) -> float:
        return float(np.sum(self.values * np.diff(self.edges)))

    def total_variation(self) -> float:
        return total_variation(self.values)

    def to_dict(self) -> dict:
        return {"kind": "piecewise_constant", "edges": self.edges.tolist(),
                "values": self.values.tolist()}


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous interpolant of (nodes, values); repeated nodes are merged."""

    nodes: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        values = np.asarray(self.values, dtype=float)
        keep = np.concatenate([[True], np.diff(nodes) > 0.0])
        object.__setattr__(self, "nodes", nodes[keep])
        object.__setattr__(self, "values", values[keep])

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.nodes, self.values)

    def integral(self) -> float:
        return float(np.sum(0.5 * (self.values[1:] + self.values[:-1]) * np.diff(self.nodes)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def to_dict(self) -> dict:
        return {"kind": "piecewise_linear", "nodes": self.nodes.tolist(),
                "values": self.values.tolist()}


def total_variation(cell_values) -> float:
    return float(np.sum(np.abs(np.diff(np.asarray(cell_values, dtype=float)))))


def l1_distance(a: PiecewiseConstant, b: PiecewiseConstant) -> float:
    """Exact L1 distance of two piecewise-constant fields on [0, 1]."""
    edges = np.union1d(a.edges, b.edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    return float(np.sum(np.abs(a(mid) - b(mid)) * np.diff(edges)))


def l2_distance(a: PiecewiseLinear, b: PiecewiseLinear) -> float:
    """Exact L2 distance of two continuous piecewise-linear fields on [0, 1]."""
    x = np.union1d(a.nodes, b.nodes)
    e = a(x) - b(x)
    h = np.diff(x)
    return float(np.sqrt(np.sum(h * (e[:-1] ** 2 + e[:-1] * e[1:] + e[1:] ** 2) / 3.0)))


def _footprint_nodes(state: MicroState) -> np.ndarray:
    """0, eps, q_1 - eps, q_1 + eps, ..., q_{N-1} + eps, 1 - eps, 1."""
    eps, qi = state.eps, state.q[1:-1]
    inner = np.column_stack([qi - eps, qi + eps]).ravel()
    return np.concatenate([[0.0, eps], inner, [1.0 - eps, 1.0]])


def _paired(values_on_particles: np.ndarray) -> np.ndarray:
    return np.repeat(values_on_particles, 2)


def density_field(state: MicroState) -> PiecewiseConstant:
    return PiecewiseConstant(state.q, 2.0 * state.eps / np.diff(state.q))


def critical_density_field(state: MicroState) -> PiecewiseConstant:
    return PiecewiseConstant(state.q, 2.0 * state.eps / (state.dstar + 2.0 * state.eps))


def velocity_field_u(state: MicroState) -> PiecewiseLinear:
    return PiecewiseLinear(state.q, state.u)


def velocity_field_v(state: MicroState) -> PiecewiseLinear:
    """u_i on every footprint P_i, linear across each gap with slope w_i."""
    return PiecewiseLinear(_footprint_nodes(state), _paired(state.u))


def _ramped(state: MicroState, per_gap: np.ndarray) -> PiecewiseLinear:
    """Gap values held constant between footprints, blended across each P_i, ramped to 0 at the walls."""
    values = np.concatenate([[0.0], _paired(per_gap), [0.0]])
    return PiecewiseLinear(_footprint_nodes(state), values)


def strain_rates_or_none(state: MicroState, contact_tol: float = 1e-12):
    d = np.diff(state.q) - 2.0 * state.eps
    if np.any(d <= contact_tol):
        return None
    return np.diff(state.u) / d


def strain_field_w(state: MicroState) -> PiecewiseLinear | None:
    """None when some gap is closed: inside a cluster the strain is not reconstructed."""
    w = strain_rates_or_none(state)
    return None if w is None else _ramped(state, w)


def repulsion_values(state: MicroState, cfg: SimConfig) -> np.ndarray:
    d = np.diff(state.q) - 2.0 * state.eps
    if not cfg.repulsion:
        return np.zeros_like(d)
    return repulsion_from_gaps(d, state.dstar, state.eps, cfg.gamma)


def interaction_field_G(state: MicroState, cfg: SimConfig) -> PiecewiseLinear:
    return _ramped(state, repulsion_values(state, cfg))


def volume_fraction(state: MicroState) -> PiecewiseConstant:
    edges = _footprint_nodes(state)
    values = np.tile([1.0, 0.0], state.n)  # P_0, gap 1, P_1, gap 2, ..., gap N
    return PiecewiseConstant(edges, np.concatenate([values, [1.0]]))


@dataclass(frozen=True)
class MacroProfile:
    time: float
    grid: np.ndarray
    rho: np.ndarray
    rhostar: np.ndarray
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    G: np.ndarray
    chi: np.ndarray

    def rows(self):
        for k, x in enumerate(self.grid):
            yield (self.time, x, self.rho[k], self.rhostar[k], self.u[k], self.v[k], self.w[k],
                   self.G[k], self.chi[k])


def exact_fields(state: MicroState, cfg: SimConfig) -> dict:
    return {"rho": density_field(state), "rhostar": critical_density_field(state),
            "u": velocity_field_u(state), "v": velocity_field_v(state),
            "w": strain_field_w(state), "G": interaction_field_G(state, cfg),
            "chi": volume_fraction(state)}


def sample_profile(state: MicroState, cfg: SimConfig, grid) -> MacroProfile:
    grid = np.asarray(grid, dtype=float)
    f = exact_fields(state, cfg)
    w = f["w"](grid) if f["w"] is not None else np.full_like(grid, np.nan)
    return MacroProfile(state.time, grid, f["rho"](grid), f["rhostar"](grid), f["u"](grid),
                        f["v"](grid), w, f["G"](grid), f["chi"](grid))


def write_csv(profiles, path) -> None:
    """One row per (time, grid point); w is left empty where it is not reconstructed."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_COLUMNS)
        for prof in profiles:
            for row in prof.rows():
                out.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {c: np.array([float(r[c]) if r[c] != "" else np.nan for r in rows]) for c in CSV_COLUMNS}


def exact_fields_json(state: MicroState, cfg: SimConfig, path=None) -> dict:
    doc = {"t": state.time,
           "fields": {k: (None if v is None else v.to_dict())
                      for k, v in exact_fields(state, cfg).items()}}
    if path is not None:
        Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
    return doc
