"""Scenario runs, particle-to-continuum convergence studies and plot-data export."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .clusters import advance_clustered, detect_clusters
from .core import ConfigError, MicroState, SimConfig, Trajectory, validate_config
from .diagnostics import certify
from .initializer import build_initial_state
from .integrator import advance
from .macro_fields import (PiecewiseConstant, PiecewiseLinear, critical_density_field,
                           density_field, l1_distance, l2_distance, sample_profile,
                           velocity_field_u, write_csv)
from .macro_solver import PdeParams, PdeSolution, pde_solve
from .scenarios import GAMMA_SWEEP, PRESET_MU, PRESETS, initial_profiles, preset_config

COMPARE_TIME = 0.2
FRAME_SPACING = 0.05
CONGESTED = 0.9


class CertificateFailure(RuntimeError):
    """A finished run did not pass its diagnostics."""


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1) + "\n"


def output_grid(T: float, extra=()) -> tuple[float, ...]:
    """Frame times every FRAME_SPACING up to T, plus T and any extra times."""
    n = int(np.floor(T / FRAME_SPACING + 1e-9))
    times = {round(k * FRAME_SPACING, 12) for k in range(n + 1)} | {float(T)}
    times |= {float(t) for t in extra if 0.0 <= t <= T}
    return tuple(sorted(times))


def pde_params(cfg: SimConfig) -> PdeParams:
    return PdeParams(cfg.mu, cfg.gamma, cfg.force, pressure=cfg.repulsion)


def macro_pieces(sol: PdeSolution, t: float) -> tuple[PiecewiseConstant, PiecewiseConstant,
                                                      PiecewiseLinear]:
    f = sol.frame_at(t)
    edges = f.faces
    return (PiecewiseConstant(edges, f.rho), PiecewiseConstant(edges, f.rhostar),
            PiecewiseLinear(edges, f.u))


def field_errors(state: MicroState, sol: PdeSolution, t: float) -> tuple[float, float, float]:
    """(L1 rho, L1 rho*, L2 u) between the particle fields and the continuum solution at t."""
    rho, rs, u = macro_pieces(sol, t)
    return (l1_distance(density_field(state), rho), l1_distance(critical_density_field(state), rs),
            l2_distance(velocity_field_u(state), u))


# ---------------------------------------------------------------- convergence


@dataclass
class ConvergenceTable:
    rows: list[dict]
    reference: dict
    columns: tuple[str, ...] = ("N", "eps", "err_rho_L1", "err_rhostar_L1", "err_u_L2",
                                "min_gap_over_eps", "energy_margin")

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def trend(self) -> dict:
        """err_rho_L1 must decrease along N with at most one flagged pair; err_u_L2 must decrease."""
        rho, u = self.column("err_rho_L1"), self.column("err_u_L2")
        Ns = [int(n) for n in self.column("N")]
        bad = [[Ns[k], Ns[k + 1]] for k in range(len(Ns) - 1) if not rho[k + 1] < rho[k]]
        return {"rho_non_monotone_pairs": bad, "rho_decreasing": len(bad) <= 1,
                "rho_strictly_decreasing": not bad,
                "u_decreasing": bool(np.all(np.diff(u) < 0.0))}

    def to_dict(self) -> dict:
        return {"columns": list(self.columns), "rows": self.rows, "reference": self.reference,
                "trend": self.trend()}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(self.columns)
            for r in self.rows:
                out.writerow([repr(r[c]) for c in self.columns])


def run_micro(cfg: SimConfig, clusters: bool = False) -> Trajectory:
    state, report = build_initial_state(cfg)
    return run_from_state(state, cfg, report.to_dict(), clusters)


def run_from_state(state: MicroState, cfg: SimConfig, init_report: dict | None = None,
                   clusters: bool = False) -> Trajectory:
    if clusters:
        traj = advance_clustered(state, cfg, detect_clusters(state))
    else:
        traj = advance(state, cfg)
    traj.init_report = init_report
    certify(traj)
    return traj


def convergence_study(cfg: SimConfig, N_list, M_ref: int, T: float | None = None,
                      reference: PdeSolution | None = None,
                      trajectories: dict | None = None) -> ConvergenceTable:
    """Particle runs for every N in N_list against one continuum solve with M_ref cells.

    ``trajectories`` (optional) receives the finished runs keyed by N.
    """
    N_list = [int(n) for n in N_list]
    if not N_list or any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ConfigError("N list must be strictly increasing")
    if M_ref < 2 * N_list[-1]:
        raise ConfigError("M_ref must be at least twice the largest N")
    T = cfg.horizon if T is None else T
    if reference is None:
        reference = pde_solve(cfg.init, pde_params(cfg), M_ref, T, output_times=(0.0, T))
    rows = []
    for n in N_list:
        c = cfg.with_(n_particles=n, horizon=T,
                      integrator=replace(cfg.integrator, output_times=(0.0, T)))
        traj = run_micro(validate_config(c))
        e_rho, e_rs, e_u = field_errors(traj.frames[-1], reference, T)
        rows.append({"N": n, "eps": traj.frames[0].eps, "err_rho_L1": e_rho,
                     "err_rhostar_L1": e_rs, "err_u_L2": e_u,
                     "min_gap_over_eps": traj.diagnostics["estimates"]["min_gap_over_eps"],
                     "energy_margin": traj.diagnostics["energy"]["min_margin"]})
        if trajectories is not None:
            trajectories[n] = traj
    ref = {"M": reference.frames[-1].M, "T": T, "mu": cfg.mu, "gamma": cfg.gamma,
           "pressure": cfg.repulsion}
    return ConvergenceTable(rows, ref)


# ---------------------------------------------------------------- congestion measures


def congestion_profile(sol: PdeSolution, drop: float = 0.05) -> dict:
    """Peak of max_x rho, the time it takes to fall by ``drop`` after the peak, and
    how far it sags after first reaching the congested level."""
    t, h = sol.t_hist, sol.max_rho_hist
    k = int(np.argmax(h))
    fallen = np.nonzero(h[k:] <= h[k] - drop)[0]
    out = {"peak": float(h[k]), "peak_time": float(t[k]),
           "drop_time": float(t[k + fallen[0]] - t[k]) if fallen.size else None,
           "final_deviation": float(np.max(np.abs(sol.frames[-1].rho - sol.frames[0].rho.mean()))),
           "clamp_count": sol.clamp_count,
           "mass_drift": float(np.max(np.abs(sol.mass_hist - sol.mass_hist[0])))}
    formed = np.nonzero(h >= CONGESTED)[0]
    if formed.size:
        after = h[formed[0]:]
        out["formation_time"] = float(t[formed[0]])
        out["sag_after_formation"] = float(np.max(np.maximum.accumulate(after) - after))
    else:
        out["formation_time"] = None
        out["sag_after_formation"] = None
    return out


def gamma_sweep(init, gammas, mu: float, M: int, T: float, pressure: bool = True):
    sols = {g: pde_solve(init, PdeParams(mu, g, pressure=pressure), M, T) for g in gammas}
    peaks = [float(sols[g].max_rho_hist.max()) for g in gammas]
    return sols, {"gamma": list(gammas), "max_rho": peaks,
                  "strictly_decreasing": bool(np.all(np.diff(peaks) < 0.0))}


# ---------------------------------------------------------------- scenario runs


def place_clusters(state: MicroState, count: int, seed: int) -> MicroState:
    """Glue ``count`` randomly chosen neighbour pairs (i, i+1) into contact.

    Particle i+1 slides onto particle i; the freed length goes to the next gap, so the
    walls and the total gap length are untouched.
    """
    if count <= 0:
        return state
    rng = np.random.default_rng(seed)
    # i + 1 <= N - 1 keeps the wall particle fixed; spacing 3 keeps pairs disjoint
    candidates = np.arange(1, state.n - 1, 3)
    if count > candidates.size:
        raise ConfigError(f"at most {candidates.size} clusters fit")
    picks = np.sort(rng.choice(candidates, size=count, replace=False))
    q = state.q.copy()
    u = state.u.copy()
    for i in picks:
        q[i + 1] = q[i] + 2.0 * state.eps
        u[i] = u[i + 1] = 0.5 * (u[i] + u[i + 1])
    return state.with_(q=q, u=u)


@dataclass
class RunResult:
    out_dir: Path
    summary: dict
    trajectories: dict = field(default_factory=dict)
    macro: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.summary["certificates_passed"]


def _write(path: Path, text: str) -> Path:
    path.write_text(text)
    return path


def _particles_csv(traj: Trajectory, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("t", "i", "q", "u"))
        for f in traj.frames:
            for i in range(f.q.size):
                out.writerow((repr(f.time), i, repr(float(f.q[i])), repr(float(f.u[i]))))


def _macro_csv(sol: PdeSolution, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(("t", "x", "rho", "rhostar", "u"))
        for f in sol.frames:
            uc = 0.5 * (f.u[:-1] + f.u[1:])
            for x, r, rs, u in zip(f.cells, f.rho, f.rhostar, uc):
                out.writerow([repr(float(v)) for v in (f.time, x, r, rs, u)])


def run_scenario(name: str, out_dir, N_list=(50, 100, 200), M: int = 400, T: float = 1.0,
                 gammas=None, mu: float = PRESET_MU, pressure: bool | None = None,
                 clusters: int = 0, seed: int = 0, particles_csv: bool = False,
                 config: SimConfig | None = None) -> RunResult:
    """Run a preset (or an explicit config) and write every artifact into ``out_dir``.

    Particle runs for each N, one continuum solve with M cells (one per gamma for the
    gamma sweep), field CSVs, certificates and the convergence table at t = 0.2.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if config is None and name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    summary = {"scenario": name, "seed": seed, "T": T, "M": M, "mu": mu}
    result = RunResult(out, summary)
    t_cmp = min(COMPARE_TIME, T)

    if name == "gamma-sweep":
        gammas = tuple(gammas) if gammas else GAMMA_SWEEP
        summary["pressure"] = True if pressure is None else pressure
        sols, verdict = gamma_sweep(initial_profiles(name), gammas, mu, M, T, summary["pressure"])
        for g, sol in sols.items():
            _write(out / f"macro_gamma{g:g}.json", dumps(sol.to_dict()))
            result.macro[g] = sol
        summary["gamma_sweep"] = verdict
        summary["certificates_passed"] = True
        _write(out / "summary.json", dumps(summary))
        return result

    if config is None:
        gamma = gammas[0] if gammas else None
        base = preset_config(name, N_list[0], T, mu, gamma, pressure)
    else:
        base = config.with_(horizon=T) if T != config.horizon else config
        N_list = (config.n_particles,) if not N_list else N_list
    times = output_grid(T, base.integrator.output_times)
    base = base.with_(integrator=replace(base.integrator, output_times=times))
    summary.update(mu=base.mu, gamma=base.gamma, pressure=base.repulsion, N=list(N_list),
                   config=base.to_dict())

    sol = pde_solve(base.init, pde_params(base), M, T, output_times=times)
    result.macro[base.gamma] = sol
    _write(out / f"macro_M{M}.json", dumps(sol.to_dict()))
    _macro_csv(sol, out / f"macro_M{M}.csv")
    summary["macro"] = congestion_profile(sol)

    rows, all_ok = [], True
    for n in N_list:
        cfg = validate_config(base.with_(n_particles=int(n)))
        state, report = build_initial_state(cfg)
        state = place_clusters(state, clusters, seed)
        traj = run_from_state(state, cfg, report.to_dict(), clusters > 0)
        result.trajectories[int(n)] = traj
        all_ok &= traj.diagnostics["passed"]
        _write(out / f"micro_N{n}.json", dumps(traj.to_dict()))
        grid = np.linspace(0.0, 1.0, M + 1)
        write_csv([sample_profile(f, cfg, grid) for f in traj.frames], out / f"fields_N{n}.csv")
        if particles_csv:
            _particles_csv(traj, out / f"particles_N{n}.csv")
        frame = next(f for f in traj.frames if f.time == t_cmp)
        e_rho, e_rs, e_u = field_errors(frame, sol, t_cmp)
        rows.append({"N": int(n), "eps": state.eps, "err_rho_L1": e_rho, "err_rhostar_L1": e_rs,
                     "err_u_L2": e_u,
                     "min_gap_over_eps": traj.diagnostics["estimates"]["min_gap_over_eps"],
                     "energy_margin": traj.diagnostics["energy"]["min_margin"]})
    table = ConvergenceTable(rows, {"M": M, "T": t_cmp, "mu": base.mu, "gamma": base.gamma,
                                    "pressure": base.repulsion})
    _write(out / "convergence.json", dumps(table.to_dict()))
    table.write_csv(out / "convergence.csv")
    gaps = [r["min_gap_over_eps"] for r in rows]
    summary["convergence"] = table.trend()
    summary["min_gap_envelope_ratio"] = max(gaps) / min(gaps)
    summary["certificates"] = {str(n): t.diagnostics["passed"]
                               for n, t in result.trajectories.items()}
    summary["certificates_passed"] = bool(all_ok)
    _write(out / "summary.json", dumps(summary))
    return result


# ---------------------------------------------------------------- plot data


def _micro_cell_average(field: PiecewiseConstant, edges: np.ndarray) -> np.ndarray:
    pts = np.union1d(field.edges, edges)
    mid = 0.5 * (pts[:-1] + pts[1:])
    cum = np.concatenate([[0.0], np.cumsum(field(mid) * np.diff(pts))])
    at = np.interp(edges, pts, cum)
    return np.diff(at) / np.diff(edges)


def emit_plot_data(run_dir, times, out_dir=None, N: int | None = None) -> list[Path]:
    """Per requested time, one CSV aligning particle and continuum fields on the cells.

    Columns: x, rho_micro, rho_macro, rhostar, u, plus rhostar_micro and u_micro
    (rhostar and u are the continuum values).
    """
    run_dir = Path(run_dir)
    out_dir = run_dir if out_dir is None else Path(out_dir)
    times = [float(t) for t in times]
    if not times:
        return []
    summary = json.loads((run_dir / "summary.json").read_text())
    T = summary["T"]
    if any(t < 0.0 or t > T for t in times):
        raise ValueError("time out of range")
    if "N" not in summary:
        raise ValueError("run has no particle trajectories to plot")
    N = max(summary["N"]) if N is None else N
    traj = Trajectory.from_dict(json.loads((run_dir / f"micro_N{N}.json").read_text()))
    macro = json.loads((run_dir / f"macro_M{summary['M']}.json").read_text())
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for t in times:
        micro = next((f for f in traj.frames if abs(f.time - t) <= 1e-12), None)
        frame = next((f for f in macro["frames"] if abs(f["t"] - t) <= 1e-12), None)
        if micro is None or frame is None:
            raise ValueError(f"no stored frame at t = {t:g}")
        rho = np.asarray(frame["rho"])
        M = rho.size
        edges = np.linspace(0.0, 1.0, M + 1)
        x = 0.5 * (edges[:-1] + edges[1:])
        u_faces = np.asarray(frame["u"])
        cols = {"x": x,
                "rho_micro": _micro_cell_average(density_field(micro), edges),
                "rho_macro": rho,
                "rhostar": np.asarray(frame["rhostar"]),
                "u": 0.5 * (u_faces[:-1] + u_faces[1:]),
                "rhostar_micro": _micro_cell_average(critical_density_field(micro), edges),
                "u_micro": velocity_field_u(micro)(x)}
        path = out_dir / f"plot_t{t:g}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(cols)
            for k in range(M):
                w.writerow([repr(float(cols[c][k])) for c in cols])
        paths.append(path)
    return paths
