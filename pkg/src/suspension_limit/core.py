"""Shared domain types, configuration and config-file I/O."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .profiles import ForceSpec, Profile


class ConfigError(ValueError):
    """A configuration violates one of its invariants; the message names it."""


class ContactError(RuntimeError):
    """A gap between two neighbouring solid cores became non-positive."""

    def __init__(self, index: int, gap: float, time: float | None = None):
        self.index = index
        self.gap = gap
        self.time = time
        where = "" if time is None else f" at t={time:.6g}"
        super().__init__(f"non-positive gap d[{index}] = {gap:.3e}{where}")


def _frozen_array(a, dtype=float) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class MicroState:
    """Positions q[0..N], velocities u[0..N] and critical distances dstar[1..N] at one time.

    ``dstar[i-1]`` belongs to the pair (i-1, i), so ``dstar`` has length N and lines up
    with the gap vector returned by :func:`micro_dynamics.gaps`.
    """

    time: float
    eps: float
    q: np.ndarray
    u: np.ndarray
    dstar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "q", _frozen_array(self.q))
        object.__setattr__(self, "u", _frozen_array(self.u))
        object.__setattr__(self, "dstar", _frozen_array(self.dstar))
        if self.q.shape != self.u.shape or self.dstar.shape != (self.q.size - 1,):
            raise ValueError("MicroState needs len(q) == len(u) == len(dstar) + 1")

    @property
    def n(self) -> int:
        return self.q.size - 1

    @property
    def d(self) -> np.ndarray:
        return np.diff(self.q) - 2.0 * self.eps

    def with_(self, **changes) -> "MicroState":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"time": self.time, "eps": self.eps, "q": self.q.tolist(), "u": self.u.tolist(),
                "dstar": self.dstar.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MicroState":
        return cls(data["time"], data["eps"], data["q"], data["u"], data["dstar"])


def check_state(state: MicroState, tol: float = 1e-12) -> None:
    """Raise if ``state`` breaks a MicroState invariant (pinned ends, positive gaps, d* >= 0)."""
    q, u = state.q, state.u
    if q[0] != 0.0 or q[-1] != 1.0:
        raise ValueError("end particles must sit at q[0] = 0 and q[N] = 1")
    if u[0] != 0.0 or u[-1] != 0.0:
        raise ValueError("end particle velocities must be 0")
    if np.any(state.dstar < 0.0):
        raise ValueError("critical distances must be non-negative")
    d = state.d
    k = int(np.argmin(d))
    if d[k] <= 0.0:
        raise ContactError(k + 1, float(d[k]), state.time)
    drift = abs(d.sum() + 2.0 * state.eps * state.n - 1.0)
    if drift > tol:
        raise ValueError(f"sum of gaps drifted by {drift:.3e}")


@dataclass(frozen=True)
class InitialProfiles:
    rho0: Profile
    rhostar0: Profile
    u0: Profile
    delta: float
    rhobar: float

    def to_dict(self) -> dict:
        return {"rho0": self.rho0.to_dict(), "rhostar0": self.rhostar0.to_dict(),
                "u0": self.u0.to_dict(), "delta": self.delta, "rhobar": self.rhobar}

    @classmethod
    def from_dict(cls, data: dict) -> "InitialProfiles":
        return cls(Profile.from_dict(data["rho0"]), Profile.from_dict(data["rhostar0"]),
                   Profile.from_dict(data["u0"]), float(data["delta"]), float(data["rhobar"]))


@dataclass(frozen=True)
class IntegratorControls:
    """Step-size controls of the semi-implicit integrator.

    A step is rejected (and dt halved) when a gap would shrink below ``gap_floor_frac``
    of its pre-step value or when some velocity changes by more than ``du_tol``.
    ``cfl_safety`` caps dt so that no gap can close by more than that fraction at the
    pre-step relative velocities.
    """

    dt_init: float = 1e-3
    dt_min: float = 1e-12
    cfl_safety: float = 0.5
    gap_floor_frac: float = 0.5
    du_tol: float = 0.05
    output_times: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"dt_init": self.dt_init, "dt_min": self.dt_min, "cfl_safety": self.cfl_safety,
                "gap_floor_frac": self.gap_floor_frac, "du_tol": self.du_tol,
                "output_times": list(self.output_times)}

    @classmethod
    def from_dict(cls, data: dict) -> "IntegratorControls":
        data = dict(data)
        data["output_times"] = tuple(float(t) for t in data.get("output_times", ()))
        return cls(**data)


@dataclass(frozen=True)
class SimConfig:
    n_particles: int
    mu: float
    gamma: float
    horizon: float
    force: ForceSpec
    init: InitialProfiles
    integrator: IntegratorControls = field(default_factory=IntegratorControls)
    # False switches the roughness repulsion off (pressureless limit)
    repulsion: bool = True

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {"n_particles": self.n_particles, "mu": self.mu, "gamma": self.gamma,
                "horizon": self.horizon, "force": self.force.to_dict(),
                "init": self.init.to_dict(), "integrator": self.integrator.to_dict(),
                "repulsion": self.repulsion}

    @classmethod
    def from_dict(cls, data: dict) -> "SimConfig":
        return cls(n_particles=int(data["n_particles"]), mu=float(data["mu"]),
                   gamma=float(data["gamma"]), horizon=float(data["horizon"]),
                   force=ForceSpec.from_dict(data.get("force", {"kind": "zero"})),
                   init=InitialProfiles.from_dict(data["init"]),
                   integrator=IntegratorControls.from_dict(data.get("integrator", {})),
                   repulsion=bool(data.get("repulsion", True)))


# profile bounds are compared up to round-off (0.6 - 0.2 < 0.4 in binary)
_BOUND_TOL = 1e-12


def validate_config(cfg: SimConfig) -> SimConfig:
    """Return ``cfg`` unchanged if every invariant holds, else raise ConfigError naming the first."""
    if not cfg.mu > 0:
        raise ConfigError("mu <= 0")
    if not cfg.gamma >= 1:
        raise ConfigError("gamma < 1")
    if not cfg.horizon > 0:
        raise ConfigError("horizon <= 0")
    if cfg.n_particles < 2:
        raise ConfigError("n_particles < 2")
    ini = cfg.init
    if not ini.rhobar < 1:
        raise ConfigError("rhobar >= 1")
    if not 0 < ini.delta < ini.rhobar:
        raise ConfigError("delta outside (0, rhobar)")
    x = ini.rho0.sample_points()
    rho0 = ini.rho0(x)
    if np.max(rho0) > ini.rhobar + _BOUND_TOL:
        raise ConfigError("rho0 exceeds rhobar")
    if np.min(rho0) < ini.delta - _BOUND_TOL:
        raise ConfigError("rho0 below delta")
    rs = ini.rhostar0(ini.rhostar0.sample_points())
    if np.max(rs) > 1.0 + _BOUND_TOL:
        raise ConfigError("rhostar0 exceeds 1")
    if np.min(rs) < ini.delta - _BOUND_TOL:
        raise ConfigError("rhostar0 below delta")
    u_ends = ini.u0(np.array([0.0, 1.0]))
    if np.max(np.abs(u_ends)) > 1e-12:
        raise ConfigError("u0 not zero at the walls")
    if not cfg.force.covers(cfg.horizon):
        raise ConfigError("force table does not cover [0, T] x [0, 1]")
    ic = cfg.integrator
    for name in ("dt_init", "dt_min", "cfl_safety", "gap_floor_frac", "du_tol"):
        if not getattr(ic, name) > 0:
            raise ConfigError(f"{name} <= 0")
    if ic.dt_min > ic.dt_init:
        raise ConfigError("dt_min > dt_init")
    if not ic.gap_floor_frac < 1:
        raise ConfigError("gap_floor_frac >= 1")
    if ic.cfl_safety > 1:
        raise ConfigError("cfl_safety > 1")
    ts = np.asarray(ic.output_times, dtype=float)
    if ts.size and (np.any(np.diff(ts) <= 0) or ts[0] < 0 or ts[-1] > cfg.horizon):
        raise ConfigError("output_times must be increasing within [0, T]")
    return cfg


def config_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("scenario.schema.json").read_text())


def check_schema(data: dict) -> None:
    """Raise ConfigError if ``data`` does not match the shipped scenario schema."""
    try:
        jsonschema.validate(data, config_schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema: {where}: {exc.message}") from None


def load_config(path, validate: bool = True) -> SimConfig:
    """Read a scenario JSON file; with ``validate`` it must pass the schema and every invariant."""
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"not valid JSON: {exc}") from None
    if not validate:
        return SimConfig.from_dict(data)
    check_schema(data)
    try:
        cfg = SimConfig.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return validate_config(cfg)


def save_config(cfg: SimConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


@dataclass(frozen=True)
class StepLog:
    """Per-accepted-step record. Row 0 is the initial state (dt = 0)."""

    t: np.ndarray
    dt: np.ndarray
    min_gap: np.ndarray
    max_abs_u: np.ndarray
    kinetic: np.ndarray
    potential: np.ndarray
    dissipation: np.ndarray  # cumulative (mu/4) int sum |u_i - u_{i-1}|^2 / d_i
    f_l1_sq: np.ndarray  # cumulative int ||f(s, .)||_{L1}^2 ds
    dxG_int: np.ndarray  # cumulative int max_i |G_{i+1} - G_i| / (2 eps) ds
    f_sup_int: np.ndarray  # cumulative int ||f(s, .)||_inf ds
    max_increment: np.ndarray  # max_i |d_{i+1} - d_i|

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: dict) -> "StepLog":
        return cls(**{k: np.asarray(v, dtype=float) for k, v in data.items()})


@dataclass
class Trajectory:
    config: SimConfig
    frames: list[MicroState]
    step_log: StepLog
    init_report: dict | None = None
    clusters: dict | None = None
    diagnostics: dict | None = None

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames])

    def to_dict(self) -> dict:
        out = {"config": self.config.to_dict(),
               "frames": [{"t": f.time, "q": f.q.tolist(), "u": f.u.tolist()} for f in self.frames],
               "eps": self.frames[0].eps, "dstar": self.frames[0].dstar.tolist(),
               "step_log": self.step_log.to_dict()}
        if self.init_report is not None:
            out["init_report"] = self.init_report
        if self.clusters is not None:
            out["clusters"] = self.clusters
        if self.diagnostics is not None:
            out["diagnostics"] = self.diagnostics
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Trajectory":
        eps, dstar = data["eps"], data["dstar"]
        frames = [MicroState(f["t"], eps, f["q"], f["u"], dstar) for f in data["frames"]]
        return cls(SimConfig.from_dict(data["config"]), frames, StepLog.from_dict(data["step_log"]),
                   data.get("init_report"), data.get("clusters"), data.get("diagnostics"))
