"""Command-line entry point.

    suspension-limit run <preset|config.json> [--N 50,100,200] [--M 400] [--T 1.0] ...
    suspension-limit study [preset] [--N 25,50,100,200] [--M 800] [--T 0.2]
    suspension-limit emit-plots [run_dir] --times 0,0.1,0.2
    suspension-limit validate <config.json>

Exit codes: 0 success, 2 configuration error, 3 solver abort, 4 certificate failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .core import ConfigError, ContactError, load_config
from .diagnostics import summary_line
from .harness import convergence_study, dumps, emit_plot_data, run_scenario
from .integrator import IntegrationAborted
from .scenarios import PRESET_MU, PRESETS, preset_config

EXIT_OK, EXIT_CONFIG, EXIT_ABORT, EXIT_CERTIFICATE = 0, 2, 3, 4


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _add_physics(p: argparse.ArgumentParser) -> None:
    p.add_argument("--M", type=int, help="continuum cells")
    p.add_argument("--T", type=float, help="final time")
    p.add_argument("--gamma", type=_floats, help="pressure exponent(s), comma separated")
    p.add_argument("--mu", type=float, help="viscosity")
    p.add_argument("--no-pressure", action="store_true", help="switch the repulsion/pressure off")
    p.add_argument("--out", type=Path, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="suspension-limit",
                                     description="Particle suspensions and their continuum limit")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a preset or a scenario file")
    run.add_argument("scenario", help=f"one of {', '.join(PRESETS)} or a config .json")
    run.add_argument("--N", type=_ints, help="particle counts, comma separated")
    _add_physics(run)
    run.add_argument("--clusters", type=int, default=0,
                     help="glue this many random neighbour pairs into contact")
    run.add_argument("--seed", type=int, default=0, help="seed for cluster placement")
    run.add_argument("--particles-csv", action="store_true",
                     help="also write one row per frame per particle")

    study = sub.add_parser("study", help="particle-to-continuum convergence table")
    study.add_argument("scenario", nargs="?", default="case1")
    study.add_argument("--N", type=_ints, default=[25, 50, 100, 200])
    _add_physics(study)
    study.add_argument("--seed", type=int, default=0)

    plots = sub.add_parser("emit-plots", help="CSV bundle aligning particle and continuum fields")
    plots.add_argument("run_dir", nargs="?", type=Path, help="directory written by `run`")
    plots.add_argument("--times", type=_floats, default=[], help="comma separated times")
    plots.add_argument("--N", type=int, help="particle run to use (default: largest)")
    plots.add_argument("--out", type=Path)

    val = sub.add_parser("validate", help="check a scenario file against schema and invariants")
    val.add_argument("config", type=Path)
    return parser


def _cmd_run(a) -> int:
    out = a.out or Path("runs") / Path(a.scenario).stem
    pressure = False if a.no_pressure else None
    if a.scenario.endswith(".json"):
        cfg = load_config(a.scenario)
        if a.mu is not None:
            cfg = cfg.with_(mu=a.mu)
        if a.gamma:
            cfg = cfg.with_(gamma=a.gamma[0])
        if a.no_pressure:
            cfg = cfg.with_(repulsion=False)
        result = run_scenario(Path(a.scenario).stem, out, N_list=a.N or (cfg.n_particles,),
                              M=a.M or 400, T=a.T or cfg.horizon, mu=cfg.mu,
                              clusters=a.clusters, seed=a.seed, particles_csv=a.particles_csv,
                              config=cfg)
    else:
        kwargs = {k: v for k, v in {"N_list": a.N, "M": a.M, "T": a.T}.items() if v}
        result = run_scenario(a.scenario, out, gammas=a.gamma,
                              mu=PRESET_MU if a.mu is None else a.mu, pressure=pressure,
                              clusters=a.clusters, seed=a.seed, particles_csv=a.particles_csv,
                              **kwargs)
    for n, traj in result.trajectories.items():
        print(f"N={n}: {summary_line(traj.diagnostics)}")
    s = result.summary
    if "gamma_sweep" in s:
        g = s["gamma_sweep"]
        print("gamma sweep max rho:", ", ".join(f"{x:g}->{y:.4f}" for x, y in zip(g["gamma"], g["max_rho"])),
              "decreasing" if g["strictly_decreasing"] else "NOT decreasing")
    if "convergence" in s:
        print("convergence:", s["convergence"])
    print(f"artifacts in {out}")
    return EXIT_OK if result.passed else EXIT_CERTIFICATE


def _cmd_study(a) -> int:
    cfg = preset_config(a.scenario, a.N[0], a.T or 0.2, PRESET_MU if a.mu is None else a.mu,
                        a.gamma[0] if a.gamma else None, False if a.no_pressure else None)
    trajs: dict = {}
    table = convergence_study(cfg, a.N, a.M or 800, trajectories=trajs)
    print("     N        eps   err_rho_L1   err_rs_L1    err_u_L2  min_gap/eps")
    for r in table.rows:
        print(f"{r['N']:6d} {r['eps']:10.3e} {r['err_rho_L1']:12.4e} {r['err_rhostar_L1']:11.3e} "
              f"{r['err_u_L2']:11.4e} {r['min_gap_over_eps']:11.4f}")
    trend = table.trend()
    print("trend:", trend)
    if a.out:
        a.out.mkdir(parents=True, exist_ok=True)
        (a.out / "convergence.json").write_text(dumps(table.to_dict()))
        table.write_csv(a.out / "convergence.csv")
    certified = all(t.diagnostics["passed"] for t in trajs.values())
    ok = certified and trend["rho_decreasing"] and trend["u_decreasing"]
    return EXIT_OK if ok else EXIT_CERTIFICATE


def _cmd_emit(a) -> int:
    run_dir = a.run_dir or a.out
    if run_dir is None:
        raise ConfigError("emit-plots needs a run directory")
    paths = emit_plot_data(run_dir, a.times, a.out, a.N)
    for p in paths:
        print(p)
    return EXIT_OK


def _cmd_validate(a) -> int:
    cfg = load_config(a.config)
    print(f"valid: N={cfg.n_particles} mu={cfg.mu:g} gamma={cfg.gamma:g} T={cfg.horizon:g}")
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "study": _cmd_study, "emit-plots": _cmd_emit,
            "validate": _cmd_validate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        # raised by emit-plots for times outside the run ("time out of range")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (IntegrationAborted, ContactError) as exc:
        print(f"solver abort: {exc}", file=sys.stderr)
        return EXIT_ABORT


if __name__ == "__main__":
    sys.exit(main())
