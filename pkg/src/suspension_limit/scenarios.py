"""Named scenario presets for the benchmark runs (constant densities, congestion, pulses)."""

from __future__ import annotations

from .core import ConfigError, InitialProfiles, IntegratorControls, SimConfig
from .profiles import ForceSpec, Profile

PRESETS = ("case1", "case2a", "case2b", "case3", "gamma-sweep")

# Viscosity used by every preset. With mu = 1 the initial compression is damped
# before the density moves noticeably, so the congestion behaviour never shows.
PRESET_MU = 0.03
GAMMA_SWEEP = (2.0, 5.0, 10.0)
# Small enough that the time error stays below the N = 400 particle-to-continuum error
PRESET_CONTROLS = IntegratorControls(dt_init=1e-4)

_U0 = Profile.sinusoid(0.5)


def _pulse(base: float, amplitude: float) -> Profile:
    return Profile.gaussian(base, amplitude, center=0.5, width=0.1)


def initial_profiles(name: str) -> InitialProfiles:
    if name in ("case1", "gamma-sweep"):
        return InitialProfiles(Profile.constant(0.7), Profile.constant(0.7), _U0, 0.6, 0.7)
    if name in ("case2a", "case2b"):
        return InitialProfiles(Profile.constant(0.7), Profile.constant(1.0), _U0, 0.6, 0.7)
    if name == "case3":
        return InitialProfiles(_pulse(0.6, 0.2), _pulse(0.6, -0.2), _U0, 0.4, 0.8)
    raise ConfigError(f"unknown preset {name!r}")


def preset_config(name: str, n_particles: int = 50, horizon: float = 0.2, mu: float = PRESET_MU,
                  gamma: float | None = None, pressure: bool | None = None,
                  integrator: IntegratorControls | None = None) -> SimConfig:
    """Particle-model configuration of a preset.

    ``pressure`` defaults to the preset's own choice (off only for case2a); ``gamma``
    defaults to 1, or to the first sweep value for gamma-sweep.
    """
    init = initial_profiles(name)
    if gamma is None:
        gamma = GAMMA_SWEEP[0] if name == "gamma-sweep" else 1.0
    if pressure is None:
        pressure = name != "case2a"
    return SimConfig(n_particles=n_particles, mu=mu, gamma=gamma, horizon=horizon,
                     force=ForceSpec.zero(), init=init,
                     integrator=integrator or PRESET_CONTROLS, repulsion=pressure)
