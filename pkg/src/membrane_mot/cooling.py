"""Sub-Doppler (polarization-gradient) cooling stage.

The stage is a friction/diffusion closure, not a lattice simulation: linear
friction inside a velocity capture range with matched diffusion such that
the local Langevin equilibrium satisfies k_B T_eq = C_pg * hbar*Gamma * s /
|delta/Gamma|.  The Doppler scattering force is switched off for the stage;
the quadrupole field stays on but contributes no force in this model.
The saturation parameter s is taken at the trap center and scaled by the
schedule ramp: the physical cloud this stage describes is small compared to
the beam waist, so beam-profile variation across it is ignored.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import substream
from .measure import Cloud
from .scene import Scenario, ValidationError, center_saturation
from .units import hbar, k_B

__all__ = [
    "PgSchedule", "PgModelParams", "PgStageSummary", "schedule_at", "pg_force",
    "pg_equilibrium_temperature", "pg_diffusion_std", "run_pg_stage",
    "default_pg_schedule", "DEFAULT_C_PG", "TAPER_WIDTH",
]

# Calibrated so the free-space reference scenario ends at 10 uK with the
# default schedule (see scripts/calibrate_pg.py); the ramp endpoints
# themselves are model defaults, not measured values.
DEFAULT_C_PG = 3.206e-3

# Relative width of the smooth friction cut-off beyond the capture velocity.
TAPER_WIDTH = 0.5


@dataclass(frozen=True)
class PgSchedule:
    """Linear intensity-lowering and frequency ramp, quadrupole field kept on."""

    detuning_start: float           # rad/s, < 0
    detuning_end: float             # rad/s, < 0
    duration: float = 1.5e-3        # s
    end_scale: float = 0.3          # final intensity as a fraction of 1.0

    def __post_init__(self):
        if self.duration < 0:
            raise ValidationError("schedule duration must be nonnegative")
        if not (0.5e-3 <= self.duration <= 5e-3):
            warnings.warn(
                f"PG duration {self.duration * 1e3:.2f} ms outside the usual 0.5-5 ms window",
                UserWarning, stacklevel=2)
        if self.detuning_start >= 0 or self.detuning_end >= 0:
            raise ValidationError("PG detunings must be negative (red)")
        if not (0.0 < self.end_scale <= 1.0):
            raise ValidationError("end_scale must be in (0, 1]")


def default_pg_schedule(scenario: Scenario) -> PgSchedule:
    """Ramp from the scenario's cooling detuning to 6 linewidths red."""
    start = scenario.beams[0].detuning
    return PgSchedule(detuning_start=start,
                      detuning_end=-6.0 * scenario.species.linewidth_gamma)


@dataclass(frozen=True)
class PgModelParams:
    friction_coefficient_scale: float = 1.0
    equilibrium_constant: float = DEFAULT_C_PG      # C_pg
    capture_velocity_pg: float = 2.0                # m/s

    def __post_init__(self):
        for name in ("friction_coefficient_scale", "equilibrium_constant",
                     "capture_velocity_pg"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"PG model {name} must be positive")


def schedule_at(schedule: PgSchedule, t: float) -> tuple[float, float]:
    """(intensity scale, detuning) at time t, linear between the endpoints."""
    if not (0.0 <= t <= schedule.duration):
        raise ValueError(f"t={t!r} outside the schedule [0, {schedule.duration!r}]")
    frac = t / schedule.duration if schedule.duration > 0 else 0.0
    scale = 1.0 + (schedule.end_scale - 1.0) * frac
    detuning = schedule.detuning_start + (schedule.detuning_end - schedule.detuning_start) * frac
    return scale, detuning


def _taper(speed_over_vc):
    u = np.asarray(speed_over_vc, dtype=float)
    out = np.ones_like(u)
    above = u > 1.0
    out[above] = np.exp(-(((u[above] - 1.0) / TAPER_WIDTH) ** 2))
    return out


def friction_coefficient(params: PgModelParams, wavenumber: float) -> float:
    """gamma_pg in kg/s; proportional to the friction scale, independent of s."""
    return params.friction_coefficient_scale * hbar * wavenumber ** 2


def pg_force(params: PgModelParams, local_s: float, detuning: float, velocity,
             *, wavenumber: float) -> np.ndarray:
    """Friction force -gamma_pg v inside the capture range, tapering beyond.

    ``local_s`` does not enter the force (sub-Doppler friction is intensity
    independent at fixed ramp shape); it pairs with the matched diffusion of
    :func:`pg_diffusion_std` to set the equilibrium temperature.
    """
    if not detuning < 0:
        raise ValueError("pg_force requires red detuning")
    velocity = np.asarray(velocity, dtype=float)
    gamma_pg = friction_coefficient(params, wavenumber)
    speed = float(np.linalg.norm(velocity))
    taper = float(_taper(speed / params.capture_velocity_pg))
    return -gamma_pg * taper * velocity


def pg_equilibrium_temperature(params: PgModelParams, local_s: float,
                               detuning: float, linewidth: float) -> float:
    """Closure equilibrium: k_B T = C_pg * hbar*Gamma * s / |delta/Gamma|."""
    if not detuning < 0:
        raise ValueError("equilibrium temperature requires red detuning")
    return params.equilibrium_constant * hbar * linewidth * local_s / (abs(detuning) / linewidth) / k_B


def pg_diffusion_std(params: PgModelParams, local_s: float, detuning: float,
                     taper, *, linewidth: float, mass: float, wavenumber: float,
                     dt: float):
    """Per-axis velocity kick std for one step, matched to the friction.

    Fluctuation-dissipation with the (tapered) friction gives the closure
    temperature: var = 2 gamma_eff k_B T_eq dt / m^2.
    """
    gamma_pg = friction_coefficient(params, wavenumber)
    t_eq = pg_equilibrium_temperature(params, local_s, detuning, linewidth)
    return np.sqrt(2.0 * gamma_pg * np.asarray(taper) * k_B * t_eq * dt) / mass


@dataclass(frozen=True)
class PgStageSummary:
    times: np.ndarray
    active_weight: np.ndarray
    t_h: np.ndarray
    t_v: np.ndarray


def run_pg_stage(scenario: Scenario, cloud: Cloud, schedule: PgSchedule,
                 model: PgModelParams, seed: int, *, dt: float = 1e-6,
                 record_interval: float = 1e-4, return_summary: bool = False):
    """Apply the PG ramp to a cloud; atoms hitting the membrane are removed.

    Per-atom noise comes from substreams (seed, 2, atom index).  Returns the
    surviving cloud, plus a time summary (weighted live count, T_H, T_V)
    when ``return_summary`` is set.
    """
    n_steps = int(round(schedule.duration / dt))
    n = len(cloud)
    if n_steps == 0 or n == 0:
        summary = _summarize_empty(cloud, scenario)
        return (cloud, summary) if return_summary else cloud

    sp = scenario.species
    mass = sp.mass
    s_center = center_saturation(scenario)
    gamma_pg = friction_coefficient(model, sp.wavenumber)
    vc = model.capture_velocity_pg

    pos = cloud.positions.copy()
    vel = cloud.velocities.copy()
    weights = cloud.weights
    alive = np.ones(n, dtype=bool)
    noise = np.empty((n, n_steps, 3))
    for i in range(n):
        noise[i] = substream(seed, 2, i).standard_normal((n_steps, 3))

    device = scenario.device
    gravity = scenario.gravity
    rec_stride = max(int(round(record_interval / dt)), 1)
    times, act_w, t_h, t_v = [], [], [], []

    def _record(t_now):
        times.append(t_now)
        act_w.append(float(np.sum(weights[alive])))
        th, tv = _cloud_temps(vel[alive], weights[alive], mass)
        t_h.append(th)
        t_v.append(tv)

    _record(0.0)
    for j in range(n_steps):
        scale, delta = schedule_at(schedule, j * dt)
        s_loc = s_center * scale
        t_eq = pg_equilibrium_temperature(model, s_loc, delta, sp.linewidth_gamma)

        idx = np.nonzero(alive)[0]
        v = vel[idx]
        speed = np.linalg.norm(v, axis=1)
        taper = _taper(speed / vc)
        acc = -(gamma_pg / mass) * taper[:, None] * v + gravity
        std = np.sqrt(2.0 * gamma_pg * taper * k_B * t_eq * dt) / mass
        new_v = v + acc * dt + std[:, None] * noise[idx, j, :]
        new_p = pos[idx] + new_v * dt

        if device is not None:
            dead_local = _solid_crossers(device, pos[idx], new_p)
            if np.any(dead_local):
                alive[idx[dead_local]] = False
                keep = ~dead_local
                idx, new_v, new_p = idx[keep], new_v[keep], new_p[keep]
        vel[idx] = new_v
        pos[idx] = new_p
        if (j + 1) % rec_stride == 0 or j + 1 == n_steps:
            _record((j + 1) * dt)

    out = Cloud(positions=pos[alive], velocities=vel[alive], weights=weights[alive],
                timestamp=cloud.timestamp + schedule.duration,
                birth_times=None if cloud.birth_times is None else cloud.birth_times[alive])
    summary = PgStageSummary(times=np.array(times), active_weight=np.array(act_w),
                             t_h=np.array(t_h), t_v=np.array(t_v))
    return (out, summary) if return_summary else out


def _cloud_temps(vel, weights, mass):
    if vel.shape[0] < 2:
        return float("nan"), float("nan")
    temps = []
    for axis in range(3):
        v = vel[:, axis]
        mean = np.average(v, weights=weights)
        temps.append(mass * float(np.average((v - mean) ** 2, weights=weights)) / k_B)
    return 0.5 * (temps[0] + temps[1]), temps[2]


def _summarize_empty(cloud, scenario):
    if len(cloud):
        th, tv = _cloud_temps(cloud.velocities, cloud.weights, scenario.species.mass)
    else:
        th = tv = float("nan")
    return PgStageSummary(times=np.array([0.0]),
                          active_weight=np.array([cloud.total_weight]),
                          t_h=np.array([th]), t_v=np.array([tv]))


def _solid_crossers(device, p0, p1):
    """Vectorized first-crossing test against the solid membrane/bridge."""
    n = device.plane_normal
    d0 = (p0 - device.plane_point) @ n
    d1 = (p1 - device.plane_point) @ n
    crossing = ((d0 > 0) & (d1 < 0)) | ((d0 < 0) & (d1 > 0)) | ((d0 == 0) & (d1 != 0))
    out = np.zeros(p0.shape[0], dtype=bool)
    if not np.any(crossing):
        return out
    idx = np.nonzero(crossing)[0]
    t = d0[idx] / (d0[idx] - d1[idx])
    x = p0[idx] + t[:, None] * (p1[idx] - p0[idx])
    rel = x - device.plane_point
    u = rel @ device._e1
    v = rel @ device._e2
    half = device.membrane_half_extent
    on_square = (np.abs(u) <= half) & (np.abs(v) <= half)
    solid = on_square & (u * u + v * v > device.hole_radius ** 2)
    if device.bridge_present:
        solid |= on_square & (u * u + v * v <= device.hole_radius ** 2) \
            & (np.abs(v) <= 0.5 * device.bridge_width)
    out[idx[solid]] = True
    return out
