"""Stochastic single-atom propagation and the ensemble loading driver.

The force model is a two-level atom in six independent beams with a shared
saturation denominator; recoil noise enters as per-step Gaussian kicks whose
per-axis variance combines absorption along the beam directions with
isotropic emission.  Atoms are mutually independent: each one owns an RNG
substream derived from (seed, injection index), so ensemble results are
bit-identical no matter how atoms are batched or how many workers run them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernel
from .measure import Cloud, HoleCylinderRegion, SphereRegion
from .scene import (
    NEAR_SURFACE_RANGE,
    Scenario,
    beam_intensity,
    distance_to_solid,
    magnetic_field,
)
from .units import hbar, k_B

__all__ = [
    "Status", "AtomState", "StepParams", "Event", "MotTimeSeries",
    "MotRunResult", "scattering_rate_per_beam", "net_force",
    "sub_doppler_friction", "step", "sample_injected_atom", "run_mot",
    "simulate_mot", "propagate_cloud", "substream", "CAPTURE_MARK_SPEED",
    "WINDOW_STEPS", "CHUNK_ATOMS",
]

# Fixed batching constants.  WINDOW_STEPS sets the per-atom noise block size
# (part of the reproducibility contract: results depend on seed, dt and this
# block size); CHUNK_ATOMS is the unit of work handed to workers.
WINDOW_STEPS = 4096
CHUNK_ATOMS = 64

# An atom is marked "captured" the first time it is inside the counting
# region slower than this (m/s).
CAPTURE_MARK_SPEED = 2.0


def substream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic RNG substream for (seed, key...)."""
    return np.random.default_rng(np.random.SeedSequence(entropy=(int(seed), *key)))


class Status(enum.Enum):
    ACTIVE = _kernel.ACTIVE
    LOST_MEMBRANE = _kernel.LOST_MEMBRANE
    LOST_BRIDGE = _kernel.LOST_BRIDGE
    LOST_BACKGROUND = _kernel.LOST_BACKGROUND
    ESCAPED = _kernel.ESCAPED

    @property
    def surface_kind(self):
        if self is Status.LOST_MEMBRANE:
            return "membrane"
        if self is Status.LOST_BRIDGE:
            return "bridge"
        return None

    @property
    def is_lost_surface(self) -> bool:
        return self in (Status.LOST_MEMBRANE, Status.LOST_BRIDGE)


_EVENT_KIND = {
    _kernel.LOST_MEMBRANE: "lost_membrane",
    _kernel.LOST_BRIDGE: "lost_bridge",
    _kernel.LOST_BACKGROUND: "lost_background",
    _kernel.ESCAPED: "escaped",
}


@dataclass
class AtomState:
    """Position, velocity and fate of one simulated atom."""

    position: np.ndarray
    velocity: np.ndarray
    status: Status = Status.ACTIVE

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float).reshape(3)
        self.velocity = np.asarray(self.velocity, dtype=float).reshape(3)
        if self.status is Status.ACTIVE and not (
                np.all(np.isfinite(self.position)) and np.all(np.isfinite(self.velocity))):
            raise ValueError("active atom state must be finite")


@dataclass(frozen=True)
class StepParams:
    """Integrator and run controls.

    dt is chosen to resolve the friction time (m / friction coefficient is
    tens of microseconds to milliseconds at typical parameters); many
    scattering events (~Gamma/2 * dt) are lumped into each step's mean force
    plus Gaussian recoil kick, which is the diffusion approximation.
    Seeding is explicit: there is no wall-clock fallback.
    """

    rng_seed: int
    max_time: float
    dt: float = 1e-6
    escape_radius: float | None = None      # default: 2 x injection radius
    sample_dt: float = 1e-3
    enable_recoil: bool = True

    def __post_init__(self):
        if not (isinstance(self.rng_seed, (int, np.integer)) and 0 <= int(self.rng_seed) < 2 ** 64):
            raise ValueError("rng_seed must be an integer in [0, 2^64)")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if self.sample_dt < self.dt:
            raise ValueError("sample_dt must be >= dt")
        if self.escape_radius is not None and not self.escape_radius > 0:
            raise ValueError("escape_radius must be positive")


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    atom_index: int


@dataclass(frozen=True)
class MotTimeSeries:
    """N(t) inside the counting region plus the per-atom event log."""

    sample_times: np.ndarray
    counts_in_region: np.ndarray        # raw live-atom counts
    weighted_counts: np.ndarray         # importance-weighted counts
    events: tuple[Event, ...]
    region: str

    def __post_init__(self):
        t = np.asarray(self.sample_times, dtype=float)
        c = np.asarray(self.counts_in_region)
        w = np.asarray(self.weighted_counts, dtype=float)
        if t.size and np.any(np.diff(t) <= 0):
            raise ValueError("sample_times must be strictly increasing")
        if np.any(c < 0) or np.any(w < 0):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "sample_times", t)
        object.__setattr__(self, "counts_in_region", c)
        object.__setattr__(self, "weighted_counts", w)
        object.__setattr__(self, "events", tuple(self.events))


@dataclass(frozen=True)
class MotRunResult:
    series: MotTimeSeries
    final_cloud: Cloud
    injection_times: np.ndarray
    weights: np.ndarray
    statuses: np.ndarray                # kernel status codes per atom
    term_times: np.ndarray
    capture_times: np.ndarray
    born_steps: np.ndarray
    trajectories: np.ndarray | None = None   # (n_atoms, n_steps+1, 6), test mode


# ---------------------------------------------------------------------------
# Reference physics (readable formulas; the numba kernel mirrors these and a
# test locks the agreement)

def scattering_rate_per_beam(scenario: Scenario, atom: AtomState) -> np.ndarray:
    """Per-beam scattering rates R_i (1/s) at the atom's phase-space point.

    R_i = (Gamma/2) s_i / (1 + s_tot + (2 delta_eff_i / Gamma)^2) with
    delta_eff_i = delta_i - k v.khat_i + pol_i * zeeman_shift * (B.khat_i).
    """
    if atom.status is not Status.ACTIVE:
        raise ValueError("scattering rates are defined for active atoms")
    sp = scenario.species
    gamma = sp.linewidth_gamma
    sats = [beam_intensity(b, scenario.device, atom.position) / sp.saturation_intensity
            for b in scenario.beams]
    s_tot = 0.0
    for s in sats:
        s_tot += s
    b_field = magnetic_field(scenario.quad, atom.position)
    rates = np.empty(len(scenario.beams))
    for i, (beam, s) in enumerate(zip(scenario.beams, sats)):
        delta_eff = (beam.detuning
                     - sp.wavenumber * float(beam.direction @ atom.velocity)
                     + beam.polarization_sign * sp.effective_zeeman_shift
                     * float(b_field @ beam.direction))
        x = 2.0 * delta_eff / gamma
        rates[i] = 0.5 * gamma * s / (1.0 + s_tot + x * x)
    return rates


def sub_doppler_friction(scenario: Scenario, velocity) -> np.ndarray:
    """Drift force of the in-trap sub-Doppler closure (zero when unset)."""
    sd = scenario.trap_sub_doppler
    velocity = np.asarray(velocity, dtype=float)
    if sd is None:
        return np.zeros(3)
    gamma_sd = sd.friction_scale * hbar * scenario.species.wavenumber ** 2
    speed = float(np.linalg.norm(velocity))
    u = speed / sd.capture_velocity
    taper = 1.0 if u <= 1.0 else math.exp(-(((u - 1.0) / _kernel.TAPER_WIDTH) ** 2))
    return -gamma_sd * taper * velocity


def net_force(scenario: Scenario, atom: AtomState) -> np.ndarray:
    """Deterministic drift force: radiation pressure sum, gravity, and the
    in-trap sub-Doppler friction when the scenario configures it."""
    rates = scattering_rate_per_beam(scenario, atom)
    force = scenario.species.mass * scenario.gravity.copy()
    hk = hbar * scenario.species.wavenumber
    for beam, rate in zip(scenario.beams, rates):
        force = force + hk * rate * beam.direction
    return force + sub_doppler_friction(scenario, atom.velocity)


# ---------------------------------------------------------------------------
# Kernel argument packing

def _kernel_scene_args(scenario: Scenario):
    beams = scenario.beams
    nb = len(beams)
    bdir = np.ascontiguousarray([b.direction for b in beams], dtype=float).reshape(nb, 3)
    borig = np.ascontiguousarray([b.origin_point for b in beams], dtype=float).reshape(nb, 3)
    bpeak = np.array([b.peak_intensity for b in beams], dtype=float)
    bw2 = np.array([b.waist_radius ** 2 for b in beams], dtype=float)
    bdet = np.array([b.detuning for b in beams], dtype=float)
    bpol = np.array([float(b.polarization_sign) for b in beams], dtype=float)
    sp = scenario.species
    quad = scenario.quad
    dev = scenario.device
    if dev is not None:
        dev_args = (True, dev.plane_normal, dev._e1, dev._e2, dev.plane_point,
                    dev.membrane_half_extent, dev.hole_radius,
                    0.5 * dev.bridge_width if dev.bridge_present else -1.0,
                    dev.transmittance)
    else:
        z = np.zeros(3)
        dev_args = (False, z, z, z, z, 0.0, 0.0, -1.0, 1.0)
    sd = scenario.trap_sub_doppler
    if sd is not None:
        sd_args = (sd.friction_scale * hbar * sp.wavenumber ** 2,
                   sd.equilibrium_temperature, sd.capture_velocity)
    else:
        sd_args = (0.0, 0.0, 1.0)
    return ((bdir, borig, bpeak, bw2, bdet, bpol,
             sp.saturation_intensity, sp.linewidth_gamma, sp.wavenumber,
             sp.effective_zeeman_shift, sp.mass,
             quad.axis, quad.gradient, quad.center)
            + dev_args + sd_args)


def _region_args(region):
    if isinstance(region, SphereRegion):
        return (_kernel.REGION_SPHERE, region.center, np.array([0.0, 0.0, 1.0]),
                region.radius, 0.0)
    if isinstance(region, HoleCylinderRegion):
        return (_kernel.REGION_CYLINDER, region.center, region.axis,
                region.radius, 0.5 * region.height)
    raise TypeError(f"unsupported region type {type(region).__name__}")


_DUMMY_REGION = (_kernel.REGION_SPHERE, np.zeros(3), np.array([0.0, 0.0, 1.0]), 0.0, 0.0)


def _default_escape_radius(scenario: Scenario, params: StepParams) -> float:
    if params.escape_radius is not None:
        return params.escape_radius
    return 2.0 * scenario.vapor.injection_radius


# ---------------------------------------------------------------------------
# Single-step contract (same kernel as the ensemble driver)

def step(scenario: Scenario, atom: AtomState, params: StepParams,
         rng: np.random.Generator) -> AtomState:
    """One semi-implicit Euler step with recoil kick and loss channels.

    Consumes exactly three standard normals then one uniform from ``rng``.
    Bit-identical for identical inputs and generator state.
    """
    if atom.status is not Status.ACTIVE:
        raise ValueError("step requires an active atom")
    pos = np.array([atom.position], dtype=float)
    vel = np.array([atom.velocity], dtype=float)
    status = np.zeros(1, dtype=np.int8)
    born = np.zeros(1, dtype=np.int64)
    normals = rng.standard_normal((1, 1, 3))
    uniforms = rng.random((1, 1))
    capture_time = np.zeros(1)          # disables the capture marker
    term_time = np.full(1, np.nan)
    inregion = np.zeros((1, 1), dtype=np.uint8)
    traj = np.zeros((1, 1, 6))
    _kernel.propagate_window(
        pos, vel, status, born, 0, 1, params.dt,
        normals, uniforms, params.enable_recoil, scenario.background_loss_rate > 0,
        *_kernel_scene_args(scenario),
        scenario.gravity, scenario.background_loss_rate,
        _default_escape_radius(scenario, params), scenario.center,
        1, 0, inregion, *_DUMMY_REGION,
        CAPTURE_MARK_SPEED, capture_time, term_time,
        False, traj)
    return AtomState(position=pos[0], velocity=vel[0], status=Status(int(status[0])))


# ---------------------------------------------------------------------------
# Vapor injection sampling

def _flux_cdf(x: float) -> float:
    """CDF of the flux-weighted speed distribution in x = v^2/(2 sigma^2)."""
    return 1.0 - math.exp(-x) * (1.0 + x) if x < 745.0 else 1.0


def _invert_flux_cdf(target: float, x_hi: float) -> float:
    lo, hi = 0.0, x_hi
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if _flux_cdf(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def truncation_weight(scenario: Scenario) -> float:
    """Fraction of the inward vapor flux below the sampling truncation speed."""
    v_trunc = scenario.vapor.v_trunc
    if v_trunc is None:
        return 1.0
    sigma2 = k_B * scenario.vapor.temperature / scenario.species.mass
    return _flux_cdf(v_trunc ** 2 / (2.0 * sigma2))


def sample_injected_atom(scenario: Scenario, rng: np.random.Generator):
    """Draw one vapor atom crossing the injection sphere.

    Position is uniform on the sphere; the velocity direction is
    cosine-weighted about the inward normal and the speed follows the
    flux-weighted Maxwell-Boltzmann law, importance-sampled on
    [0, v_trunc].  Returns (AtomState, statistical weight); the weight is
    the truncated flux fraction, additionally scaled by the near-surface
    density factor when the launch point sits within 300 um of a solid
    surface, so weighted ensemble averages stay unbiased.
    """
    vapor = scenario.vapor
    if vapor.v_trunc is not None and vapor.v_trunc <= 0:
        raise ValueError("v_trunc must be positive")
    center = scenario.center
    radius = vapor.injection_radius
    device = scenario.device

    while True:
        u = rng.random(2)
        cos_t = 1.0 - 2.0 * u[0]
        sin_t = math.sqrt(max(1.0 - cos_t * cos_t, 0.0))
        phi = 2.0 * math.pi * u[1]
        radial = np.array([sin_t * math.cos(phi), sin_t * math.sin(phi), cos_t])
        position = center + radius * radial
        if device is None:
            break
        # A launch point exactly on the solid plane would start embedded in
        # the membrane; resample it (measure-zero in practice).
        h = abs(float((position - device.plane_point) @ device.plane_normal))
        if h > 1e-12:
            break
        u_ip, v_ip = device.in_plane_coords(position)
        from .scene import _classify_plane_point
        if _classify_plane_point(device, u_ip, v_ip) in ("open", "hole"):
            break

    inward = -radial
    helper = np.array([1.0, 0.0, 0.0]) if abs(inward[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    t1 = np.cross(helper, inward)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(inward, t1)
    u = rng.random(2)
    cos_a = math.sqrt(u[0])              # cosine-weighted flux through the surface
    sin_a = math.sqrt(max(1.0 - u[0], 0.0))
    phi2 = 2.0 * math.pi * u[1]
    direction = cos_a * inward + sin_a * (math.cos(phi2) * t1 + math.sin(phi2) * t2)

    sigma2 = k_B * vapor.temperature / scenario.species.mass
    q = rng.random()
    if vapor.v_trunc is None:
        hi = 1.0
        while _flux_cdf(hi) < q and hi < 1024.0:
            hi *= 2.0
        x = _invert_flux_cdf(q, hi)
        weight = 1.0
    else:
        x_max = vapor.v_trunc ** 2 / (2.0 * sigma2)
        f_max = _flux_cdf(x_max)
        x = _invert_flux_cdf(q * f_max, x_max)
        weight = f_max
    speed = math.sqrt(2.0 * sigma2 * x)

    if device is not None and distance_to_solid(device, position) <= NEAR_SURFACE_RANGE:
        weight *= vapor.near_surface_density_factor
    return AtomState(position=position, velocity=speed * direction), weight


# ---------------------------------------------------------------------------
# Ensemble driver

def _simulate_chunk(scenario: Scenario, params: StepParams, region_args,
                    atom_indices, injection_times, n_steps, sample_stride,
                    n_samples, record_traj: bool):
    """Propagate one chunk of atoms through the whole run.

    Every atom draws injection state and per-window noise exclusively from
    its own substream, so the outcome is independent of chunk membership.
    """
    c = len(atom_indices)
    seed = params.rng_seed
    dt = params.dt
    pos = np.zeros((c, 3))
    vel = np.zeros((c, 3))
    weights = np.zeros(c)
    born = np.zeros(c, dtype=np.int64)
    status = np.zeros(c, dtype=np.int8)
    capture_time = np.full(c, -1.0)
    term_time = np.full(c, np.nan)
    inregion = np.zeros((c, n_samples), dtype=np.uint8)
    rngs = []
    for row, (idx, t_inj) in enumerate(zip(atom_indices, injection_times)):
        rng = substream(seed, 1, int(idx))
        atom, w = sample_injected_atom(scenario, rng)
        pos[row] = atom.position
        vel[row] = atom.velocity
        weights[row] = w
        born[row] = int(math.ceil(t_inj / dt))
        rngs.append(rng)

    scene_args = _kernel_scene_args(scenario)
    escape_r = _default_escape_radius(scenario, params)
    bg_rate = scenario.background_loss_rate
    gravity = scenario.gravity
    center = scenario.center

    if record_traj:
        traj = np.full((c, n_steps + 1, 6), np.nan)
        for row in range(c):
            if born[row] <= n_steps:
                traj[row, born[row], :3] = pos[row]
                traj[row, born[row], 3:] = vel[row]
    else:
        traj = np.zeros((1, 1, 6))

    for g0 in range(0, n_steps, WINDOW_STEPS):
        g1 = min(g0 + WINDOW_STEPS, n_steps)
        width = g1 - g0
        needy = [(row, rngs[row]) for row in range(c)
                 if status[row] == _kernel.ACTIVE and born[row] < g1]
        if not needy:
            continue
        normals = np.zeros((c, width, 3))
        uniforms = np.zeros((c, width))
        for row, rng in needy:
            normals[row] = rng.standard_normal((width, 3))
            uniforms[row] = rng.random(width)
        _kernel.propagate_window(
            pos, vel, status, born, g0, g1, dt,
            normals, uniforms, params.enable_recoil, bg_rate > 0,
            *scene_args,
            gravity, bg_rate, escape_r, center,
            sample_stride, n_samples, inregion,
            *region_args,
            CAPTURE_MARK_SPEED, capture_time, term_time,
            record_traj, traj)

    raw = inregion.astype(np.int64).sum(axis=0)
    weighted = (weights[:, None] * inregion).sum(axis=0)
    return {
        "atom_indices": np.asarray(atom_indices, dtype=np.int64),
        "pos": pos, "vel": vel, "weights": weights, "born": born,
        "status": status, "capture_time": capture_time, "term_time": term_time,
        "raw_counts": raw, "weighted_counts": weighted,
        "traj": traj if record_traj else None,
    }


def _simulate_chunk_payload(payload):
    return _simulate_chunk(*payload)


def simulate_mot(scenario: Scenario, params: StepParams, region, workers: int = 1,
                 record_trajectories: bool = False) -> MotRunResult:
    """Full loading run: Poisson injection, propagation, counting, events."""
    dt = params.dt
    n_steps = int(round(params.max_time / dt))
    sample_stride = max(int(round(params.sample_dt / dt)), 1)
    n_samples = n_steps // sample_stride + 1
    sample_times = np.arange(n_samples) * (sample_stride * dt)
    region_args = _region_args(region)

    rate = scenario.vapor.injection_rate
    injection_times = []
    if rate > 0:
        driver = substream(params.rng_seed, 0)
        t = 0.0
        while True:
            t += driver.exponential(1.0 / rate)
            if t >= params.max_time:
                break
            if int(math.ceil(t / dt)) < n_steps:
                injection_times.append(t)
    injection_times = np.asarray(injection_times)
    n_atoms = len(injection_times)

    if record_trajectories and workers > 1:
        raise ValueError("trajectory recording supports a single worker only")

    payloads = []
    for start in range(0, n_atoms, CHUNK_ATOMS):
        idx = np.arange(start, min(start + CHUNK_ATOMS, n_atoms))
        payloads.append((scenario, params, region_args, idx, injection_times[idx],
                         n_steps, sample_stride, n_samples, record_trajectories))

    if workers > 1 and len(payloads) > 1:
        import multiprocessing as mp
        _warm_up_kernel()
        with mp.get_context("fork").Pool(processes=workers) as pool:
            results = pool.map(_simulate_chunk_payload, payloads)
    else:
        results = [_simulate_chunk_payload(p) for p in payloads]

    raw = np.zeros(n_samples, dtype=np.int64)
    weighted = np.zeros(n_samples)
    for res in results:
        raw = raw + res["raw_counts"]
        weighted = weighted + res["weighted_counts"]

    def _gather(key, dtype=float):
        if not results:
            return np.zeros((0, 3) if key in ("pos", "vel") else 0, dtype=dtype)
        return np.concatenate([res[key] for res in results])

    pos = _gather("pos")
    vel = _gather("vel")
    weights = _gather("weights")
    born = _gather("born", np.int64)
    statuses = _gather("status", np.int8)
    capture_times = _gather("capture_time")
    term_times = _gather("term_time")

    events = []
    for i, t_inj in enumerate(injection_times):
        events.append(Event(time=float(t_inj), kind="injected", atom_index=i))
        if capture_times[i] >= 0:
            events.append(Event(time=float(capture_times[i]), kind="captured", atom_index=i))
        code = int(statuses[i])
        if code != _kernel.ACTIVE:
            events.append(Event(time=float(term_times[i]), kind=_EVENT_KIND[code], atom_index=i))
    events.sort(key=lambda e: (e.time, e.atom_index, e.kind))

    series = MotTimeSeries(sample_times=sample_times, counts_in_region=raw,
                           weighted_counts=weighted, events=tuple(events),
                           region=region.describe())

    alive = statuses == _kernel.ACTIVE
    cloud = Cloud(positions=pos[alive], velocities=vel[alive], weights=weights[alive],
                  timestamp=params.max_time,
                  birth_times=injection_times[alive] if n_atoms else np.zeros(0))

    traj = None
    if record_trajectories:
        traj = (np.concatenate([res["traj"] for res in results])
                if results else np.zeros((0, n_steps + 1, 6)))
    return MotRunResult(series=series, final_cloud=cloud,
                        injection_times=injection_times, weights=weights,
                        statuses=statuses, term_times=term_times,
                        capture_times=capture_times, born_steps=born,
                        trajectories=traj)


def run_mot(scenario: Scenario, params: StepParams, region, workers: int = 1) -> MotTimeSeries:
    """Loading run returning the counted time series (see simulate_mot)."""
    return simulate_mot(scenario, params, region, workers=workers).series


def _warm_up_kernel():
    """Force JIT compilation in the parent before forking workers."""
    from .scene import canonical_scenario
    scn = canonical_scenario("paper_free_space")
    atom = AtomState(position=np.zeros(3), velocity=np.zeros(3))
    step(scn, atom, StepParams(rng_seed=0, max_time=1e-6, dt=1e-6), substream(0, 99))


# ---------------------------------------------------------------------------
# Fixed-ensemble propagation (molasses / equilibration studies)

@dataclass(frozen=True)
class PropagationRecord:
    final_cloud: Cloud
    times: np.ndarray
    mean_kinetic_energy: np.ndarray      # J per atom, weighted
    axis_temperatures: np.ndarray        # (n, 3) K


def propagate_cloud(scenario: Scenario, cloud: Cloud, duration: float, *,
                    dt: float = 1e-6, seed: int, enable_recoil: bool = True,
                    record_interval: float | None = None) -> PropagationRecord:
    """Propagate a fixed ensemble (no injection) for ``duration``.

    Atoms use substreams (seed, 1, index).  Noise is drawn in blocks of the
    recording interval, so a given (seed, dt, record_interval) triple fully
    determines the result.  Records weighted mean kinetic energy and
    per-axis kinetic temperatures at each recording time.
    """
    n_steps = int(round(duration / dt))
    if record_interval is None:
        rec_stride = min(WINDOW_STEPS, n_steps) if n_steps else 1
    else:
        rec_stride = max(int(round(record_interval / dt)), 1)
    n = len(cloud)
    pos = cloud.positions.copy()
    vel = cloud.velocities.copy()
    weights = cloud.weights.copy()
    status = np.zeros(n, dtype=np.int8)
    born = np.zeros(n, dtype=np.int64)
    capture_time = np.zeros(n)           # marker disabled
    term_time = np.full(n, np.nan)
    rngs = [substream(seed, 1, i) for i in range(n)]

    scene_args = _kernel_scene_args(scenario)
    escape_r = 2.0 * scenario.vapor.injection_radius
    bg_rate = scenario.background_loss_rate
    inregion = np.zeros((n, 1), dtype=np.uint8)
    traj = np.zeros((1, 1, 6))

    times = [0.0]
    kes = [_weighted_mean_ke(vel, weights, status, scenario.species.mass)]
    temps = [_axis_temperatures(vel, weights, status, scenario.species.mass)]
    mass = scenario.species.mass

    for g0 in range(0, n_steps, rec_stride):
        g1 = min(g0 + rec_stride, n_steps)
        width = g1 - g0
        normals = np.zeros((n, width, 3))
        uniforms = np.zeros((n, width))
        for i in range(n):
            if status[i] == _kernel.ACTIVE:
                normals[i] = rngs[i].standard_normal((width, 3))
                uniforms[i] = rngs[i].random(width)
        _kernel.propagate_window(
            pos, vel, status, born, g0, g1, dt,
            normals, uniforms, enable_recoil, bg_rate > 0,
            *scene_args,
            scenario.gravity, bg_rate, escape_r, scenario.center,
            n_steps + 1, 0, inregion, *_DUMMY_REGION,
            CAPTURE_MARK_SPEED, capture_time, term_time,
            False, traj)
        times.append(g1 * dt)
        kes.append(_weighted_mean_ke(vel, weights, status, mass))
        temps.append(_axis_temperatures(vel, weights, status, mass))

    alive = status == _kernel.ACTIVE
    final = Cloud(positions=pos[alive], velocities=vel[alive], weights=weights[alive],
                  timestamp=cloud.timestamp + n_steps * dt)
    return PropagationRecord(final_cloud=final, times=np.array(times),
                             mean_kinetic_energy=np.array(kes),
                             axis_temperatures=np.array(temps))


def _weighted_mean_ke(vel, weights, status, mass):
    alive = status == _kernel.ACTIVE
    if not np.any(alive):
        return float("nan")
    v2 = np.einsum("ij,ij->i", vel[alive], vel[alive])
    return 0.5 * mass * float(np.average(v2, weights=weights[alive]))


def _axis_temperatures(vel, weights, status, mass):
    alive = status == _kernel.ACTIVE
    if not np.any(alive):
        return np.full(3, np.nan)
    w = weights[alive]
    out = np.empty(3)
    for axis in range(3):
        v = vel[alive, axis]
        mean = np.average(v, weights=w)
        out[axis] = mass * float(np.average((v - mean) ** 2, weights=w)) / k_B
    return out
