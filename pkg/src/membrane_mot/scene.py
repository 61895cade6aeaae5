"""Physical scene: atomic species, cooling beams, membrane device, quadrupole
field and vapor source, plus the pure geometric/field queries on them.

All types are immutable after construction and all queries are pure
functions, so everything here is safe to share across threads/processes.
Internal units are SI; scenario documents use lab units and are converted
in :func:`load_scenario`.
"""

from __future__ import annotations

import dataclasses
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .units import (
    amu,
    g_earth,
    gauss_per_cm_to_tesla_per_m,
    hbar,
    mhz_per_gauss_to_rad_s_per_tesla,
    mhz_to_rad_s,
    mm_to_m,
    mw_cm2_to_w_m2,
    mw_to_w,
    um_to_m,
)

__all__ = [
    "AtomSpecies", "Beam", "MembraneDevice", "QuadrupoleField", "VaporSource",
    "TrapSubDopplerParams", "Scenario", "Hit", "ConfigError", "ValidationError",
    "ScenarioWarning", "load_scenario", "beam_intensity", "magnetic_field",
    "intersect_segment", "distance_to_solid", "six_beam_set",
    "canonical_document", "canonical_scenario", "scenario_from_document",
    "CANONICAL_NAMES", "center_saturation", "estimate_capture_velocity",
    "CS133_D2_DOCUMENT",
]


class ConfigError(ValueError):
    """Malformed scenario document (parse failure or bad field)."""


class ValidationError(ValueError):
    """A constructed object violates one of its invariants."""


class ScenarioWarning(UserWarning):
    """Suspicious but not fatal scenario content (e.g. blue detuning)."""


def _unit(v, name, tol=1e-12):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector")
    n = float(np.linalg.norm(v))
    if abs(n - 1.0) > tol:
        raise ValidationError(f"{name} must be a unit vector (|v|={n!r})")
    return v


def _vec3(v, name):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise ValidationError(f"{name} must be a 3-vector")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} must be finite")
    return v


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class AtomSpecies:
    """Two-level atom constants for the cooling transition."""

    mass: float                     # kg
    wavelength: float               # m
    linewidth_gamma: float          # angular, rad/s
    saturation_intensity: float     # W/m^2
    effective_zeeman_shift: float   # rad/s per tesla

    def __post_init__(self):
        for name in ("mass", "wavelength", "linewidth_gamma",
                     "saturation_intensity", "effective_zeeman_shift"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"species.{name} must be strictly positive")

    @property
    def wavenumber(self) -> float:
        return 2.0 * math.pi / self.wavelength

    @property
    def recoil_velocity(self) -> float:
        return hbar * self.wavenumber / self.mass


@dataclass(frozen=True)
class Beam:
    """One collimated Gaussian cooling beam (constant waist along propagation)."""

    direction: np.ndarray           # unit 3-vector
    power: float                    # W
    waist_radius: float             # 1/e^2 radius, m
    detuning: float                 # rad/s, negative = red
    polarization_sign: int          # +1 or -1, handedness relative to direction
    origin_point: np.ndarray        # m, somewhere on the beam axis

    def __post_init__(self):
        object.__setattr__(self, "direction", _freeze(_unit(self.direction, "beam.direction")))
        object.__setattr__(self, "origin_point", _freeze(_vec3(self.origin_point, "beam.origin_point")))
        if not self.waist_radius > 0:
            raise ValidationError("beam.waist_radius must be positive")
        if self.power < 0:
            raise ValidationError("beam.power must be nonnegative")
        if self.polarization_sign not in (-1, 1):
            raise ValidationError("beam.polarization_sign must be +1 or -1")
        if not math.isfinite(self.detuning):
            raise ValidationError("beam.detuning must be finite")

    @property
    def peak_intensity(self) -> float:
        """On-axis intensity 2P/(pi w^2), W/m^2, before any occlusion."""
        return 2.0 * self.power / (math.pi * self.waist_radius ** 2)


@dataclass(frozen=True)
class MembraneDevice:
    """Square transparent membrane with a circular hole, optionally bridged.

    The membrane is treated as infinitely thin: a plane region that blocks
    atoms (solid square minus the hole, plus the bridge strip) and
    attenuates crossing light by ``transmittance`` per solid crossing.
    ``plane_normal`` encodes the holder tilt relative to the vertical beams.
    """

    plane_normal: np.ndarray
    plane_point: np.ndarray         # hole center, m
    membrane_half_extent: float     # square half-side, m
    hole_radius: float              # m
    bridge_present: bool = False
    bridge_width: float = 3e-6      # m
    bridge_axis: np.ndarray | None = None   # unit 3-vector in plane
    transmittance: float = 0.95

    def __post_init__(self):
        n = _freeze(_unit(self.plane_normal, "device.plane_normal"))
        object.__setattr__(self, "plane_normal", n)
        object.__setattr__(self, "plane_point", _freeze(_vec3(self.plane_point, "device.plane_point")))
        if not (0.0 < self.hole_radius < self.membrane_half_extent):
            raise ValidationError(
                "device must satisfy 0 < hole_radius < membrane_half_extent "
                f"(got {self.hole_radius!r}, {self.membrane_half_extent!r})")
        if not (0.0 < self.transmittance <= 1.0):
            raise ValidationError("device.transmittance must be in (0, 1]")
        if self.bridge_present and not self.bridge_width > 0:
            raise ValidationError("device.bridge_width must be positive")
        if self.bridge_axis is None:
            axis = _pick_in_plane_axis(n)
        else:
            axis = _unit(self.bridge_axis, "device.bridge_axis", tol=1e-9)
        if self.bridge_present and abs(float(axis @ n)) > 1e-9:
            raise ValidationError("device.bridge_axis must be perpendicular to plane_normal")
        # In-plane orthonormal basis; e1 runs along the bridge.
        e1 = axis - (axis @ n) * n
        e1 = e1 / np.linalg.norm(e1)
        e2 = np.cross(n, e1)
        object.__setattr__(self, "bridge_axis", _freeze(e1))
        object.__setattr__(self, "_e1", _freeze(e1))
        object.__setattr__(self, "_e2", _freeze(e2))

    def in_plane_coords(self, point):
        d = np.asarray(point, dtype=float) - self.plane_point
        return float(d @ self._e1), float(d @ self._e2)


def _pick_in_plane_axis(n):
    trial = np.array([0.0, 1.0, 0.0]) if abs(n[1]) < 0.9 else np.array([1.0, 0.0, 0.0])
    v = trial - (trial @ n) * n
    return v / np.linalg.norm(v)


@dataclass(frozen=True)
class QuadrupoleField:
    """Linear quadrupole field B = g (z_ax * axis - rho_perp / 2), zero at center."""

    axis: np.ndarray                # unit symmetry axis
    gradient: float                 # tesla/m along axis
    center: np.ndarray              # m

    def __post_init__(self):
        object.__setattr__(self, "axis", _freeze(_unit(self.axis, "quad.axis")))
        object.__setattr__(self, "center", _freeze(_vec3(self.center, "quad.center")))
        if not math.isfinite(self.gradient):
            raise ValidationError("quad.gradient must be finite")


@dataclass(frozen=True)
class VaporSource:
    """Background-vapor injection model.

    Candidate atoms cross a sphere of ``injection_radius`` around the trap
    center at mean Poisson rate ``injection_rate``.  ``v_trunc`` bounds the
    speeds actually simulated (importance sampling; ``None`` = untruncated
    validation mode, ``"auto"`` at load time picks 5x the estimated capture
    velocity).  ``near_surface_density_factor`` down-weights atoms injected
    within 300 um of a solid surface, modeling vapor depletion there.
    """

    temperature: float              # K
    injection_rate: float           # atoms/s
    injection_radius: float         # m
    near_surface_density_factor: float = 1.0
    v_trunc: float | None = None    # m/s

    def __post_init__(self):
        if not self.temperature > 0:
            raise ValidationError("vapor.temperature must be positive")
        if self.injection_rate < 0:
            raise ValidationError("vapor.injection_rate must be nonnegative")
        if not self.injection_radius > 0:
            raise ValidationError("vapor.injection_radius must be positive")
        if not (0.0 < self.near_surface_density_factor <= 1.0):
            raise ValidationError("vapor.near_surface_density_factor must be in (0, 1]")
        if self.v_trunc is not None and not self.v_trunc > 0:
            raise ValidationError("vapor.v_trunc must be positive when set")


NEAR_SURFACE_RANGE = 300e-6  # m, range of the near-surface vapor depletion


@dataclass(frozen=True)
class TrapSubDopplerParams:
    """In-trap sub-Doppler closure for the trapped phase of the MOT.

    A pure two-level Doppler model at full MOT intensity equilibrates at
    millikelvin temperatures and millimeter cloud sizes, whereas the traps
    this package models hold measured clouds of a couple hundred
    micrometers: the cold trapped phase comes from sub-Doppler mechanisms
    acting inside the trap.  This closure adds linear friction toward
    ``equilibrium_temperature`` for atoms slower than ``capture_velocity``
    (smoothly tapered above), with diffusion matched by fluctuation-
    dissipation.  Leave it unset for the bare two-level model.
    """

    equilibrium_temperature: float      # K
    friction_scale: float = 1.0         # friction = scale * hbar * k^2
    capture_velocity: float = 2.0       # m/s

    def __post_init__(self):
        if not self.equilibrium_temperature > 0:
            raise ValidationError("trap_sub_doppler.equilibrium_temperature must be positive")
        if not self.friction_scale > 0:
            raise ValidationError("trap_sub_doppler.friction_scale must be positive")
        if not self.capture_velocity > 0:
            raise ValidationError("trap_sub_doppler.capture_velocity must be positive")


@dataclass(frozen=True)
class Scenario:
    """Complete immutable experiment description."""

    species: AtomSpecies
    beams: tuple[Beam, ...]
    device: MembraneDevice | None
    quad: QuadrupoleField
    vapor: VaporSource
    background_loss_rate: float     # 1/s
    gravity: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, -g_earth]))
    trap_sub_doppler: TrapSubDopplerParams | None = None

    def __post_init__(self):
        object.__setattr__(self, "beams", tuple(self.beams))
        object.__setattr__(self, "gravity", _freeze(_vec3(self.gravity, "gravity")))
        if self.background_loss_rate < 0:
            raise ValidationError("background_loss_rate must be nonnegative")
        for i, b in enumerate(self.beams):
            if b.detuning > 0:
                warnings.warn(
                    f"beam {i} has positive (blue) detuning; not a cooling configuration",
                    ScenarioWarning, stacklevel=2)

    @property
    def center(self) -> np.ndarray:
        return self.quad.center


@dataclass(frozen=True)
class Hit:
    """First solid crossing of a segment with the membrane plane."""

    point: np.ndarray
    surface_kind: str               # "membrane" or "bridge"
    t: float                        # fractional position along the segment


# ---------------------------------------------------------------------------
# Pure queries

def _classify_plane_point(device: MembraneDevice, u: float, v: float) -> str:
    """Classify an in-plane location: 'membrane', 'bridge', 'hole' or 'open'."""
    h = device.membrane_half_extent
    if abs(u) > h or abs(v) > h:
        return "open"
    if u * u + v * v > device.hole_radius ** 2:
        return "membrane"
    if device.bridge_present and abs(v) <= 0.5 * device.bridge_width:
        return "bridge"
    return "hole"


def intersect_segment(device: MembraneDevice, p0, p1) -> Hit | None:
    """First solid crossing of the membrane plane on segment p0 -> p1.

    Returns a membrane hit when the crossing lands on the solid square
    outside the hole, a bridge hit when it lands on the bridge strip inside
    the hole, and None otherwise (open hole, off-membrane plane, or no
    plane crossing at all).
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    if np.array_equal(p0, p1):
        raise ValueError("intersect_segment requires p0 != p1")
    n = device.plane_normal
    d0 = float((p0 - device.plane_point) @ n)
    d1 = float((p1 - device.plane_point) @ n)
    if d0 == d1:        # parallel to the plane (or both exactly on it)
        return None
    if (d0 > 0.0 and d1 > 0.0) or (d0 < 0.0 and d1 < 0.0):
        return None
    t = d0 / (d0 - d1)
    x = p0 + t * (p1 - p0)
    u, v = device.in_plane_coords(x)
    kind = _classify_plane_point(device, u, v)
    if kind in ("open", "hole"):
        return None
    return Hit(point=x, surface_kind=kind, t=t)


def beam_intensity(beam: Beam, device: MembraneDevice | None, point) -> float:
    """Gaussian-beam intensity at ``point`` in W/m^2.

    I(r) = 2P/(pi w^2) exp(-2 r^2 / w^2) with r the transverse distance from
    the beam axis, attenuated by transmittance^k where k counts solid
    membrane crossings between the beam origin and the point.  Crossings
    through the open hole do not count, and shadowing by the micrometer
    bridge is ignored.
    """
    point = np.asarray(point, dtype=float)
    d = point - beam.origin_point
    proj = float(d @ beam.direction)
    r2 = max(float(d @ d) - proj * proj, 0.0)
    w2 = beam.waist_radius ** 2
    intensity = beam.peak_intensity * math.exp(-2.0 * r2 / w2)
    if device is not None and not np.array_equal(point, beam.origin_point):
        hit = intersect_segment(device, beam.origin_point, point)
        if hit is not None and hit.surface_kind == "membrane":
            intensity *= device.transmittance
    return intensity


def magnetic_field(quad: QuadrupoleField, point) -> np.ndarray:
    """Quadrupole field in tesla: B = g (z_ax * axis - rho_perp / 2)."""
    d = np.asarray(point, dtype=float) - quad.center
    z = float(d @ quad.axis)
    rho = d - z * quad.axis
    return quad.gradient * (z * quad.axis - 0.5 * rho)


def distance_to_solid(device: MembraneDevice, point) -> float:
    """Distance from ``point`` to the nearest solid surface (membrane or bridge)."""
    point = np.asarray(point, dtype=float)
    h = float((point - device.plane_point) @ device.plane_normal)
    u, v = device.in_plane_coords(point)
    half = device.membrane_half_extent
    rho = math.hypot(u, v)
    # In-plane gap to the solid square-with-hole footprint.
    if abs(u) <= half and abs(v) <= half:
        gap = max(device.hole_radius - rho, 0.0)
    else:
        gap = math.hypot(max(abs(u) - half, 0.0), max(abs(v) - half, 0.0))
    dist = math.hypot(h, gap)
    if device.bridge_present:
        du = max(abs(u) - device.hole_radius, 0.0)   # bridge spans the hole
        dv = max(abs(v) - 0.5 * device.bridge_width, 0.0)
        dist = min(dist, math.hypot(h, math.hypot(du, dv)))
    return dist


def center_saturation(scenario: Scenario) -> float:
    """Total saturation parameter sum_i I_i / I_sat at the trap center."""
    s = 0.0
    for b in scenario.beams:
        s += beam_intensity(b, scenario.device, scenario.center) / scenario.species.saturation_intensity
    return s


def estimate_capture_velocity(scenario: Scenario) -> float:
    """Rough capture-velocity scale sqrt(2 a_max w) used to pick v_trunc.

    a_max is the center scattering deceleration of a single beam with the
    shared saturation denominator; w is the smallest beam waist.  This is a
    sampling heuristic only, not a physics claim.
    """
    sp = scenario.species
    s_tot = center_saturation(scenario)
    if s_tot <= 0 or not scenario.beams:
        return 1.0
    delta = scenario.beams[0].detuning
    gamma = sp.linewidth_gamma
    denom = 1.0 + s_tot + (2.0 * delta / gamma) ** 2
    a_max = hbar * sp.wavenumber * gamma / (2.0 * sp.mass) * (s_tot / denom)
    w_min = min(b.waist_radius for b in scenario.beams)
    return math.sqrt(max(2.0 * a_max * w_min, 1e-12))


# ---------------------------------------------------------------------------
# Construction helpers

def six_beam_set(power, waist_radius, detuning, origin_distance=0.05,
                 center=(0.0, 0.0, 0.0)) -> tuple[Beam, ...]:
    """Standard retroreflected-style six-beam arrangement around ``center``.

    Four horizontal beams (+-x, +-y) and two vertical (+-z).  Polarization
    signs are chosen so that, with the quadrupole symmetry axis along +z and
    positive gradient, the scattering force is restoring on every axis:
    -1 for the axial pair, +1 for the horizontal pairs.
    """
    center = np.asarray(center, dtype=float)
    beams = []
    for axis_vec, pol in (((1, 0, 0), +1), ((0, 1, 0), +1), ((0, 0, 1), -1)):
        for sign in (+1, -1):
            direction = sign * np.asarray(axis_vec, dtype=float)
            beams.append(Beam(
                direction=direction,
                power=power,
                waist_radius=waist_radius,
                detuning=detuning,
                polarization_sign=pol,
                origin_point=center - origin_distance * direction,
            ))
    return tuple(beams)


CS133_D2_DOCUMENT = {
    "name": "Cs133",
    "mass_amu": 132.905451931,
    "wavelength_nm": 852.34727582,
    "linewidth_MHz": 5.2,
    "saturation_intensity_mW_cm2": 1.1,
    "effective_zeeman_shift_MHz_per_G": 1.4,
}

CANONICAL_NAMES = ("paper_free_space", "paper_hole_0p4mm", "paper_bridged_0p4mm")


def canonical_document(name: str) -> dict:
    """Built-in scenario documents carrying the reference cesium MOT parameters.

    ``paper_free_space`` has no membrane; ``paper_hole_0p4mm`` adds the
    0.4 mm hole device; ``paper_bridged_0p4mm`` additionally spans the hole
    with a 3 um bridge.
    """
    if name not in CANONICAL_NAMES:
        raise ConfigError(f"unknown canonical scenario {name!r}; choose from {CANONICAL_NAMES}")
    doc = {
        "species": dict(CS133_D2_DOCUMENT),
        "beams": [
            {
                "direction": d,
                "power_mW": 2.6,
                "waist_radius_mm": 1.9,
                "detuning_MHz": -10.4,   # -2 Gamma
                "polarization_sign": p,
            }
            for d, p in (
                ([1, 0, 0], 1), ([-1, 0, 0], 1),
                ([0, 1, 0], 1), ([0, -1, 0], 1),
                ([0, 0, 1], -1), ([0, 0, -1], -1),
            )
        ],
        "quad": {"axis": [0, 0, 1], "gradient_G_per_cm": 13.6, "center_mm": [0, 0, 0]},
        "vapor": {
            "temperature_K": 295.0,
            "injection_rate_per_s": 2000.0,
            "injection_radius_mm": 2.5,
            "near_surface_density_factor": 0.5,
            # ~2x the free-space capture velocity: keeps most simulated
            # candidates inside the capturable band (weights stay unbiased)
            "v_trunc_m_per_s": 20.0,
        },
        "losses": {"background_loss_rate_per_s": 2.5},
        "gravity_m_per_s2": [0.0, 0.0, -9.80665],
        # cold trapped phase: see TrapSubDopplerParams
        "trap_sub_doppler": {
            "equilibrium_temperature_uK": 30.0,
            "friction_scale": 1.0,
            "capture_velocity_m_per_s": 2.0,
        },
    }
    if name != "paper_free_space":
        doc["device"] = {
            "tilt_deg": 40.0,
            "plane_point_mm": [0, 0, 0],
            "membrane_half_extent_mm": 2.5,
            "hole_diameter_mm": 0.4,
            "bridge_present": name == "paper_bridged_0p4mm",
            "bridge_width_um": 3.0,
            "bridge_axis": [0, 1, 0],
            "transmittance": 0.95,
        }
    return doc


def canonical_scenario(name: str) -> Scenario:
    return scenario_from_document(canonical_document(name))


# ---------------------------------------------------------------------------
# Document loading

def _require(block: dict, key: str, path: str):
    if key not in block:
        raise ConfigError(f"missing required field {path}.{key}")
    return block[key]


def _check_known(block: dict, known: set[str], path: str):
    unknown = set(block) - known
    if unknown:
        raise ConfigError(f"unknown field(s) in {path}: {sorted(unknown)}")


def _number(value, path):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path} must be a number (got {value!r})")
    return float(value)


def _parse_species(block: dict) -> AtomSpecies:
    _check_known(block, {"name", "mass_amu", "wavelength_nm", "linewidth_MHz",
                         "saturation_intensity_mW_cm2", "effective_zeeman_shift_MHz_per_G"},
                 "species")
    return AtomSpecies(
        mass=_number(_require(block, "mass_amu", "species"), "species.mass_amu") * amu,
        wavelength=_number(_require(block, "wavelength_nm", "species"), "species.wavelength_nm") * 1e-9,
        linewidth_gamma=mhz_to_rad_s(_number(_require(block, "linewidth_MHz", "species"), "species.linewidth_MHz")),
        saturation_intensity=mw_cm2_to_w_m2(
            _number(_require(block, "saturation_intensity_mW_cm2", "species"), "species.saturation_intensity_mW_cm2")),
        effective_zeeman_shift=mhz_per_gauss_to_rad_s_per_tesla(
            _number(_require(block, "effective_zeeman_shift_MHz_per_G", "species"),
                    "species.effective_zeeman_shift_MHz_per_G")),
    )


def _parse_beam(block: dict, i: int, center: np.ndarray) -> Beam:
    path = f"beams[{i}]"
    _check_known(block, {"direction", "power_mW", "waist_radius_mm", "detuning_MHz",
                         "polarization_sign", "origin_point_mm"}, path)
    direction = _vec3(_require(block, "direction", path), f"{path}.direction")
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ConfigError(f"{path}.direction must be nonzero")
    direction = direction / norm
    if "origin_point_mm" in block:
        origin = mm_to_m(_vec3(block["origin_point_mm"], f"{path}.origin_point_mm"))
    else:
        origin = center - 0.05 * direction
    pol = _require(block, "polarization_sign", path)
    if pol not in (-1, 1):
        raise ConfigError(f"{path}.polarization_sign must be +1 or -1")
    return Beam(
        direction=direction,
        power=mw_to_w(_number(_require(block, "power_mW", path), f"{path}.power_mW")),
        waist_radius=mm_to_m(_number(_require(block, "waist_radius_mm", path), f"{path}.waist_radius_mm")),
        detuning=mhz_to_rad_s(_number(_require(block, "detuning_MHz", path), f"{path}.detuning_MHz")),
        polarization_sign=int(pol),
        origin_point=origin,
    )


def _parse_device(block: dict) -> MembraneDevice:
    _check_known(block, {"tilt_deg", "plane_normal", "plane_point_mm", "membrane_half_extent_mm",
                         "hole_radius_mm", "hole_diameter_mm", "bridge_present", "bridge_width_um",
                         "bridge_axis", "transmittance"}, "device")
    if "plane_normal" in block:
        normal = _vec3(block["plane_normal"], "device.plane_normal")
        normal = normal / np.linalg.norm(normal)
    else:
        tilt = math.radians(_number(block.get("tilt_deg", 40.0), "device.tilt_deg"))
        normal = np.array([math.sin(tilt), 0.0, math.cos(tilt)])
    if "hole_radius_mm" in block and "hole_diameter_mm" in block:
        raise ConfigError("device: give exactly one of hole_radius_mm / hole_diameter_mm")
    if "hole_radius_mm" in block:
        hole_radius = mm_to_m(_number(block["hole_radius_mm"], "device.hole_radius_mm"))
    elif "hole_diameter_mm" in block:
        hole_radius = 0.5 * mm_to_m(_number(block["hole_diameter_mm"], "device.hole_diameter_mm"))
    else:
        raise ConfigError("device: missing hole_radius_mm or hole_diameter_mm")
    bridge_axis = block.get("bridge_axis")
    if bridge_axis is not None:
        bridge_axis = _vec3(bridge_axis, "device.bridge_axis")
        bridge_axis = bridge_axis / np.linalg.norm(bridge_axis)
    return MembraneDevice(
        plane_normal=normal,
        plane_point=mm_to_m(_vec3(block.get("plane_point_mm", [0, 0, 0]), "device.plane_point_mm")),
        membrane_half_extent=mm_to_m(_number(_require(block, "membrane_half_extent_mm", "device"),
                                             "device.membrane_half_extent_mm")),
        hole_radius=hole_radius,
        bridge_present=bool(block.get("bridge_present", False)),
        bridge_width=um_to_m(_number(block.get("bridge_width_um", 3.0), "device.bridge_width_um")),
        bridge_axis=bridge_axis,
        transmittance=_number(block.get("transmittance", 0.95), "device.transmittance"),
    )


def scenario_from_document(doc: dict) -> Scenario:
    """Build and validate a Scenario from an already-parsed document dict."""
    if not isinstance(doc, dict):
        raise ConfigError("scenario document must be a JSON object")
    _check_known(doc, {"species", "beams", "device", "quad", "vapor", "losses",
                       "gravity_m_per_s2", "trap_sub_doppler"}, "document")
    species = _parse_species(_require(doc, "species", "document"))

    quad_block = _require(doc, "quad", "document")
    _check_known(quad_block, {"axis", "gradient_G_per_cm", "center_mm"}, "quad")
    axis = _vec3(_require(quad_block, "axis", "quad"), "quad.axis")
    axis = axis / np.linalg.norm(axis)
    quad = QuadrupoleField(
        axis=axis,
        gradient=gauss_per_cm_to_tesla_per_m(
            _number(_require(quad_block, "gradient_G_per_cm", "quad"), "quad.gradient_G_per_cm")),
        center=mm_to_m(_vec3(quad_block.get("center_mm", [0, 0, 0]), "quad.center_mm")),
    )

    beams_block = _require(doc, "beams", "document")
    if not isinstance(beams_block, list) or not beams_block:
        raise ConfigError("beams must be a non-empty list")
    beams = tuple(_parse_beam(b, i, quad.center) for i, b in enumerate(beams_block))

    device = None
    if "device" in doc and doc["device"] is not None:
        device = _parse_device(doc["device"])

    vapor_block = _require(doc, "vapor", "document")
    _check_known(vapor_block, {"temperature_K", "injection_rate_per_s", "injection_radius_mm",
                               "near_surface_density_factor", "v_trunc_m_per_s"}, "vapor")
    v_trunc_raw = vapor_block.get("v_trunc_m_per_s", "auto")
    if v_trunc_raw == "auto" or v_trunc_raw is None:
        v_trunc = None if v_trunc_raw is None else "auto"
    else:
        v_trunc = _number(v_trunc_raw, "vapor.v_trunc_m_per_s")
    vapor = VaporSource(
        temperature=_number(_require(vapor_block, "temperature_K", "vapor"), "vapor.temperature_K"),
        injection_rate=_number(_require(vapor_block, "injection_rate_per_s", "vapor"),
                               "vapor.injection_rate_per_s"),
        injection_radius=mm_to_m(_number(_require(vapor_block, "injection_radius_mm", "vapor"),
                                         "vapor.injection_radius_mm")),
        near_surface_density_factor=_number(vapor_block.get("near_surface_density_factor", 1.0),
                                            "vapor.near_surface_density_factor"),
        v_trunc=None if v_trunc in ("auto", None) else v_trunc,
    )

    losses_block = _require(doc, "losses", "document")
    _check_known(losses_block, {"background_loss_rate_per_s"}, "losses")
    bg = _number(_require(losses_block, "background_loss_rate_per_s", "losses"),
                 "losses.background_loss_rate_per_s")

    gravity = _vec3(doc.get("gravity_m_per_s2", [0.0, 0.0, -g_earth]), "gravity_m_per_s2")

    sub_doppler = None
    if doc.get("trap_sub_doppler") is not None:
        sd_block = doc["trap_sub_doppler"]
        _check_known(sd_block, {"equilibrium_temperature_uK", "friction_scale",
                                "capture_velocity_m_per_s"}, "trap_sub_doppler")
        sub_doppler = TrapSubDopplerParams(
            equilibrium_temperature=_number(
                _require(sd_block, "equilibrium_temperature_uK", "trap_sub_doppler"),
                "trap_sub_doppler.equilibrium_temperature_uK") * 1e-6,
            friction_scale=_number(sd_block.get("friction_scale", 1.0),
                                   "trap_sub_doppler.friction_scale"),
            capture_velocity=_number(sd_block.get("capture_velocity_m_per_s", 2.0),
                                     "trap_sub_doppler.capture_velocity_m_per_s"),
        )

    scenario = Scenario(
        species=species,
        beams=beams,
        device=device,
        quad=quad,
        vapor=vapor,
        background_loss_rate=bg,
        gravity=gravity,
        trap_sub_doppler=sub_doppler,
    )
    if v_trunc == "auto":
        vapor = dataclasses.replace(vapor, v_trunc=5.0 * estimate_capture_velocity(scenario))
        scenario = dataclasses.replace(scenario, vapor=vapor)
    return scenario


def load_scenario(text: str) -> Scenario:
    """Parse a JSON scenario document (lab units) into a validated SI Scenario."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return scenario_from_document(doc)
