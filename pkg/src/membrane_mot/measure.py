"""Virtual diagnostics: region counting, cloud statistics and time-of-flight
expansion with membrane shadowing.

Clouds are stored as parallel arrays (positions, velocities, statistical
weights); by construction they contain only live atoms, so every statistic
here is over the live ensemble.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .scene import MembraneDevice, Scenario, _classify_plane_point
from .units import k_B

__all__ = [
    "Cloud", "TofSeries", "SphereRegion", "HoleCylinderRegion",
    "hole_cylinder_region", "count_in_region", "cloud_diameter_1e2",
    "cloud_temperature", "horizontal_vertical_temperatures", "run_tof",
    "TooFewAtomsError",
]


class TooFewAtomsError(ValueError):
    """Raised when an estimator is asked for statistics on too small a cloud."""


@dataclass(frozen=True)
class Cloud:
    """Snapshot ensemble of live atoms with per-atom statistical weights."""

    positions: np.ndarray           # (N, 3) m
    velocities: np.ndarray          # (N, 3) m/s
    weights: np.ndarray             # (N,)
    timestamp: float = 0.0          # s
    birth_times: np.ndarray | None = None   # (N,) s, injection times if known

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        vel = np.atleast_2d(np.asarray(self.velocities, dtype=float))
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if pos.shape != vel.shape or pos.shape[0] != w.shape[0] or pos.shape[1:] != (3,):
            raise ValueError("cloud arrays must be (N,3), (N,3), (N,)")
        if w.size and not np.all(w > 0):
            raise ValueError("cloud weights must be positive")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)
        object.__setattr__(self, "weights", w)
        if self.birth_times is not None:
            object.__setattr__(self, "birth_times",
                               np.atleast_1d(np.asarray(self.birth_times, dtype=float)))

    def __len__(self):
        return self.positions.shape[0]

    @property
    def total_weight(self) -> float:
        return float(np.sum(self.weights))

    def atom_states(self):
        """The ensemble as individual AtomState records (all Active)."""
        from .dynamics import AtomState
        return [AtomState(position=p.copy(), velocity=v.copy())
                for p, v in zip(self.positions, self.velocities)]


@dataclass(frozen=True)
class TofSeries:
    """Ballistic-expansion record: widths are 1/e^2 radii (= 2 sigma)."""

    drop_times: np.ndarray
    widths_h: np.ndarray
    widths_v: np.ndarray
    survivors: np.ndarray           # weighted survivor counts

    def __post_init__(self):
        t = np.asarray(self.drop_times, dtype=float)
        if t.size == 0 or np.any(np.diff(t) <= 0):
            raise ValueError("drop_times must be nonempty and strictly increasing")
        object.__setattr__(self, "drop_times", t)
        for name in ("widths_h", "widths_v", "survivors"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


@dataclass(frozen=True)
class SphereRegion:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("sphere region radius must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(points) - self.center
        return np.einsum("ij,ij->i", d, d) <= self.radius ** 2

    def describe(self) -> str:
        return f"sphere(r={self.radius:g} m)"


@dataclass(frozen=True)
class HoleCylinderRegion:
    """Cylinder through the membrane hole: axis along the plane normal."""

    center: np.ndarray
    axis: np.ndarray
    radius: float
    height: float                   # full height, centered on the plane

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        axis = np.asarray(self.axis, dtype=float)
        object.__setattr__(self, "axis", axis / np.linalg.norm(axis))
        if not (self.radius > 0 and self.height > 0):
            raise ValueError("cylinder region radius and height must be positive")

    def contains(self, points: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(points) - self.center
        h = d @ self.axis
        rho2 = np.einsum("ij,ij->i", d, d) - h * h
        return (np.abs(h) <= 0.5 * self.height) & (rho2 <= self.radius ** 2)

    def describe(self) -> str:
        return f"hole_cylinder(r={self.radius:g} m, h={self.height:g} m)"


def hole_cylinder_region(device: MembraneDevice, height: float | None = None) -> HoleCylinderRegion:
    """Counting cylinder through the hole; default height is 4 hole radii."""
    if height is None:
        height = 4.0 * device.hole_radius
    return HoleCylinderRegion(center=device.plane_point, axis=device.plane_normal,
                              radius=device.hole_radius, height=height)


def count_in_region(cloud: Cloud, region) -> float:
    """Weighted number of live atoms inside the region."""
    if len(cloud) == 0:
        return 0.0
    return float(np.sum(cloud.weights[region.contains(cloud.positions)]))


def _weighted_std(values: np.ndarray, weights: np.ndarray) -> float:
    mean = np.average(values, weights=weights)
    return math.sqrt(float(np.average((values - mean) ** 2, weights=weights)))


def cloud_diameter_1e2(cloud: Cloud, axis) -> float:
    """Gaussian 1/e^2 diameter (= 4 sigma) of the cloud projected on ``axis``."""
    if len(cloud) < 30:
        raise TooFewAtomsError(f"need >= 30 atoms for a size estimate, got {len(cloud)}")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return 4.0 * _weighted_std(cloud.positions @ axis, cloud.weights)


def cloud_temperature(cloud: Cloud, mass: float, axis) -> float:
    """Kinetic temperature along one axis: m Var(v.axis) / k_B."""
    if len(cloud) < 2:
        raise TooFewAtomsError("need >= 2 atoms for a temperature estimate")
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return mass * _weighted_std(cloud.velocities @ axis, cloud.weights) ** 2 / k_B


def horizontal_vertical_temperatures(cloud: Cloud, mass: float) -> tuple[float, float]:
    """(T_H, T_V): horizontal-plane (x,y average) and vertical-axis temperatures."""
    t_x = cloud_temperature(cloud, mass, (1, 0, 0))
    t_y = cloud_temperature(cloud, mass, (0, 1, 0))
    t_z = cloud_temperature(cloud, mass, (0, 0, 1))
    return 0.5 * (t_x + t_y), t_z


def _membrane_death_times(device: MembraneDevice, positions, velocities, gravity, t_max):
    """Per-atom time of first solid crossing during ballistic flight (inf if none).

    Free flight is exactly parabolic, so plane crossings are the real roots
    of a quadratic per atom; each root is classified against the hole /
    bridge footprint.
    """
    n = device.plane_normal
    a = 0.5 * float(n @ gravity)
    b = velocities @ n
    c = (positions - device.plane_point) @ n
    deaths = np.full(positions.shape[0], np.inf)
    for i in range(positions.shape[0]):
        roots = []
        if a == 0.0:
            if b[i] != 0.0:
                roots.append(-c[i] / b[i])
        else:
            disc = b[i] * b[i] - 4.0 * a * c[i]
            if disc >= 0.0:
                sq = math.sqrt(disc)
                roots.extend(((-b[i] - sq) / (2 * a), (-b[i] + sq) / (2 * a)))
        for t in sorted(roots):
            if t <= 0.0 or t > t_max:
                continue
            x = positions[i] + velocities[i] * t + 0.5 * gravity * t * t
            u, v = device.in_plane_coords(x)
            kind = _classify_plane_point(device, u, v)
            if kind in ("membrane", "bridge"):
                deaths[i] = t
                break
    return deaths


def run_tof(scenario: Scenario, cloud: Cloud, drop_times, seed=None) -> TofSeries:
    """Time-of-flight expansion: all light off, ballistic flight under gravity.

    Atoms whose parabolic path crosses the solid membrane or bridge are
    removed at the crossing time.  At each drop time the weighted survivor
    count and the 1/e^2 radii along the horizontal plane and the vertical
    axis are recorded.  Propagation is deterministic; ``seed`` is accepted
    for interface symmetry and unused.
    """
    drop_times = np.asarray(drop_times, dtype=float)
    if drop_times.size == 0 or np.any(np.diff(drop_times) <= 0):
        raise ValueError("drop_times must be nonempty and strictly increasing")
    gravity = scenario.gravity
    if scenario.device is not None and len(cloud):
        deaths = _membrane_death_times(scenario.device, cloud.positions,
                                       cloud.velocities, gravity, float(drop_times[-1]))
    else:
        deaths = np.full(len(cloud), np.inf)

    widths_h = []
    widths_v = []
    survivors = []
    for t in drop_times:
        alive = deaths > t
        w = cloud.weights[alive]
        survivors.append(float(np.sum(w)))
        if np.count_nonzero(alive) >= 2:
            pos = cloud.positions[alive] + cloud.velocities[alive] * t + 0.5 * gravity * t * t
            sx = _weighted_std(pos[:, 0], w)
            sy = _weighted_std(pos[:, 1], w)
            sz = _weighted_std(pos[:, 2], w)
            widths_h.append(2.0 * math.sqrt(0.5 * (sx * sx + sy * sy)))
            widths_v.append(2.0 * sz)
        else:
            widths_h.append(float("nan"))
            widths_v.append(float("nan"))
    return TofSeries(drop_times=drop_times, widths_h=np.array(widths_h),
                     widths_v=np.array(widths_v), survivors=np.array(survivors))
