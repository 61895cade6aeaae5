"""Monte Carlo simulator and fitting toolkit for magneto-optical traps
loaded inside a sub-millimeter hole of a transparent membrane.

Layout:
  scene     - species, beams, membrane device, quadrupole field, scenarios
  dynamics  - stochastic atom propagation and the loading-run driver
  cooling   - polarization-gradient stage (friction/diffusion closure)
  measure   - clouds, region counting, cloud statistics, time of flight
  fit       - loading/decay/TOF/power-law fits and capture-velocity search
  cli       - batch command-line front-end (membrane-mot)
"""

__version__ = "0.1.0"

from .cooling import (
    PgModelParams,
    PgSchedule,
    default_pg_schedule,
    pg_force,
    run_pg_stage,
    schedule_at,
)
from .dynamics import (
    AtomState,
    Event,
    MotTimeSeries,
    StepParams,
    Status,
    net_force,
    propagate_cloud,
    run_mot,
    sample_injected_atom,
    scattering_rate_per_beam,
    simulate_mot,
    step,
)
from .fit import (
    CaptureResult,
    DecayFit,
    LoadingFit,
    PowerLawFit,
    TofFit,
    capture_velocity,
    fit_decay,
    fit_loading,
    fit_power_law,
    fit_tof,
)
from .measure import (
    Cloud,
    HoleCylinderRegion,
    SphereRegion,
    TofSeries,
    cloud_diameter_1e2,
    count_in_region,
    hole_cylinder_region,
    run_tof,
)
from .scene import (
    AtomSpecies,
    Beam,
    MembraneDevice,
    QuadrupoleField,
    Scenario,
    VaporSource,
    beam_intensity,
    canonical_document,
    canonical_scenario,
    intersect_segment,
    load_scenario,
    magnetic_field,
    six_beam_set,
)
