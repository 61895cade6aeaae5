"""Physical constants and lab-unit <-> SI conversions.

Everything internal to the package is SI (m, s, kg, W, tesla, rad/s).
Scenario documents use lab units (mW, mm, MHz, G/cm, degrees); the
converters below are applied once at the load boundary.
"""

from scipy.constants import hbar, k as k_B, g as g_earth, atomic_mass as amu

__all__ = [
    "hbar", "k_B", "g_earth", "amu",
    "mw_to_w", "mm_to_m", "um_to_m", "nm_to_m",
    "mhz_to_rad_s", "gauss_per_cm_to_tesla_per_m",
    "mw_cm2_to_w_m2", "mhz_per_gauss_to_rad_s_per_tesla",
]

TWO_PI = 6.283185307179586


def mw_to_w(p):
    return p * 1e-3


def mm_to_m(x):
    return x * 1e-3


def um_to_m(x):
    return x * 1e-6


def nm_to_m(x):
    return x * 1e-9


def mhz_to_rad_s(f):
    """Frequency quoted as f = omega/2pi in MHz -> angular rad/s."""
    return TWO_PI * f * 1e6


def gauss_per_cm_to_tesla_per_m(g):
    # 1 G = 1e-4 T, 1/cm = 1e2/m
    return g * 1e-2


def mw_cm2_to_w_m2(i):
    return i * 10.0


def mhz_per_gauss_to_rad_s_per_tesla(v):
    # 2pi * 1e6 (MHz -> rad/s) * 1e4 (per G -> per T)
    return TWO_PI * v * 1e10
