"""Curve fitting and searches that turn simulated series into trap figures
of merit: loading rate and lifetime, expansion temperature, beam-diameter
scaling exponent, and capture velocity.

The nonlinear fits use a damped Gauss-Newton iteration with analytic
Jacobians (two-parameter problems need no general solver): lambda starts at
1e-3, grows 10x on a rejected step and shrinks 10x on an accepted one, and
the objective never increases across accepted steps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernel
from .dynamics import _kernel_scene_args
from .scene import Scenario, estimate_capture_velocity
from .units import k_B

__all__ = [
    "LoadingFit", "DecayFit", "TofFit", "PowerLawFit", "CaptureResult",
    "FitError", "NonConvergenceError", "UnidentifiableBetaError",
    "TemperatureNotIdentifiableError", "fit_loading", "fit_decay", "fit_tof",
    "fit_power_law", "capture_velocity", "gauss_newton",
]


class FitError(ValueError):
    """Base class for fitting failures."""


class NonConvergenceError(FitError):
    pass


class UnidentifiableBetaError(FitError):
    """Data cannot pin down the loss rate; carries the raw estimate."""

    def __init__(self, message, beta_estimate=None):
        super().__init__(message)
        self.beta_estimate = beta_estimate


class TemperatureNotIdentifiableError(FitError):
    """sigma^2(t^2) slope came out negative; carries the raw slope."""

    def __init__(self, message, slope):
        super().__init__(message)
        self.slope = slope


@dataclass(frozen=True)
class LoadingFit:
    alpha: float                    # atoms/s
    beta: float                     # 1/s
    steady_state: float             # alpha/beta
    covariance: np.ndarray          # 2x2 for (alpha, beta)
    rms_residual: float

    def __post_init__(self):
        if self.alpha < 0 or not self.beta > 0:
            raise FitError(f"loading fit out of range: alpha={self.alpha!r}, beta={self.beta!r}")


@dataclass(frozen=True)
class DecayFit:
    n0: float
    beta: float
    rms_residual: float

    def __post_init__(self):
        if not self.beta > 0:
            raise FitError(f"decay fit out of range: beta={self.beta!r}")


@dataclass(frozen=True)
class TofFit:
    sigma0: float                   # m
    temperature: float              # K
    rms_residual: float             # on sigma^2, m^2

    def __post_init__(self):
        if self.temperature < 0:
            raise FitError("TOF temperature must be nonnegative")


@dataclass(frozen=True)
class PowerLawFit:
    exponent: float
    prefactor: float
    r_squared: float

    def __post_init__(self):
        if not (math.isfinite(self.exponent) and math.isfinite(self.prefactor)):
            raise FitError("power-law fit must be finite")


@dataclass(frozen=True)
class CaptureResult:
    v_c: float                      # m/s
    direction: np.ndarray
    bracket: tuple[float, float]
    empty_capture: bool = False     # nothing captured at any probed speed
    capture_at_max: bool = False    # still captured at the search ceiling

    def __post_init__(self):
        lo, hi = self.bracket
        if not (lo <= self.v_c <= hi):
            raise FitError("capture bracket must contain v_c")


# ---------------------------------------------------------------------------
# Damped Gauss-Newton core

def gauss_newton(residual, jacobian, x0, *, accept=None, max_iter=200,
                 rel_step_tol=1e-10, lam0=1e-3):
    """Minimize sum(residual(x)^2) with Levenberg-style damping.

    ``accept`` may reject candidate parameter vectors (e.g. to keep a rate
    positive); a rejected candidate is treated like an uphill step.  Returns
    (x, ssr, n_iter).  Raises NonConvergenceError when the relative step
    never falls below ``rel_step_tol`` within ``max_iter`` iterations.
    """
    x = np.asarray(x0, dtype=float).copy()
    r = residual(x)
    ssr = float(r @ r)
    lam = lam0
    for it in range(max_iter):
        jac = jacobian(x)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        scale = np.diag(np.maximum(np.diag(jtj), 1e-300))
        try:
            delta = np.linalg.solve(jtj + lam * scale, -jtr)
        except np.linalg.LinAlgError:
            raise NonConvergenceError("normal equations are singular")
        x_new = x + delta
        ok = accept is None or accept(x_new)
        if ok:
            r_new = residual(x_new)
            ssr_new = float(r_new @ r_new)
        if ok and ssr_new <= ssr:
            # accepted steps never increase the objective
            assert ssr_new <= ssr
            step_rel = float(np.linalg.norm(delta) / max(np.linalg.norm(x_new), 1e-300))
            x, r, ssr = x_new, r_new, ssr_new
            lam = max(lam / 10.0, 1e-14)
            if step_rel < rel_step_tol:
                return x, ssr, it + 1
        else:
            lam *= 10.0
            if lam > 1e14:
                # damping saturated: we are at a (possibly flat) minimum
                return x, ssr, it + 1
    raise NonConvergenceError(f"no convergence in {max_iter} iterations")


def _covariance(jac, ssr, n_params):
    n = jac.shape[0]
    dof = max(n - n_params, 1)
    sigma2 = ssr / dof
    try:
        return sigma2 * np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        return np.full((n_params, n_params), np.nan)


def _validate_series(times, counts, min_points):
    times = np.asarray(times, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if times.ndim != 1 or times.shape != counts.shape:
        raise FitError("times and counts must be 1-d arrays of equal length")
    if times.size < min_points:
        raise FitError(f"need at least {min_points} points, got {times.size}")
    if np.any(np.diff(times) <= 0):
        raise FitError("times must be strictly increasing")
    return times, counts


# ---------------------------------------------------------------------------
# Loading / decay fits

def loading_model(times, alpha, beta):
    return (alpha / beta) * (1.0 - np.exp(-beta * times))


def loading_jacobian(times, alpha, beta):
    e = np.exp(-beta * times)
    d_alpha = (1.0 - e) / beta
    d_beta = -(alpha / beta ** 2) * (1.0 - e) + (alpha / beta) * times * e
    return np.column_stack([d_alpha, d_beta])


def fit_loading(times, counts) -> LoadingFit:
    """Least-squares (alpha, beta) of the loading curve N(t) = a/b (1 - e^-bt)."""
    times, counts = _validate_series(times, counts, 5)
    if np.any(counts < 0):
        raise FitError("counts must be nonnegative")
    cmax = float(np.max(counts))
    if cmax == 0.0:
        raise FitError("all-zero data: nothing was loaded")
    if float(np.max(counts) - np.min(counts)) < 1e-12 * cmax:
        raise UnidentifiableBetaError("flat data: beta is unidentifiable")

    above = np.nonzero(counts >= 0.5 * cmax)[0]
    t_half = times[above[0]] if above.size and times[above[0]] > 0 else times[-1] / 4.0
    beta0 = 1.0 / t_half
    alpha0 = beta0 * cmax
    x0 = np.array([alpha0, beta0])

    def residual(x):
        return loading_model(times, x[0], x[1]) - counts

    def jacobian(x):
        return loading_jacobian(times, x[0], x[1])

    x, ssr, _ = gauss_newton(residual, jacobian, x0,
                             accept=lambda x: x[1] > 0 and x[0] >= 0)
    alpha, beta = float(x[0]), float(x[1])
    span = times[-1] - times[0]
    if span < 0.5 / beta:
        raise UnidentifiableBetaError(
            f"time span {span:g}s covers less than 0.5/beta of the model",
            beta_estimate=beta)
    jac = jacobian(x)
    return LoadingFit(alpha=alpha, beta=beta, steady_state=alpha / beta,
                      covariance=_covariance(jac, ssr, 2),
                      rms_residual=math.sqrt(ssr / times.size))


def fit_decay(times, counts) -> DecayFit:
    """Single-exponential N0 e^-bt fit with log-space initialization."""
    times, counts = _validate_series(times, counts, 3)
    cmax = float(np.max(counts))
    if cmax <= 0.0:
        raise FitError("all-zero data: nothing to fit")
    if float(np.max(counts) - np.min(counts)) < 1e-12 * cmax:
        raise UnidentifiableBetaError("constant data: beta is unidentifiable")

    positive = counts > 0
    if np.count_nonzero(positive) >= 2:
        slope, intercept = np.polyfit(times[positive], np.log(counts[positive]), 1)
        beta0 = max(-slope, 1e-12)
        n0 = math.exp(intercept)
    else:
        beta0 = 1.0 / (times[-1] - times[0])
        n0 = cmax
    x0 = np.array([n0, beta0])

    def residual(x):
        return x[0] * np.exp(-x[1] * times) - counts

    def jacobian(x):
        e = np.exp(-x[1] * times)
        return np.column_stack([e, -x[0] * times * e])

    x, ssr, _ = gauss_newton(residual, jacobian, x0, accept=lambda x: x[1] > 0)
    n0, beta = float(x[0]), float(x[1])
    span = times[-1] - times[0]
    if span < 0.5 / beta:
        raise UnidentifiableBetaError(
            f"time span {span:g}s covers less than 0.5/beta of the model",
            beta_estimate=beta)
    return DecayFit(n0=n0, beta=beta, rms_residual=math.sqrt(ssr / times.size))


# ---------------------------------------------------------------------------
# Linear fits

def fit_tof(series, mass: float, axis: str = "H") -> TofFit:
    """Temperature from sigma^2(t) = sigma0^2 + (k_B T / m) t^2.

    ``series`` is a TofSeries; widths are 1/e^2 radii, so sigma = width/2.
    Linear least squares of sigma^2 on t^2; NaN widths are dropped.
    """
    if axis not in ("H", "V"):
        raise FitError("axis must be 'H' or 'V'")
    widths = np.asarray(series.widths_h if axis == "H" else series.widths_v, dtype=float)
    t = np.asarray(series.drop_times, dtype=float)
    good = np.isfinite(widths)
    t, widths = t[good], widths[good]
    if t.size < 3:
        raise FitError(f"need at least 3 usable drop times, got {t.size}")
    sigma2 = (0.5 * widths) ** 2
    t2 = t ** 2
    design = np.column_stack([np.ones_like(t2), t2])
    coef, *_ = np.linalg.lstsq(design, sigma2, rcond=None)
    intercept, slope = float(coef[0]), float(coef[1])
    if slope < 0:
        raise TemperatureNotIdentifiableError(
            f"negative expansion slope {slope:g} m^2/s^2", slope=slope)
    resid = sigma2 - design @ coef
    return TofFit(sigma0=math.sqrt(max(intercept, 0.0)),
                  temperature=slope * mass / k_B,
                  rms_residual=math.sqrt(float(resid @ resid) / t.size))


def fit_power_law(diameters, counts) -> PowerLawFit:
    """Ordinary least squares of ln N on ln d: N = prefactor * d^exponent."""
    d = np.asarray(diameters, dtype=float)
    n = np.asarray(counts, dtype=float)
    if d.shape != n.shape or d.ndim != 1 or d.size < 2:
        raise FitError("need two same-length 1-d arrays with >= 2 points")
    if np.any(d <= 0) or np.any(n <= 0):
        raise FitError("power-law fit requires strictly positive data")
    x = np.log(d)
    y = np.log(n)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 if ss_res < 1e-24 else 1.0 - ss_res / ss_tot
    return PowerLawFit(exponent=float(slope), prefactor=math.exp(float(intercept)),
                       r_squared=r2)


# ---------------------------------------------------------------------------
# Capture-velocity bisection

def capture_velocity(scenario: Scenario, direction, tolerance: float, *,
                     v_max: float | None = None, dt: float = 1e-6,
                     max_flight_time: float = 0.3, capture_radius: float = 100e-6,
                     dwell_time: float = 10e-3) -> CaptureResult:
    """Bisected capture/no-capture speed boundary along ``direction``.

    A noise-free atom starts on the injection sphere moving inward along
    ``direction``; it counts as captured when it enters and stays within
    ``capture_radius`` of the trap center for ``dwell_time``.  The bracket
    starts at [0, v_max] and halves each iteration until its width is at
    most ``tolerance``.
    """
    if not tolerance > 0:
        raise ValueError("tolerance must be positive")
    direction = np.asarray(direction, dtype=float)
    norm = np.linalg.norm(direction)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    direction = direction / norm
    if v_max is None:
        v_max = scenario.vapor.v_trunc or 5.0 * estimate_capture_velocity(scenario)

    scene_args = _kernel_scene_args(scenario)
    start = scenario.center - scenario.vapor.injection_radius * direction
    escape_r = 2.0 * scenario.vapor.injection_radius
    max_steps = int(round(max_flight_time / dt))
    dwell_steps = max(int(round(dwell_time / dt)), 1)

    def captured(speed: float) -> bool:
        res = _kernel.capture_probe(
            start, speed * direction, dt, max_steps,
            *scene_args,
            scenario.gravity, escape_r, scenario.center,
            capture_radius, dwell_steps)
        return bool(res)

    if captured(v_max):
        return CaptureResult(v_c=v_max, direction=direction, bracket=(v_max, v_max),
                             capture_at_max=True)
    lo, hi = 0.0, float(v_max)
    any_captured = False
    n_iter = math.ceil(math.log2(v_max / tolerance)) if v_max > tolerance else 0
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        if captured(mid):
            lo = mid
            any_captured = True
        else:
            hi = mid
    if not any_captured and not captured(lo):
        return CaptureResult(v_c=0.0, direction=direction, bracket=(0.0, 0.0),
                             empty_capture=True)
    return CaptureResult(v_c=0.5 * (lo + hi), direction=direction, bracket=(lo, hi))
