"""Batch front-end: scenario runs, parameter sweeps, curve fits, TOF
pipelines and capture-velocity searches, all emitting CSV/JSON artifacts
into a designated output directory.

Every stochastic command requires an explicit --seed (no wall-clock
seeding) and embeds the seed plus the scenario input hash into each
artifact, so re-running a manifest reproduces outputs byte for byte.
Exit codes: 0 success, 1 validation error, 2 runtime/fit error.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .cooling import PgModelParams, default_pg_schedule, run_pg_stage
from .dynamics import StepParams, simulate_mot
from .fit import (
    FitError,
    TemperatureNotIdentifiableError,
    UnidentifiableBetaError,
    capture_velocity,
    fit_decay,
    fit_loading,
    fit_power_law,
    fit_tof,
)
from .io import (
    read_loading_series,
    read_tof_series,
    read_two_columns,
    write_events_csv,
    write_pg_csv,
    write_series_csv,
    write_tof_csv,
    write_trajectories_csv,
)
from .measure import SphereRegion, hole_cylinder_region, run_tof
from .scene import (
    CANONICAL_NAMES,
    ConfigError,
    ValidationError,
    canonical_document,
    scenario_from_document,
)
from .units import amu

DEFAULT_TOF_DROPS = (1e-3, 2e-3, 3e-3, 4e-3, 5e-3)
DEFAULT_FREE_SPACE_REGION_RADIUS = 2e-3


@dataclass
class RunManifest:
    """Complete description of one CLI invocation."""

    command: str
    out: str
    scenario: str | None = None
    seed: int | None = None
    overrides: dict = field(default_factory=dict)
    workers: int = 1
    dt: float = 1e-6
    max_time: float = 1.0
    sample_dt: float = 1e-3
    region: str = "auto"
    pg: bool = False
    tof_drops: list | None = None
    trajectories: bool = False
    sweep_key: str | None = None
    values: list | None = None
    model: str | None = None
    input: str | None = None
    direction: list | None = None
    tolerance: float = 0.1
    name: str | None = None
    mass_amu: float = 132.905451931

    STOCHASTIC = ("run", "sweep", "tof")

    def __post_init__(self):
        if self.command in self.STOCHASTIC:
            if self.seed is None:
                raise ConfigError(f"command {self.command!r} requires an explicit seed")
            self.seed = int(self.seed)


def _manifest_from_file(path: str, command: str, out: str | None, workers: int | None) -> RunManifest:
    try:
        data = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"manifest file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"manifest {path}: {exc}")
    known = {f.name for f in dataclasses.fields(RunManifest)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"manifest {path}: unknown keys {sorted(unknown)}")
    data.setdefault("command", command)
    if data["command"] != command:
        raise ConfigError(f"manifest command {data['command']!r} does not match {command!r}")
    if out is not None:
        data["out"] = out
    if workers is not None:
        data["workers"] = workers
    if "out" not in data:
        raise ConfigError(f"manifest {path}: missing output directory")
    return RunManifest(**data)


# ---------------------------------------------------------------------------
# Document plumbing

def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or ():
        key, sep, value = pair.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {pair!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _deep_set(doc, dotted: str, value, must_exist: bool):
    parts = dotted.split(".")
    node = doc
    for part in parts[:-1]:
        if isinstance(node, list):
            if not part.lstrip("-").isdigit():
                raise ConfigError(f"key {dotted!r}: {part!r} must index a list")
            node = node[int(part)]
        elif isinstance(node, dict):
            if part not in node:
                if must_exist:
                    raise ConfigError(f"unknown key {dotted!r} ({part!r} not in document)")
                node[part] = {}
            node = node[part]
        else:
            raise ConfigError(f"key {dotted!r} descends into a scalar at {part!r}")
    leaf = parts[-1]
    if isinstance(node, list):
        node[int(leaf)] = value
    else:
        if must_exist and leaf not in node:
            raise ConfigError(f"unknown key {dotted!r} ({leaf!r} not in document)")
        node[leaf] = value


def _load_document(manifest: RunManifest):
    if manifest.scenario is None:
        raise ConfigError("missing --scenario path")
    path = Path(manifest.scenario)
    if not path.exists():
        raise ConfigError(f"scenario file not found: {path}")
    raw = path.read_bytes()
    try:
        doc = json.loads(raw.decode())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario {path}: parse error line {exc.lineno}: {exc.msg}")
    for key, value in manifest.overrides.items():
        _deep_set(doc, key, value, must_exist=False)
    digest = hashlib.sha256(
        raw + json.dumps(manifest.overrides, sort_keys=True).encode()).hexdigest()
    return doc, digest


def _resolve_region(scenario, spec: str):
    if spec == "auto":
        if scenario.device is not None:
            return hole_cylinder_region(scenario.device)
        return SphereRegion(center=scenario.center, radius=DEFAULT_FREE_SPACE_REGION_RADIUS)
    kind, sep, value = spec.partition(":")
    if not sep:
        raise ConfigError(f"--region must be auto, sphere:R_MM or hole:HEIGHT_MM, got {spec!r}")
    size = float(value) * 1e-3
    if kind == "sphere":
        return SphereRegion(center=scenario.center, radius=size)
    if kind == "hole":
        if scenario.device is None:
            raise ConfigError("hole region requires a scenario with a device")
        return hole_cylinder_region(scenario.device, height=size)
    raise ConfigError(f"unknown region kind {spec!r}")


def _meta(manifest: RunManifest, digest: str) -> dict:
    return {
        "generator": f"membrane-mot {__version__}",
        "seed": manifest.seed,
        "scenario_sha256": digest,
        "overrides": json.dumps(manifest.overrides, sort_keys=True),
    }


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _loading_fit_report(series):
    times = series.sample_times
    counts = series.weighted_counts
    try:
        res = fit_loading(times, counts)
        return {
            "identifiable": True,
            "alpha_per_s": res.alpha,
            "beta_per_s": res.beta,
            "lifetime_s": 1.0 / res.beta,
            "steady_state": res.steady_state,
            "rms_residual": res.rms_residual,
            "covariance": np.asarray(res.covariance).tolist(),
        }
    except UnidentifiableBetaError as exc:
        return {"identifiable": False, "reason": str(exc),
                "beta_estimate_per_s": exc.beta_estimate}
    except FitError as exc:
        return {"identifiable": False, "reason": str(exc)}


def _tof_fit_report(tof, mass):
    report = {}
    for axis in ("H", "V"):
        try:
            res = fit_tof(tof, mass, axis=axis)
            report[axis] = {"identifiable": True, "temperature_K": res.temperature,
                            "sigma0_m": res.sigma0, "rms_residual": res.rms_residual}
        except TemperatureNotIdentifiableError as exc:
            report[axis] = {"identifiable": False, "reason": str(exc), "raw_slope": exc.slope}
        except FitError as exc:
            report[axis] = {"identifiable": False, "reason": str(exc)}
    return report


# ---------------------------------------------------------------------------
# Commands

def _pipeline(manifest: RunManifest, scenario, region, out: Path, meta: dict):
    """run_mot (+ optional PG and TOF stages); returns summary fragments."""
    params = StepParams(rng_seed=manifest.seed, max_time=manifest.max_time,
                        dt=manifest.dt, sample_dt=manifest.sample_dt)
    result = simulate_mot(scenario, params, region, workers=manifest.workers,
                          record_trajectories=manifest.trajectories)
    write_series_csv(out / "loading.csv", result.series, meta)
    write_events_csv(out / "events.csv", result.series.events, meta)
    outputs = ["loading.csv", "events.csv"]
    summary = {
        "n_injected": int(len(result.injection_times)),
        "n_live_final": int(len(result.final_cloud)),
        "final_weighted_count": float(result.series.weighted_counts[-1]),
        "region": result.series.region,
    }
    fit_report = _loading_fit_report(result.series)
    _write_json(out / "loading_fit.json", fit_report)
    outputs.append("loading_fit.json")
    summary["loading_fit"] = fit_report

    cloud = result.final_cloud
    if manifest.pg:
        schedule = default_pg_schedule(scenario)
        cloud, pg_summary = run_pg_stage(scenario, cloud, schedule, PgModelParams(),
                                         manifest.seed, return_summary=True)
        write_pg_csv(out / "pg_summary.csv", pg_summary, meta)
        outputs.append("pg_summary.csv")
        summary["pg_survivors"] = int(len(cloud))

    if manifest.tof_drops:
        drops = sorted(float(t) for t in manifest.tof_drops)
        tof = run_tof(scenario, cloud, drops, seed=manifest.seed)
        write_tof_csv(out / "tof.csv", tof, meta)
        outputs.append("tof.csv")
        tof_report = _tof_fit_report(tof, scenario.species.mass)
        _write_json(out / "tof_fit.json", tof_report)
        outputs.append("tof_fit.json")
        summary["tof_fit"] = tof_report

    if manifest.trajectories and result.trajectories is not None:
        write_trajectories_csv(out / "trajectories.csv", result.trajectories,
                               result.born_steps, manifest.dt, meta)
        outputs.append("trajectories.csv")
    summary["outputs"] = outputs
    return summary


def cmd_run(manifest: RunManifest) -> int:
    doc, digest = _load_document(manifest)
    scenario = scenario_from_document(doc)
    region = _resolve_region(scenario, manifest.region)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(manifest, digest)
    summary = _pipeline(manifest, scenario, region, out, meta)
    summary.update({"command": "run", "scenario": manifest.scenario,
                    "scenario_sha256": digest, "seed": manifest.seed,
                    "dt": manifest.dt, "max_time": manifest.max_time,
                    "sample_dt": manifest.sample_dt, "workers": manifest.workers,
                    "overrides": manifest.overrides, "version": __version__})
    _write_json(out / "run_summary.json", summary)
    fit_rep = summary["loading_fit"]
    if fit_rep.get("identifiable"):
        print(f"alpha = {fit_rep['alpha_per_s']:.6g} /s, "
              f"1/beta = {fit_rep['lifetime_s']:.6g} s, "
              f"N_ss = {fit_rep['steady_state']:.6g}")
    else:
        print(f"loading fit not identifiable: {fit_rep.get('reason')}")
    return 0


def _derived_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence(entropy=(seed, 3, index)).generate_state(1, np.uint64)[0])


def cmd_sweep(manifest: RunManifest) -> int:
    if not manifest.sweep_key:
        raise ConfigError("sweep requires --key")
    if not manifest.values:
        raise ConfigError("sweep requires a non-empty --values list")
    doc, digest = _load_document(manifest)
    # the key must address an existing numeric field
    probe = copy.deepcopy(doc)
    _deep_set(probe, manifest.sweep_key, 0.0, must_exist=True)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(manifest, digest)

    rows = []
    for i, value in enumerate(manifest.values):
        point_doc = copy.deepcopy(doc)
        _deep_set(point_doc, manifest.sweep_key, float(value), must_exist=True)
        scenario = scenario_from_document(point_doc)
        seed_i = _derived_seed(manifest.seed, i)
        params = StepParams(rng_seed=seed_i, max_time=manifest.max_time,
                            dt=manifest.dt, sample_dt=manifest.sample_dt)
        region = _resolve_region(scenario, manifest.region)
        result = simulate_mot(scenario, params, region, workers=manifest.workers)
        fit_rep = _loading_fit_report(result.series)
        cloud = result.final_cloud
        schedule = default_pg_schedule(scenario)
        cloud, _ = run_pg_stage(scenario, cloud, schedule, PgModelParams(), seed_i,
                                return_summary=True)
        t_h = t_v = float("nan")
        if len(cloud) >= 3:
            drops = list(manifest.tof_drops or DEFAULT_TOF_DROPS)
            tof = run_tof(scenario, cloud, drops, seed=seed_i)
            rep = _tof_fit_report(tof, scenario.species.mass)
            if rep["H"].get("identifiable"):
                t_h = rep["H"]["temperature_K"]
            if rep["V"].get("identifiable"):
                t_v = rep["V"]["temperature_K"]
        rows.append((
            float(value), seed_i,
            fit_rep.get("alpha_per_s", float("nan")),
            fit_rep.get("beta_per_s", float("nan")),
            1.0 / fit_rep["beta_per_s"] if fit_rep.get("identifiable") else float("nan"),
            fit_rep.get("steady_state", float("nan")),
            t_h, t_v,
        ))

    header = ["value", "seed", "alpha_per_s", "beta_per_s", "lifetime_s",
              "n_ss", "t_h_K", "t_v_K"]
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(f"# sweep_key={manifest.sweep_key}")
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(str(int(v)) if isinstance(v, (int, np.integer)) else repr(float(v))
                              for v in row))
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    (out / "sweep.gp").write_text(_GNUPLOT_TEMPLATE.format(key=manifest.sweep_key))
    _write_json(out / "sweep_summary.json", {
        "command": "sweep", "scenario": manifest.scenario, "seed": manifest.seed,
        "scenario_sha256": digest, "sweep_key": manifest.sweep_key,
        "values": [float(v) for v in manifest.values], "version": __version__,
        "outputs": ["sweep.csv", "sweep.gp"]})
    print(f"swept {manifest.sweep_key} over {len(rows)} points -> {out / 'sweep.csv'}")
    return 0


_GNUPLOT_TEMPLATE = """\
# gnuplot script for sweep.csv (sweep of {key})
set datafile separator ","
set datafile commentschars "#"
set key outside
set xlabel "{key}"
set multiplot layout 2,2
set ylabel "loading rate (1/s)"
plot "sweep.csv" using 1:3 with linespoints title "alpha"
set ylabel "lifetime (s)"
plot "sweep.csv" using 1:5 with linespoints title "1/beta"
set ylabel "steady-state count"
plot "sweep.csv" using 1:6 with linespoints title "N_ss"
set ylabel "temperature (K)"
plot "sweep.csv" using 1:7 with linespoints title "T_H", \\
     "sweep.csv" using 1:8 with linespoints title "T_V"
unset multiplot
"""


def cmd_fit(manifest: RunManifest) -> int:
    if manifest.model not in ("loading", "decay", "tof", "powerlaw"):
        raise ConfigError("fit requires --model loading|decay|tof|powerlaw")
    if not manifest.input:
        raise ConfigError("fit requires --input CSV")
    if not Path(manifest.input).exists():
        raise ConfigError(f"input file not found: {manifest.input}")
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    report = {"model": manifest.model, "input": manifest.input, "version": __version__}
    status = 0
    try:
        if manifest.model == "loading":
            times, counts = read_loading_series(manifest.input)
            res = fit_loading(times, counts)
            report.update({"identifiable": True, "alpha_per_s": res.alpha,
                           "beta_per_s": res.beta, "lifetime_s": 1.0 / res.beta,
                           "steady_state": res.steady_state,
                           "rms_residual": res.rms_residual,
                           "covariance": np.asarray(res.covariance).tolist()})
            headline = f"alpha = {res.alpha:.6g} /s, 1/beta = {1.0 / res.beta:.6g} s"
        elif manifest.model == "decay":
            times, counts = read_loading_series(manifest.input)
            res = fit_decay(times, counts)
            report.update({"identifiable": True, "n0": res.n0, "beta_per_s": res.beta,
                           "lifetime_s": 1.0 / res.beta, "rms_residual": res.rms_residual})
            headline = f"N0 = {res.n0:.6g}, 1/beta = {1.0 / res.beta:.6g} s"
        elif manifest.model == "tof":
            series = read_tof_series(manifest.input)
            mass = manifest.mass_amu * amu
            rep = _tof_fit_report(series, mass)
            report.update(rep)
            if not (rep["H"].get("identifiable") or rep["V"].get("identifiable")):
                status = 2
            headline = ", ".join(
                f"T_{ax} = {rep[ax]['temperature_K'] * 1e6:.3g} uK"
                if rep[ax].get("identifiable") else f"T_{ax} = (not identifiable)"
                for ax in ("H", "V"))
        else:
            x, y = read_two_columns(manifest.input)
            res = fit_power_law(x, y)
            report.update({"identifiable": True, "exponent": res.exponent,
                           "prefactor": res.prefactor, "r_squared": res.r_squared})
            headline = f"exponent = {res.exponent:.6g} (r^2 = {res.r_squared:.4f})"
    except UnidentifiableBetaError as exc:
        report.update({"identifiable": False, "reason": str(exc),
                       "beta_estimate_per_s": exc.beta_estimate})
        headline = f"not identifiable: {exc}"
        status = 2
    except TemperatureNotIdentifiableError as exc:
        report.update({"identifiable": False, "reason": str(exc), "raw_slope": exc.slope})
        headline = f"not identifiable: {exc}"
        status = 2
    _write_json(out / "fit_report.json", report)
    print(headline)
    return status


def cmd_tof(manifest: RunManifest) -> int:
    if not manifest.tof_drops:
        manifest.tof_drops = list(DEFAULT_TOF_DROPS)
    doc, digest = _load_document(manifest)
    scenario = scenario_from_document(doc)
    region = _resolve_region(scenario, manifest.region)
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    meta = _meta(manifest, digest)
    summary = _pipeline(manifest, scenario, region, out, meta)
    summary.update({"command": "tof", "scenario": manifest.scenario,
                    "seed": manifest.seed, "scenario_sha256": digest,
                    "version": __version__})
    _write_json(out / "run_summary.json", summary)
    rep = summary.get("tof_fit", {})
    for ax in ("H", "V"):
        entry = rep.get(ax, {})
        if entry.get("identifiable"):
            print(f"T_{ax} = {entry['temperature_K'] * 1e6:.3g} uK")
        else:
            print(f"T_{ax}: not identifiable ({entry.get('reason', 'no data')})")
    return 0


def cmd_capture(manifest: RunManifest) -> int:
    doc, digest = _load_document(manifest)
    scenario = scenario_from_document(doc)
    if manifest.direction is None:
        raise ConfigError("capture requires --direction X,Y,Z")
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    res = capture_velocity(scenario, manifest.direction, manifest.tolerance)
    payload = {
        "command": "capture", "scenario": manifest.scenario,
        "scenario_sha256": digest, "direction": list(map(float, res.direction)),
        "v_c_m_per_s": res.v_c, "bracket_m_per_s": list(res.bracket),
        "tolerance_m_per_s": manifest.tolerance,
        "empty_capture": res.empty_capture, "capture_at_max": res.capture_at_max,
        "version": __version__,
    }
    _write_json(out / "capture.json", payload)
    print(f"v_c = {res.v_c:.4g} m/s (bracket [{res.bracket[0]:.4g}, {res.bracket[1]:.4g}])")
    return 0


def cmd_scenario_gen(manifest: RunManifest) -> int:
    if manifest.name not in CANONICAL_NAMES:
        raise ConfigError(f"--name must be one of {CANONICAL_NAMES}")
    doc = canonical_document(manifest.name)
    for key, value in manifest.overrides.items():
        _deep_set(doc, key, value, must_exist=False)
    scenario_from_document(doc)        # round-trip validation before writing
    out = Path(manifest.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{manifest.name}.json"
    path.write_text(json.dumps(doc, indent=2) + "\n")
    print(str(path))
    return 0


# ---------------------------------------------------------------------------
# Argument parsing

def _add_common(sub, stochastic: bool):
    sub.add_argument("--manifest", help="JSON manifest with the full command description")
    sub.add_argument("--scenario", help="scenario document path")
    sub.add_argument("--out", required=False, help="output directory")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a scenario document field (dotted key)")
    sub.add_argument("--workers", type=int, default=1)
    if stochastic:
        sub.add_argument("--seed", type=int, help="RNG seed (required)")
        sub.add_argument("--dt", type=float, default=1e-6)
        sub.add_argument("--max-time", type=float, default=1.0)
        sub.add_argument("--sample-dt", type=float, default=1e-3)
        sub.add_argument("--region", default="auto",
                         help="auto | sphere:RADIUS_MM | hole:HEIGHT_MM")


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="membrane-mot",
        description="Monte Carlo trap-loading simulator and fitting toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a loading curve (optional PG/TOF stages)")
    _add_common(p_run, stochastic=True)
    p_run.add_argument("--pg", action="store_true", help="apply the PG cooling stage")
    p_run.add_argument("--tof", type=_float_list, metavar="T1,T2,...",
                       help="drop times (s) for a TOF stage")
    p_run.add_argument("--trajectories", action="store_true",
                       help="record full trajectories (test mode, single worker)")

    p_sweep = sub.add_parser("sweep", help="one simulation per value of a scenario field")
    _add_common(p_sweep, stochastic=True)
    p_sweep.add_argument("--key", help="dotted document key, e.g. device.hole_diameter_mm")
    p_sweep.add_argument("--values", type=_float_list, metavar="V1,V2,...")
    p_sweep.add_argument("--tof-drops", type=_float_list, metavar="T1,T2,...")

    p_fit = sub.add_parser("fit", help="fit a CSV series")
    p_fit.add_argument("--manifest")
    p_fit.add_argument("--model", choices=("loading", "decay", "tof", "powerlaw"))
    p_fit.add_argument("--input", help="input CSV path")
    p_fit.add_argument("--out", required=False)
    p_fit.add_argument("--mass-amu", type=float, default=132.905451931,
                       help="atomic mass for TOF temperature conversion")

    p_tof = sub.add_parser("tof", help="loading run followed by TOF thermometry")
    _add_common(p_tof, stochastic=True)
    p_tof.add_argument("--pg", action="store_true", help="PG-cool before the drop")
    p_tof.add_argument("--drops", type=_float_list, metavar="T1,T2,...",
                       help="drop times in seconds")

    p_cap = sub.add_parser("capture", help="deterministic capture-velocity bisection")
    p_cap.add_argument("--manifest")
    p_cap.add_argument("--scenario")
    p_cap.add_argument("--out", required=False)
    p_cap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p_cap.add_argument("--direction", help="launch direction X,Y,Z")
    p_cap.add_argument("--tolerance", type=float, default=0.1)

    p_gen = sub.add_parser("scenario-gen", help="emit a canonical scenario document")
    p_gen.add_argument("--name", help=f"one of {', '.join(CANONICAL_NAMES)}")
    p_gen.add_argument("--out", required=False)
    p_gen.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    return parser


def _manifest_from_args(args) -> RunManifest:
    if getattr(args, "manifest", None):
        return _manifest_from_file(args.manifest, args.command,
                                   getattr(args, "out", None),
                                   getattr(args, "workers", None))
    if getattr(args, "out", None) is None:
        raise ConfigError("missing --out output directory")
    kwargs = dict(command=args.command, out=args.out,
                  overrides=_parse_overrides(getattr(args, "set", [])))
    for attr, key in (("scenario", "scenario"), ("seed", "seed"), ("workers", "workers"),
                      ("dt", "dt"), ("max_time", "max_time"), ("sample_dt", "sample_dt"),
                      ("region", "region"), ("pg", "pg"), ("trajectories", "trajectories"),
                      ("key", "sweep_key"), ("values", "values"), ("model", "model"),
                      ("input", "input"), ("tolerance", "tolerance"), ("name", "name"),
                      ("mass_amu", "mass_amu")):
        if hasattr(args, attr) and getattr(args, attr) is not None:
            kwargs[key] = getattr(args, attr)
    drops = getattr(args, "tof", None) or getattr(args, "drops", None) \
        or getattr(args, "tof_drops", None)
    if drops:
        kwargs["tof_drops"] = drops
    direction = getattr(args, "direction", None)
    if direction:
        kwargs["direction"] = [float(v) for v in direction.split(",")]
    return RunManifest(**kwargs)


_DISPATCH = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "fit": cmd_fit,
    "tof": cmd_tof,
    "capture": cmd_capture,
    "scenario-gen": cmd_scenario_gen,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = _manifest_from_args(args)
        return _DISPATCH[args.command](manifest)
    except FitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:   # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
