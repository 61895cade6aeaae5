"""CSV artifacts: writers used by the batch front-end and readers used by
the fit commands.  Every file starts with '# key=value' comment lines that
embed at least the seed and the input hash of the run that produced it, so
artifacts are traceable and byte-reproducible.
"""

from __future__ import annotations

import numpy as np

from .measure import TofSeries

__all__ = [
    "write_series_csv", "write_events_csv", "write_tof_csv", "write_pg_csv",
    "write_trajectories_csv", "read_table", "read_loading_series",
    "read_two_columns", "read_tof_series",
]


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def _write(path, meta: dict, header: list[str], rows):
    lines = [f"# {k}={v}" for k, v in meta.items()]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) if not isinstance(v, str) else v for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_series_csv(path, series, meta: dict):
    rows = zip(series.sample_times, series.counts_in_region, series.weighted_counts)
    _write(path, meta, ["time_s", "count", "weighted_count"], rows)


def write_events_csv(path, events, meta: dict):
    rows = ((e.time, e.kind, e.atom_index) for e in events)
    _write(path, meta, ["time_s", "kind", "atom_index"], rows)


def write_tof_csv(path, tof: TofSeries, meta: dict):
    rows = zip(tof.drop_times, tof.widths_h, tof.widths_v, tof.survivors)
    _write(path, meta, ["drop_time_s", "width_h_m", "width_v_m", "survivors"], rows)


def write_pg_csv(path, summary, meta: dict):
    rows = zip(summary.times, summary.active_weight, summary.t_h, summary.t_v)
    _write(path, meta, ["t", "N_active", "T_H", "T_V"], rows)


def write_trajectories_csv(path, trajectories, born_steps, dt, meta: dict):
    """Test-mode dump: one row per live step per atom."""
    rows = []
    for idx in range(trajectories.shape[0]):
        for g in range(born_steps[idx], trajectories.shape[1]):
            row = trajectories[idx, g]
            if not np.all(np.isfinite(row)):
                break
            rows.append((idx, g * dt, *row))
    _write(path, meta, ["atom_index", "t", "x", "y", "z", "vx", "vy", "vz"], rows)


def read_table(path):
    """Parse a CSV with '#' metadata lines; returns (meta, header, columns)."""
    meta = {}
    header = None
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            parts = [p.strip() for p in line.split(",")]
            if header is None:
                header = parts
            else:
                rows.append(parts)
    if header is None:
        raise ValueError(f"{path}: no header row")
    columns = {name: [row[i] for row in rows] for i, name in enumerate(header)}
    return meta, header, columns


def _as_floats(values, path, name):
    try:
        return np.array([float(v) for v in values])
    except ValueError as exc:
        raise ValueError(f"{path}: column {name!r} is not numeric") from exc


def read_loading_series(path):
    """(times, counts) from a loading CSV; prefers the weighted column."""
    _, header, columns = read_table(path)
    if "time_s" in columns:
        times = _as_floats(columns["time_s"], path, "time_s")
        key = "weighted_count" if "weighted_count" in columns else "count"
        return times, _as_floats(columns[key], path, key)
    if len(header) >= 2:
        return (_as_floats(columns[header[0]], path, header[0]),
                _as_floats(columns[header[1]], path, header[1]))
    raise ValueError(f"{path}: expected time_s/count columns or two columns")


def read_two_columns(path):
    _, header, columns = read_table(path)
    if len(header) < 2:
        raise ValueError(f"{path}: expected at least two columns")
    return (_as_floats(columns[header[0]], path, header[0]),
            _as_floats(columns[header[1]], path, header[1]))


def read_tof_series(path) -> TofSeries:
    _, _, columns = read_table(path)
    required = ("drop_time_s", "width_h_m", "width_v_m", "survivors")
    missing = [c for c in required if c not in columns]
    if missing:
        raise ValueError(f"{path}: missing TOF columns {missing}")
    return TofSeries(
        drop_times=_as_floats(columns["drop_time_s"], path, "drop_time_s"),
        widths_h=_as_floats(columns["width_h_m"], path, "width_h_m"),
        widths_v=_as_floats(columns["width_v_m"], path, "width_v_m"),
        survivors=_as_floats(columns["survivors"], path, "survivors"),
    )
