"""CSV readers and writers for observation series and trajectories.

Lines starting with ``#`` are comments (the CLI records its seed there) and
are skipped by every reader. Floats are written with ``repr`` so that a
write/read round trip is exact; integral values are written as integers.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Iterable, Optional, TextIO, Union

import numpy as np

from .errors import InvalidSeries
from .types import ObservationSeries, Trajectory

PathLike = Union[str, Path]

SERIES_HEADER = ("series_id", "time", "count")
TRAJECTORY_HEADER = ("event_time", "size")


def format_number(v) -> str:
    """Shortest exact text for a number; integral floats print without a decimal point."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    f = float(v)
    if f.is_integer() and abs(f) < 2**53:
        return str(int(f))
    return repr(f)


def _data_lines(handle: TextIO) -> Iterable[str]:
    for line in handle:
        if line.strip() and not line.lstrip().startswith("#"):
            yield line


def _open_text(source) -> TextIO:
    if isinstance(source, (str, Path)):
        return open(source, newline="", encoding="utf-8")
    return source


def read_dict_rows(source, required: Iterable[str]) -> list[dict]:
    handle = _open_text(source)
    try:
        reader = csv.DictReader(_data_lines(handle))
        missing = set(required) - set(reader.fieldnames or ())
        if missing:
            raise InvalidSeries(f"missing column(s): {', '.join(sorted(missing))}")
        return list(reader)
    finally:
        if handle is not source:
            handle.close()


def read_series_csv(source) -> list[ObservationSeries]:
    """Read ``series_id,time,count`` rows; groups keep first-appearance order."""
    rows = read_dict_rows(source, SERIES_HEADER)
    groups: dict[str, tuple[list, list]] = {}
    for row in rows:
        times, counts = groups.setdefault(row["series_id"], ([], []))
        try:
            times.append(float(row["time"]))
            counts.append(float(row["count"]))
        except (TypeError, ValueError) as exc:
            raise InvalidSeries(f"bad number in row {row}") from exc
    if not groups:
        raise InvalidSeries("no observations in input")
    return [ObservationSeries(t, c, sid) for sid, (t, c) in groups.items()]


def _write_rows(target, header, rows, comments: Optional[Iterable[str]] = None) -> None:
    handle = open(target, "w", newline="", encoding="utf-8") if isinstance(target, (str, Path)) else target
    try:
        for line in comments or ():
            handle.write(f"# {line}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_number(v) if not isinstance(v, str) else v for v in row])
    finally:
        if handle is not target:
            handle.close()


def write_series_csv(target, series: Iterable[ObservationSeries], comments=None) -> None:
    rows = (
        (s.series_id, t, c)
        for s in series
        for t, c in zip(s.times, s.counts)
    )
    _write_rows(target, SERIES_HEADER, rows, comments)


def write_trajectory_csv(target, traj: Trajectory, comments=None) -> None:
    _write_rows(target, TRAJECTORY_HEADER, zip(traj.event_times, traj.sizes), comments)


def read_trajectory_csv(source, method: str = "exact", t_max: Optional[float] = None) -> Trajectory:
    rows = read_dict_rows(source, TRAJECTORY_HEADER)
    times = np.array([float(r["event_time"]) for r in rows])
    sizes = np.array([int(float(r["size"])) for r in rows], dtype=np.int64)
    if times.size == 0:
        raise InvalidSeries("empty trajectory")
    return Trajectory(times, sizes, method, times[-1] if t_max is None else t_max)


def write_table(target, header, rows, comments=None) -> None:
    _write_rows(target, header, rows, comments)


def to_text(header, rows, comments=None) -> str:
    buf = io.StringIO()
    _write_rows(buf, header, rows, comments)
    return buf.getvalue()
