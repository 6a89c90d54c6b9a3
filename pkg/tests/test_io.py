from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lbdp.errors import InvalidSeries
from lbdp.io import (
    format_number,
    read_series_csv,
    read_trajectory_csv,
    to_text,
    write_series_csv,
    write_trajectory_csv,
)
from lbdp.simulate import gillespie
from lbdp.types import ObservationSeries, RateParams


@pytest.mark.parametrize(
    "value, text",
    [(3, "3"), (3.0, "3"), (0.1, "0.1"), (None, ""), (True, "true"), (np.int64(7), "7"), (1e300, "1e+300")],
)
def test_format_number(value, text):
    assert format_number(value) == text


@given(st.lists(st.floats(0, 1e12, allow_nan=False), min_size=2, max_size=8, unique=True), st.data())
def test_series_round_trip(times, data):
    times = sorted(times)
    counts = [data.draw(st.floats(1e-3, 1e9))] + data.draw(st.lists(st.floats(0, 1e9), min_size=len(times) - 1, max_size=len(times) - 1))
    s = ObservationSeries(times, counts, "a")
    buf = io.StringIO()
    t = ObservationSeries(times, s.counts * 2.0, "b")
    write_series_csv(buf, [s, t], comments=["seed=3"])
    buf.seek(0)
    back = read_series_csv(buf)
    assert back == [s, t]
    np.testing.assert_array_equal(back[0].times, s.times)
    np.testing.assert_array_equal(back[0].counts, s.counts)


def test_comments_are_skipped(tmp_path):
    path = tmp_path / "s.csv"
    path.write_text("# seed=1\nseries_id,time,count\n# mid\nx,0,5\nx,1.5,7\n\ny,0,3\ny,2,0\n")
    out = read_series_csv(path)
    assert [s.series_id for s in out] == ["x", "y"]
    np.testing.assert_array_equal(out[0].counts, [5, 7])


def test_missing_column():
    with pytest.raises(InvalidSeries, match="count"):
        read_series_csv(io.StringIO("series_id,time\nx,0\n"))


def test_bad_number():
    with pytest.raises(InvalidSeries):
        read_series_csv(io.StringIO("series_id,time,count\nx,0,five\n"))


def test_empty_input():
    with pytest.raises(InvalidSeries):
        read_series_csv(io.StringIO("series_id,time,count\n"))


def test_trajectory_round_trip(tmp_path):
    traj = gillespie(RateParams(0.5, 0.3), 20, 3.0, 8)
    path = tmp_path / "t.csv"
    write_trajectory_csv(path, traj, ["seed=8"])
    back = read_trajectory_csv(path, "exact", traj.t_max)
    np.testing.assert_array_equal(back.event_times, traj.event_times)
    np.testing.assert_array_equal(back.sizes, traj.sizes)
    assert path.read_text().startswith("# seed=8\nevent_time,size\n")


def test_to_text():
    assert to_text(("a", "b"), [(1, 0.5), ("x", None)]) == "a,b\n1,0.5\nx,\n"
