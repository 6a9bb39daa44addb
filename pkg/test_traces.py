import io

import numpy as np
import pytest

from errors import DomainError, FormatError
from timeset import RegionSet, TimeSet, complement_in_reals, intersect, make_interval, parse_region, parse_set, union
from traces import (
    GridTrace,
    PLTrace,
    atom_timeset,
    first_passage,
    grid_project,
    lambda_n,
    load_trace,
    read_grid_trace,
    read_pl_trace,
    write_trace,
)

RAMP = PLTrace([0, 10], [0, 10])


# ==================== MODELS ====================

def test_pl_trace_validation():
    with pytest.raises(DomainError):
        PLTrace([1, 2], [0, 0])
    with pytest.raises(DomainError):
        PLTrace([0, 2, 2], [0, 0, 0])
    with pytest.raises(DomainError):
        PLTrace([0, 1], [0, float("nan")])


def test_pl_trace_interpolation():
    trace = PLTrace.from_breakpoints([(0, 0), (2, 2), (4, 0)])
    assert trace.horizon == 4
    assert trace.value_at(1) == 1
    assert trace.value_at(3) == 1
    assert trace.truncate(3).breakpoints == [(0.0, 0.0), (2.0, 2.0), (3.0, 1.0)]


def test_grid_trace_basics():
    g = GridTrace(4, [0, 1, 2, 3, 4, 5, 6, 7, 8])
    assert g.horizon == 2
    assert g.coarsen(2) == GridTrace(2, [0, 2, 4, 6, 8])
    with pytest.raises(DomainError):
        g.coarsen(3)
    assert g.to_pl().value_at(0.125) == 0.5


# ==================== GRID PROJECTION ====================

def test_grid_project_examples():
    assert grid_project(PLTrace([0, 1], [0, 1]), 2).values.tolist() == [0, 0.5, 1]
    flat = grid_project(PLTrace([0, 3], [2.5, 2.5]), 7)
    assert set(flat.values.tolist()) == {2.5}
    assert len(grid_project(PLTrace([0, 3], [0, 1]), 1).values) == 4


def test_grid_project_matches_interpolation():
    rng = np.random.default_rng(31)
    for _ in range(200):
        times = np.concatenate(([0.0], np.sort(rng.uniform(0, 5, 6))))
        trace = PLTrace(np.unique(times), rng.normal(size=len(np.unique(times))))
        n = int(rng.integers(1, 20))
        g = grid_project(trace, n)
        expected = np.interp(np.arange(len(g.values)) / n, trace.times, trace.values)
        assert np.array_equal(g.values, expected)


def test_grid_round_trip_on_grid_breakpoints():
    rng = np.random.default_rng(32)
    for _ in range(200):
        n = int(rng.integers(1, 8))
        trace = PLTrace(np.arange(12) / n, rng.normal(size=12))
        assert grid_project(trace, n).to_pl() == trace


@pytest.mark.parametrize("t, n, expected", [(0.74, 4, 0.5), (2, 3, 2), (0, 5, 0), (0.3, 10, 0.3)])
def test_lambda_n(t, n, expected):
    assert lambda_n(t, n) == expected


# ==================== ATOM TIME SETS ====================

def test_atom_timeset_examples():
    assert atom_timeset(RAMP, parse_region("[2,4]")) == parse_set("[2,4]")
    assert atom_timeset(RAMP, parse_region("(2,4)")) == parse_set("(2,4)")
    tent = PLTrace([0, 2, 4], [0, 2, 0])
    assert atom_timeset(tent, parse_region("[2,inf)")) == parse_set("{2}")
    assert atom_timeset(tent, parse_region("(2,inf)")) == TimeSet.empty()


def test_atom_timeset_flat_segments():
    trace = PLTrace([0, 1, 3, 4], [0, 1, 1, 0])
    assert atom_timeset(trace, parse_region("[1,inf)")) == parse_set("[1,3]")
    assert atom_timeset(trace, parse_region("(1,inf)")) == TimeSet.empty()
    assert atom_timeset(trace, parse_region("(-inf,1)")) == parse_set("[0,1), (3,4]")


def test_atom_timeset_single_point():
    trace = PLTrace([0], [1.0])
    assert atom_timeset(trace, parse_region("[1,2]")) == parse_set("{0}")
    assert atom_timeset(trace, parse_region("(1,2]")) == TimeSet.empty()


def test_first_passage():
    assert first_passage(RAMP, parse_region("[3,inf)")) == 3
    assert first_passage(RAMP, parse_region("(-inf,0]")) == 0
    assert first_passage(RAMP, parse_region("[11,inf)")) == float("inf")


def random_region(rng):
    parts = []
    for _ in range(rng.integers(0, 3)):
        lo = float(rng.integers(-4, 4)) / 2
        hi = lo + float(rng.integers(0, 4)) / 2
        if lo == hi:
            parts.append(make_interval(lo, True, lo, True))
        else:
            parts.append(make_interval(lo, rng.random() < 0.5, hi, rng.random() < 0.5))
    if rng.random() < 0.2:
        parts.append(make_interval(float(rng.integers(-2, 2)), rng.random() < 0.5, float("inf"), False))
    return RegionSet(parts)


def random_trace(rng, horizon=5.0):
    times = np.unique(np.concatenate(([0.0, horizon], rng.integers(1, 10, 4) * horizon / 10)))
    values = rng.integers(-4, 5, len(times)) / 2
    return PLTrace(times, values)


def test_atom_timeset_boolean_homomorphism():
    rng = np.random.default_rng(33)
    for _ in range(10_000):
        trace = random_trace(rng)
        b1, b2 = random_region(rng), random_region(rng)
        s1, s2 = atom_timeset(trace, b1), atom_timeset(trace, b2)
        assert atom_timeset(trace, union(b1, b2)) == union(s1, s2)
        assert atom_timeset(trace, intersect(b1, b2)) == intersect(s1, s2)


def test_atom_timeset_membership():
    rng = np.random.default_rng(34)
    for _ in range(1_000):
        trace = random_trace(rng)
        region = random_region(rng)
        found = atom_timeset(trace, region)
        outside = atom_timeset(trace, complement_in_reals(region))
        probes = np.concatenate((trace.times, rng.uniform(0, trace.horizon, 50)))
        for t in probes:
            x = trace.value_at(t)
            assert found.contains(t) == region.contains(x), (trace.breakpoints, region, t)
            assert outside.contains(t) != found.contains(t)


# ==================== CSV ====================

def test_read_pl_trace():
    trace = read_pl_trace(io.StringIO("t,x\n0,0\n1,1\n"))
    assert trace == PLTrace([0, 1], [0, 1])


def test_pl_round_trip(tmp_path):
    rng = np.random.default_rng(35)
    trace = PLTrace(np.concatenate(([0.0], np.sort(rng.uniform(0, 3, 20)))), rng.normal(size=21))
    path = tmp_path / "trace.csv"
    write_trace(trace, path)
    assert load_trace(path) == trace


def test_grid_round_trip(tmp_path):
    grid = GridTrace(8, np.random.default_rng(36).normal(size=17))
    buffer = io.StringIO()
    write_trace(grid, buffer)
    assert buffer.getvalue().startswith("n=8\nk,x\n")
    assert read_grid_trace(io.StringIO(buffer.getvalue())) == grid
    path = tmp_path / "grid.csv"
    write_trace(grid, path)
    assert load_trace(path) == grid


@pytest.mark.parametrize(
    "text, line",
    [
        ("t,x\n0,0\n2,1\n1,2\n", 4),
        ("t,x\n0,0\n1,abc\n", 3),
        ("t,y\n0,0\n", 1),
        ("t,x\n0.5,0\n", 2),
    ],
)
def test_pl_format_errors(text, line):
    with pytest.raises(FormatError) as info:
        read_pl_trace(io.StringIO(text))
    assert info.value.line == line


@pytest.mark.parametrize(
    "text, line",
    [("x=4\nk,x\n0,1\n", 1), ("n=4\nk,x\n0,1\n2,1\n", 4), ("n=two\nk,x\n0,1\n", 1)],
)
def test_grid_format_errors(text, line):
    with pytest.raises(FormatError) as info:
        read_grid_trace(io.StringIO(text))
    assert info.value.line == line
