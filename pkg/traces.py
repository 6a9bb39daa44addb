"""
Path models: continuous piecewise-linear traces and grid-sampled traces,
the exact atom time-set extraction over PL traces, the grid projection
Lambda_n and CSV persistence for both models.
"""
import io
import logging
import math
from fractions import Fraction
from pathlib import Path

import numpy as np
import pandas as pd

from errors import DomainError, FormatError
from timeset import TimeSet, debut, make_interval, point

logger = logging.getLogger(__name__)


class PLTrace:
    """Continuous path given by breakpoints (t_i, x_i), linear in between"""

    __slots__ = ("times", "values")

    def __init__(self, times, values):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.shape != values.shape or times.size == 0:
            raise DomainError("a PL trace needs matching, non-empty time and value sequences")
        if not (np.all(np.isfinite(times)) and np.all(np.isfinite(values))):
            raise DomainError("PL trace breakpoints must be finite")
        if times[0] != 0.0:
            raise DomainError(f"PL trace must start at t=0, got t={times[0]}")
        if np.any(np.diff(times) <= 0):
            raise DomainError("PL trace times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        self.times = times
        self.values = values

    @classmethod
    def from_breakpoints(cls, breakpoints):
        pairs = list(breakpoints)
        return cls([t for t, _ in pairs], [x for _, x in pairs])

    @property
    def horizon(self):
        return float(self.times[-1])

    @property
    def breakpoints(self):
        return list(zip(self.times.tolist(), self.values.tolist()))

    def value_at(self, t):
        if t < 0 or t > self.horizon:
            raise DomainError(f"t={t} lies outside the trace [0, {self.horizon}]")
        return float(np.interp(t, self.times, self.values))

    def truncate(self, horizon):
        """The trace restricted to [0, horizon] (a breakpoint is added at horizon)"""
        if horizon >= self.horizon:
            return self
        if horizon <= 0:
            return PLTrace([0.0], [self.values[0]])
        keep = self.times < horizon
        return PLTrace(
            np.append(self.times[keep], horizon),
            np.append(self.values[keep], np.interp(horizon, self.times, self.values)),
        )

    def __eq__(self, other):
        return (
            isinstance(other, PLTrace)
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.values, other.values)
        )

    def __hash__(self):
        return hash((self.times.tobytes(), self.values.tobytes()))

    def __repr__(self):
        return f"PLTrace({len(self.times)} breakpoints, horizon={self.horizon})"


class GridTrace:
    """Path sampled at k/n for k = 0..K"""

    __slots__ = ("n", "values")

    def __init__(self, n, values):
        if int(n) != n or n < 1:
            raise DomainError(f"grid resolution must be a positive integer, got {n}")
        values = np.asarray(values, dtype=float)
        if values.ndim != 1 or values.size == 0:
            raise DomainError("a grid trace needs at least one value")
        values.setflags(write=False)
        self.n = int(n)
        self.values = values

    @property
    def steps(self):
        return len(self.values) - 1

    @property
    def horizon(self):
        return self.steps / self.n

    @property
    def times(self):
        return np.arange(len(self.values)) / self.n

    def to_pl(self):
        return PLTrace(self.times, self.values)

    def coarsen(self, factor):
        """Subsample onto N/(n/factor), the coarser grid nested in this one"""
        if factor < 1 or self.n % factor:
            raise DomainError(f"factor {factor} does not divide the resolution {self.n}")
        return GridTrace(self.n // factor, self.values[::factor])

    def __eq__(self, other):
        return isinstance(other, GridTrace) and self.n == other.n and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.n, self.values.tobytes()))

    def __repr__(self):
        return f"GridTrace(n={self.n}, K={self.steps}, horizon={self.horizon})"


# ==================== GRID PROJECTION ====================

def scaled(x, n):
    """
    x * n as an exact rational. Float noise below 1e-9 (relative) that keeps
    it off an integer is dropped, so 0.3 * 10 is 3 and 11/3 * 3 is 11.
    """
    r = Fraction(x) * n
    k = round(r)
    if abs(r - k) <= Fraction(1, 10**9) * max(1, abs(k)):
        return Fraction(k)
    return r


def lambda_index(t, n):
    """floor(n t)"""
    if t < 0:
        raise DomainError(f"time must be non-negative, got {t}")
    return math.floor(scaled(t, n))


def lambda_n(t, n):
    return lambda_index(t, n) / n


def grid_project(trace, n):
    if n < 1:
        raise DomainError(f"grid resolution must be at least 1, got {n}")
    k_max = lambda_index(trace.horizon, n)
    grid = np.arange(k_max + 1) / n
    return GridTrace(n, np.interp(grid, trace.times, trace.values))


# ==================== ATOM TIME SETS ====================

def _crossing(t0, t1, x0, x1, level):
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = t0 + (level - x0) / (x1 - x0) * (t1 - t0)
    t = np.where(x1 == level, t1, np.where(x0 == level, t0, t))
    return np.clip(t, t0, t1)


def _interval_pieces(t0, t1, x0, x1, c, c_closed, d, d_closed):
    """Per segment, the sub-interval of [t0, t1] where the path lies in <c, d>"""
    dx = x1 - x0
    up, down = dx > 0, dx < 0
    cross_c = _crossing(t0, t1, x0, x1, c)
    cross_d = _crossing(t0, t1, x0, x1, d)

    start = t0.copy()
    start_closed = np.ones_like(up)
    end = t1.copy()
    end_closed = np.ones_like(up)

    # increasing segments enter through c and leave through d
    start = np.where(up & (x0 < c), cross_c, start)
    start_closed = np.where(up & (x0 <= c), c_closed, start_closed)
    end = np.where(up & (x1 > d), cross_d, end)
    end_closed = np.where(up & (x1 >= d), d_closed, end_closed)

    # decreasing segments enter through d and leave through c
    start = np.where(down & (x0 > d), cross_d, start)
    start_closed = np.where(down & (x0 >= d), d_closed, start_closed)
    end = np.where(down & (x1 < c), cross_c, end)
    end_closed = np.where(down & (x1 <= c), c_closed, end_closed)

    above_c = (x0 > c) | ((x0 == c) & c_closed)
    below_d = (x0 < d) | ((x0 == d) & d_closed)
    reach = np.where(
        up,
        (x1 >= c) & (x0 <= d),
        np.where(down, (x0 >= c) & (x1 <= d), above_c & below_d),
    )
    nonempty = (start < end) | ((start == end) & start_closed & end_closed)
    return start, start_closed, end, end_closed, reach & nonempty


def atom_timeset(trace, region):
    """{t in [0, horizon] : x(t) in region}, exact on every linear segment"""
    times, values = trace.times, trace.values
    if len(times) == 1:
        return TimeSet((point(0.0),)) if region.contains(values[0]) else TimeSet.empty()

    t0, t1 = times[:-1], times[1:]
    x0, x1 = values[:-1], values[1:]
    pieces = []
    for iv in region.intervals:
        start, start_closed, end, end_closed, valid = _interval_pieces(
            t0, t1, x0, x1, iv.lo.value, iv.lo.closed, iv.hi.value, iv.hi.closed
        )
        # consecutive segment pieces sharing a breakpoint form one run
        joins = (
            valid[:-1]
            & valid[1:]
            & (end[:-1] == t1[:-1])
            & (start[1:] == t0[1:])
            & (end_closed[:-1] | start_closed[1:])
        )
        joins_prev = np.concatenate(([False], joins))
        joins_next = np.concatenate((joins, [False]))
        run_starts = np.flatnonzero(valid & ~joins_prev)
        run_ends = np.flatnonzero(valid & ~joins_next)
        for s, e in zip(run_starts, run_ends):
            pieces.append(make_interval(start[s], start_closed[s], end[e], end_closed[e]))
    return TimeSet(pieces)


def first_passage(trace, region):
    """Debut of the region's time set, counting t=0 when the path starts inside"""
    if region.contains(trace.values[0]):
        return 0.0
    return debut(atom_timeset(trace, region), 0.0)


# ==================== CSV I/O ====================

def _open_text(source):
    if isinstance(source, (str, Path)):
        return open(source, "r", encoding="utf-8"), True
    return source, False


def _numeric_frame(frame, columns, first_line):
    if list(frame.columns) != columns:
        raise FormatError(f"expected header '{','.join(columns)}', got '{','.join(map(str, frame.columns))}'", first_line)
    for column in columns:
        coerced = pd.to_numeric(frame[column], errors="coerce")
        bad = np.flatnonzero(coerced.isna().to_numpy())
        if bad.size:
            row = int(bad[0])
            raise FormatError(
                f"column '{column}' has a non-numeric value {frame[column].iloc[row]!r}",
                first_line + 1 + row,
            )
        frame[column] = frame[column].astype(float)
    return frame


def read_pl_trace(source):
    """Read a `t,x` CSV into a PLTrace"""
    handle, owned = _open_text(source)
    try:
        frame = pd.read_csv(handle, dtype=str, float_precision="round_trip", skipinitialspace=True)
    finally:
        if owned:
            handle.close()
    if frame.empty:
        raise FormatError("trace file holds no breakpoints", 2)
    frame = _numeric_frame(frame, ["t", "x"], 1)
    times = frame["t"].to_numpy(dtype=float)
    values = frame["x"].to_numpy(dtype=float)
    if times[0] != 0.0:
        raise FormatError(f"first time must be 0, got {times[0]}", 2)
    steps = np.flatnonzero(np.diff(times) <= 0)
    if steps.size:
        raise FormatError(f"times must be strictly increasing (t={times[steps[0] + 1]})", int(steps[0]) + 3)
    return PLTrace(times, values)


def read_grid_trace(source):
    """Read an `n=<int>` line followed by a `k,x` CSV into a GridTrace"""
    handle, owned = _open_text(source)
    try:
        header = handle.readline().strip()
        if not header.startswith("n="):
            raise FormatError(f"expected 'n=<resolution>', got '{header}'", 1)
        try:
            n = int(header[2:])
        except ValueError:
            raise FormatError(f"resolution '{header[2:]}' is not an integer", 1) from None
        if n < 1:
            raise FormatError(f"resolution must be positive, got {n}", 1)
        frame = pd.read_csv(handle, dtype=str, float_precision="round_trip", skipinitialspace=True)
    finally:
        if owned:
            handle.close()
    if frame.empty:
        raise FormatError("grid file holds no samples", 3)
    frame = _numeric_frame(frame, ["k", "x"], 2)
    ks = frame["k"].to_numpy(dtype=float)
    wrong = np.flatnonzero(ks != np.arange(len(ks)))
    if wrong.size:
        row = int(wrong[0])
        raise FormatError(f"expected k={row}, got k={frame['k'].iloc[row]}", row + 3)
    return GridTrace(n, frame["x"].to_numpy(dtype=float))


def load_trace(source):
    """Read either file format, choosing by the first line"""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as handle:
            text = handle.read()
    else:
        text = source.read()
    if text.lstrip().startswith("n="):
        return read_grid_trace(io.StringIO(text))
    return read_pl_trace(io.StringIO(text))


def write_trace(trace, target):
    if isinstance(trace, GridTrace):
        frame = pd.DataFrame({"k": np.arange(len(trace.values)), "x": trace.values})
        prefix = f"n={trace.n}\n"
    else:
        frame = pd.DataFrame({"t": trace.times, "x": trace.values})
        prefix = ""
    body = prefix + frame.to_csv(index=False, lineterminator="\n")
    if isinstance(target, (str, Path)):
        Path(target).write_text(body, encoding="utf-8")
        logger.info("✅ Wrote %r to %s", trace, target)
    else:
        target.write(body)
