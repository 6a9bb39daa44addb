"""
Exact algebra of finite unions of intervals.

TimeSet lives on the half-line [0, inf) and carries the satisfaction set of a
formula on one path; RegionSet is the same structure over the whole real
line and carries the state-space region B_a of an atom. Endpoints keep their
open/closed flags through every operation, and values are compared exactly
(the tolerance knob defaults to 0).
"""
import bisect
import math
import re
from dataclasses import dataclass

from errors import DomainError, EmptyInterval, ParseError, UnboundedWindow

INF = math.inf


@dataclass(frozen=True)
class Endpoint:
    value: float
    closed: bool


@dataclass(frozen=True)
class Interval:
    lo: Endpoint
    hi: Endpoint

    def __post_init__(self):
        reason = _emptiness(self.lo.value, self.lo.closed, self.hi.value, self.hi.closed)
        if reason:
            raise EmptyInterval(reason)

    @property
    def is_point(self):
        return self.lo.value == self.hi.value

    @property
    def bounded(self):
        return math.isfinite(self.lo.value) and math.isfinite(self.hi.value)

    def contains(self, x):
        lo, hi = self.lo, self.hi
        if x < lo.value or (x == lo.value and not lo.closed):
            return False
        if x > hi.value or (x == hi.value and not hi.closed):
            return False
        return True

    def __str__(self):
        if self.is_point:
            return "{" + format_number(self.lo.value) + "}"
        return (
            ("[" if self.lo.closed else "(")
            + format_number(self.lo.value)
            + ","
            + format_number(self.hi.value)
            + ("]" if self.hi.closed else ")")
        )


def _emptiness(lo, lo_closed, hi, hi_closed):
    if math.isnan(lo) or math.isnan(hi):
        return "interval endpoint is NaN"
    if (math.isinf(lo) and lo_closed) or (math.isinf(hi) and hi_closed):
        return "an infinite endpoint cannot be closed"
    if lo > hi:
        return f"lower bound {lo} exceeds upper bound {hi}"
    if lo == hi and not (lo_closed and hi_closed):
        return f"degenerate interval at {lo} must be closed on both sides"
    return None


def make_interval(lo, lo_closed, hi, hi_closed):
    """Build an interval, raising EmptyInterval when the bounds describe nothing"""
    return Interval(Endpoint(float(lo), bool(lo_closed)), Endpoint(float(hi), bool(hi_closed)))


def point(x):
    return make_interval(x, True, x, True)


def _maybe(lo, lo_closed, hi, hi_closed):
    # infinite ends are forced open; returns None instead of raising
    if math.isinf(lo):
        lo_closed = False
    if math.isinf(hi):
        hi_closed = False
    if _emptiness(lo, lo_closed, hi, hi_closed):
        return None
    return Interval(Endpoint(lo, lo_closed), Endpoint(hi, hi_closed))


def _canonical_form(raw, tolerance=0.0):
    items = sorted(raw, key=lambda iv: (iv.lo.value, not iv.lo.closed))
    out = []
    for iv in items:
        if out:
            cur = out[-1]
            gap = iv.lo.value - cur.hi.value
            touching = gap == 0 and (iv.lo.closed or cur.hi.closed)
            if gap < 0 or touching or 0 < gap <= tolerance:
                if iv.hi.value > cur.hi.value:
                    hi = iv.hi
                elif iv.hi.value == cur.hi.value:
                    hi = Endpoint(cur.hi.value, cur.hi.closed or iv.hi.closed)
                else:
                    hi = cur.hi
                if hi is not cur.hi:
                    out[-1] = Interval(cur.lo, hi)
                continue
        out.append(iv)
    return tuple(out)


class IntervalUnion:
    """Canonical finite union of intervals: sorted, disjoint, not mergeable"""

    __slots__ = ("intervals", "_los")

    def __init__(self, intervals=(), tolerance=0.0):
        self.intervals = _canonical_form(self._restrict(intervals), tolerance)
        self._los = None

    @staticmethod
    def _restrict(intervals):
        return intervals

    @classmethod
    def empty(cls):
        return cls(())

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def __eq__(self, other):
        return type(self) is type(other) and self.intervals == other.intervals

    def __hash__(self):
        return hash((type(self).__name__, self.intervals))

    def __repr__(self):
        return f"{type(self).__name__}({self})"

    def __str__(self):
        if not self.intervals:
            return "{}"
        return ", ".join(str(iv) for iv in self.intervals)

    def contains(self, x):
        if self._los is None:
            self._los = [iv.lo.value for iv in self.intervals]
        i = bisect.bisect_right(self._los, x) - 1
        # an interval starting exactly at x may be open; its predecessor cannot hold x then
        return i >= 0 and self.intervals[i].contains(x)

    def endpoints(self):
        values = []
        for iv in self.intervals:
            values.append(iv.lo.value)
            values.append(iv.hi.value)
        return values


class TimeSet(IntervalUnion):
    """Interval union contained in [0, inf); negative parts are dropped"""

    __slots__ = ()

    @staticmethod
    def _restrict(intervals):
        kept = []
        for iv in intervals:
            if iv.lo.value >= 0:
                kept.append(iv)
                continue
            cut = _maybe(0.0, True, iv.hi.value, iv.hi.closed)
            if cut is not None:
                kept.append(cut)
        return kept

    def points(self):
        return tuple(iv.lo.value for iv in self.intervals if iv.is_point)


class RegionSet(IntervalUnion):
    """Interval union over the real line, the state-space region of an atom"""

    __slots__ = ()

    @classmethod
    def reals(cls):
        return cls((Interval(Endpoint(-INF, False), Endpoint(INF, False)),))

    @property
    def is_reals(self):
        return (
            len(self.intervals) == 1
            and self.intervals[0].lo.value == -INF
            and self.intervals[0].hi.value == INF
        )


def canonicalize(raw, tolerance=0.0):
    """Canonical TimeSet holding exactly the union of the given intervals"""
    return TimeSet(tuple(raw), tolerance)


def union(a, b):
    return type(a)(a.intervals + b.intervals)


def intersect(a, b):
    xs, ys = a.intervals, b.intervals
    i = j = 0
    out = []
    while i < len(xs) and j < len(ys):
        x, y = xs[i], ys[j]
        if x.lo.value > y.lo.value:
            lo = x.lo
        elif x.lo.value < y.lo.value:
            lo = y.lo
        else:
            lo = Endpoint(x.lo.value, x.lo.closed and y.lo.closed)
        if x.hi.value < y.hi.value:
            hi = x.hi
            i += 1
        elif x.hi.value > y.hi.value:
            hi = y.hi
            j += 1
        else:
            hi = Endpoint(x.hi.value, x.hi.closed and y.hi.closed)
            i += 1
            j += 1
        piece = _maybe(lo.value, lo.closed, hi.value, hi.closed)
        if piece is not None:
            out.append(piece)
    return type(a)(out)


def _check_horizon(horizon):
    if not (horizon > 0 and math.isfinite(horizon)):
        raise DomainError(f"horizon must be positive and finite, got {horizon}")


def clip(a, horizon):
    """a ∩ [0, horizon]"""
    out = []
    for iv in a.intervals:
        if iv.lo.value > horizon:
            break
        if iv.hi.value <= horizon:
            out.append(iv)
            continue
        piece = _maybe(iv.lo.value, iv.lo.closed, horizon, True)
        if piece is not None:
            out.append(piece)
    return TimeSet(out)


def _gaps(intervals, start, stop):
    out = []
    cursor_value, cursor_closed = start
    for iv in intervals:
        gap = _maybe(cursor_value, cursor_closed, iv.lo.value, not iv.lo.closed)
        if gap is not None:
            out.append(gap)
        cursor_value, cursor_closed = iv.hi.value, not iv.hi.closed
    gap = _maybe(cursor_value, cursor_closed, stop[0], stop[1])
    if gap is not None:
        out.append(gap)
    return out


def complement(a, horizon):
    """Complement of a within [0, horizon]"""
    _check_horizon(horizon)
    clipped = clip(a, horizon)
    return TimeSet(_gaps(clipped.intervals, (0.0, True), (float(horizon), True)))


def complement_in_reals(b):
    return RegionSet(_gaps(b.intervals, (-INF, False), (INF, False)))


def diamond_preimage(a, window, horizon):
    """
    {t in [0, horizon] : (t + window) meets a}

    Each component <u,v> of a contributes <u-T, v-S> for window <S,T>; the
    left end is closed iff both u and T are closed, the right end iff both
    v and S are closed.
    """
    _check_horizon(horizon)
    s, t = window.lo, window.hi
    if math.isinf(t.value):
        raise UnboundedWindow(f"window {window} is unbounded; clip it against the horizon first")
    if s.value < 0:
        raise DomainError(f"window {window} must be non-negative")
    pieces = []
    for iv in a.intervals:
        piece = _maybe(
            iv.lo.value - t.value,
            iv.lo.closed and t.closed,
            iv.hi.value - s.value,
            iv.hi.closed and s.closed,
        )
        if piece is not None:
            pieces.append(piece)
    return clip(TimeSet(pieces), horizon)


def debut(b, t):
    """inf{s > t : s in b}; inf when no such s exists"""
    for iv in b.intervals:
        if iv.hi.value <= t:
            continue
        return max(iv.lo.value, t)
    return INF


@dataclass(frozen=True)
class Topology:
    interior: TimeSet
    closure: TimeSet
    boundary: TimeSet

    @property
    def boundary_points(self):
        return self.boundary.points()


def topology(a, horizon):
    """Interior, closure and boundary of a in the subspace topology of [0, horizon]"""
    _check_horizon(horizon)
    clipped = clip(a, horizon)
    inner, closed = [], []
    for iv in clipped.intervals:
        piece = _maybe(
            iv.lo.value,
            iv.lo.closed and iv.lo.value == 0.0,
            iv.hi.value,
            iv.hi.closed and iv.hi.value == horizon,
        )
        if piece is not None:
            inner.append(piece)
        closed.append(Interval(Endpoint(iv.lo.value, True), Endpoint(iv.hi.value, True)))
    interior = TimeSet(inner)
    closure = TimeSet(closed)
    boundary = intersect(closure, complement(interior, horizon))
    return Topology(interior, closure, boundary)


def shift_minus(a, c):
    """{t - c : t in a} ∩ [0, inf)"""
    if c < 0:
        raise DomainError(f"shift must be non-negative, got {c}")
    return TimeSet(
        Interval(Endpoint(iv.lo.value - c, iv.lo.closed), Endpoint(iv.hi.value - c, iv.hi.closed))
        for iv in a.intervals
    )


def contains(a, t):
    return a.contains(t)


# ==================== NOTATION ====================

_NUM = r"[-+]?(?:inf|(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?)"
_INTERVAL_RE = re.compile(rf"\s*([\[(])\s*({_NUM})\s*,\s*({_NUM})\s*([\])])\s*")
_POINT_RE = re.compile(rf"\s*\{{\s*({_NUM})\s*\}}\s*")
_SEPARATOR_RE = re.compile(r"\s*(?:,|∪)\s*")
_EMPTY_WORDS = {"", "{}", "∅", "empty"}


def format_number(x):
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _byte_offset(text, pos):
    return len(text[:pos].encode("utf-8"))


def _match_one(text, pos):
    m = _INTERVAL_RE.match(text, pos)
    if m:
        lo_b, lo, hi, hi_b = m.groups()
        try:
            iv = make_interval(float(lo), lo_b == "[", float(hi), hi_b == "]")
        except EmptyInterval as e:
            raise ParseError(f"empty interval '{m.group(0).strip()}': {e}", _byte_offset(text, pos)) from e
        return iv, m.end()
    m = _POINT_RE.match(text, pos)
    if m:
        return point(float(m.group(1))), m.end()
    raise ParseError("malformed interval", _byte_offset(text, pos), ("[", "(", "{"))


def parse_interval(text):
    iv, end = _match_one(text, 0)
    if end != len(text):
        raise ParseError("trailing text after interval", _byte_offset(text, end))
    return iv


def parse_set(text, kind=TimeSet):
    """Parse "[a,b], (c,d], {x}" into a canonical TimeSet (or RegionSet)"""
    if text.strip() in _EMPTY_WORDS:
        return kind.empty()
    pieces, pos = [], 0
    while True:
        iv, pos = _match_one(text, pos)
        pieces.append(iv)
        if pos == len(text):
            break
        sep = _SEPARATOR_RE.match(text, pos)
        if not sep:
            raise ParseError("expected separator between intervals", _byte_offset(text, pos), (",",))
        pos = sep.end()
    return kind(pieces)


def parse_region(text):
    return parse_set(text, RegionSet)
