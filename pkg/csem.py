"""
Continuous semantics over piecewise-linear traces: the exact time set of a
formula, computed bottom-up with the interval-union algebra.
"""
import bisect
import logging
import math

from config import get_settings
from errors import DomainError, HorizonExceeded, UnboundedWindow
from formula import And, Atom, Bot, Box, Diamond, Not, Or, Top, Until, temporal_depth, to_text
from timeset import (
    Endpoint,
    Interval,
    TimeSet,
    clip,
    complement,
    diamond_preimage,
    intersect,
    make_interval,
    point,
    union,
)
from traces import atom_timeset

logger = logging.getLogger(__name__)


def _complement(a, horizon):
    if horizon == 0:
        return TimeSet.empty() if a.contains(0.0) else TimeSet((point(0.0),))
    return complement(a, horizon)


def _preimage(a, window, horizon):
    if horizon == 0:
        return clip(diamond_preimage(a, window, 1.0), 0.0)
    return diamond_preimage(a, window, horizon)


def _slice(a, lo, hi):
    """a ∩ [lo, hi]"""
    his = [iv.hi.value for iv in a.intervals]
    first = bisect.bisect_left(his, lo)
    last = first
    while last < len(a.intervals) and a.intervals[last].lo.value <= hi:
        last += 1
    if first == last:
        return TimeSet.empty()
    return intersect(TimeSet(a.intervals[first:last]), TimeSet((make_interval(lo, True, hi, True),)))


def until_timeset(a1, a2, window, horizon):
    """
    {t in [0, horizon] : some s in window has t+s in a2 and [t, t+s) inside a1}

    On a non-degenerate component <a,b> of a1 every t < b reaches b, so the
    component contributes <a,b) ∩ preimage(a2 ∩ [a,b]). Times outside a1
    (and the right end b itself) only have the witness s = 0.
    """
    if math.isinf(window.hi.value):
        raise UnboundedWindow(f"until window {window} is unbounded")
    if window.lo.value < 0:
        raise DomainError(f"window {window} must be non-negative")
    pieces = []
    if window.lo.value == 0 and window.lo.closed:
        pieces.extend(clip(a2, horizon).intervals)
    for comp in a1.intervals:
        if comp.is_point or comp.lo.value > horizon:
            continue
        a, b = comp.lo.value, comp.hi.value
        targets = _slice(a2, a, b)
        if not targets:
            continue
        head = TimeSet((Interval(comp.lo, Endpoint(b, False)),))
        pieces.extend(intersect(head, _preimage(targets, window, horizon)).intervals)
    return clip(TimeSet(pieces), horizon)


def reach(a1, t):
    """D(t) = sup{u >= t : [t, u) inside a1}; t itself when t is not in a1"""
    for comp in a1.intervals:
        if comp.contains(t) and t < comp.hi.value:
            return comp.hi.value
    return t


def until_holds_at(a1, a2, window, t):
    """Point form of the until clause, evaluated directly from D(t)"""
    d = reach(a1, t)
    lo_value, lo_closed = t + window.lo.value, window.lo.closed
    hi_value, hi_closed = t + window.hi.value, window.hi.closed
    if hi_value > d:
        hi_value, hi_closed = d, True
    if lo_value > hi_value or (lo_value == hi_value and not (lo_closed and hi_closed)):
        return False
    span = TimeSet((make_interval(lo_value, lo_closed, hi_value, hi_closed),))
    return bool(intersect(span, a2))


class ContinuousEvaluator:
    """
    Evaluates formulas over one trace. Atom time sets and subformula results
    are cached; a subformula already computed on a longer horizon is clipped
    rather than recomputed.
    """

    def __init__(self, trace, atoms, tolerance=None):
        self.trace = trace
        self.atoms = atoms
        self.tolerance = get_settings().timeset_tolerance if tolerance is None else tolerance
        self._atom_sets = {}
        self._cache = {}

    def atom(self, name):
        found = self._atom_sets.get(name)
        if found is None:
            found = atom_timeset(self.trace, self.atoms.region(name))
            self._atom_sets[name] = found
        return found

    def timeset(self, phi, horizon):
        if horizon < 0:
            raise DomainError(f"horizon must be non-negative, got {horizon}")
        required = horizon + temporal_depth(phi)
        available = self.trace.horizon
        if required > available and not math.isclose(required, available, rel_tol=1e-12):
            raise HorizonExceeded(required, available)
        return self._eval(phi, float(horizon))

    def _eval(self, phi, h):
        h = min(h, self.trace.horizon)
        cached = self._cache.get(phi)
        if cached is not None and cached[0] >= h:
            return cached[1] if cached[0] == h else clip(cached[1], h)
        result = self._compute(phi, h)
        if self.tolerance:
            result = TimeSet(result.intervals, self.tolerance)
        self._cache[phi] = (h, result)
        return result

    def _compute(self, phi, h):
        if isinstance(phi, Atom):
            return clip(self.atom(phi.name), h)
        if isinstance(phi, Top):
            return TimeSet((make_interval(0.0, True, h, True),))
        if isinstance(phi, Bot):
            return TimeSet.empty()
        if isinstance(phi, Not):
            return _complement(self._eval(phi.arg, h), h)
        if isinstance(phi, And):
            left = self._eval(phi.left, h)
            if not left:
                return left
            return intersect(left, self._eval(phi.right, h))
        if isinstance(phi, Or):
            return union(self._eval(phi.left, h), self._eval(phi.right, h))
        if isinstance(phi, (Diamond, Box, Until)) and math.isinf(phi.window.hi.value):
            raise UnboundedWindow(f"window {phi.window} of {to_text(phi)} is unbounded")
        reach_h = h + phi.window.hi.value
        if isinstance(phi, Diamond):
            return _preimage(self._eval(phi.arg, reach_h), phi.window, h)
        if isinstance(phi, Box):
            inner_h = min(reach_h, self.trace.horizon)
            failing = _complement(self._eval(phi.arg, inner_h), inner_h)
            return _complement(_preimage(failing, phi.window, h), h)
        if isinstance(phi, Until):
            a1 = self._eval(phi.left, reach_h)
            a2 = self._eval(phi.right, reach_h)
            return until_timeset(a1, a2, phi.window, h)
        raise TypeError(f"not a formula: {phi!r}")


def eval_timeset(phi, trace, atoms, horizon):
    """Exact time set of phi on the trace, clipped to [0, horizon]"""
    return ContinuousEvaluator(trace, atoms).timeset(phi, horizon)


def holds_at(phi, trace, atoms, t):
    return eval_timeset(phi, trace, atoms, t).contains(t)
