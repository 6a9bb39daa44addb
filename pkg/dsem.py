"""
Discretized semantics: formulas evaluated on the grid N/n.

Window membership s in I ∩ N/n is decided on exact rationals (grid offsets
j with j/n in I). eval_holds follows the recursive definition literally;
eval_all computes every grid point at once with prefix sums and returns a
masked array whose masked tail marks positions whose windows run past the
end of the trace.
"""
import logging
import math
from functools import lru_cache

import numpy as np

from errors import HorizonExceeded, OffGrid, UnboundedWindow
from formula import And, Atom, Bot, Box, Diamond, Not, Or, Top, Until, to_text
from traces import scaled

logger = logging.getLogger(__name__)


def window_offsets(window, n):
    """(j_min, j_max) with j/n in window exactly when j_min <= j <= j_max"""
    lo, hi = window.lo, window.hi
    if math.isinf(hi.value):
        raise UnboundedWindow(f"window {window} is unbounded")
    s = scaled(lo.value, n)
    t = scaled(hi.value, n)
    j_min = math.ceil(s) if lo.closed else math.floor(s) + 1
    j_max = math.floor(t) if hi.closed else math.ceil(t) - 1
    return j_min, j_max


def reach_steps(phi, n):
    """Grid steps beyond k that evaluating phi at k reads"""
    if isinstance(phi, (Atom, Top, Bot)):
        return 0
    if isinstance(phi, Not):
        return reach_steps(phi.arg, n)
    if isinstance(phi, (And, Or)):
        return max(reach_steps(phi.left, n), reach_steps(phi.right, n))
    _, j_max = window_offsets(phi.window, n)
    if isinstance(phi, Until):
        inner = max(reach_steps(phi.left, n), reach_steps(phi.right, n))
    else:
        inner = reach_steps(phi.arg, n)
    return max(j_max, 0) + inner


def region_mask(values, region):
    """Elementwise x in region"""
    values = np.asarray(values, dtype=float)
    inside = np.zeros(values.shape, dtype=bool)
    for iv in region.intervals:
        lo, hi = iv.lo, iv.hi
        above = (values > lo.value) | ((values == lo.value) & lo.closed)
        below = (values < hi.value) | ((values == hi.value) & hi.closed)
        inside |= above & below
    return inside


def grid_index(t, n):
    """k with k/n == t, or OffGrid"""
    r = scaled(t, n)
    if r < 0 or r.denominator != 1:
        raise OffGrid(f"t={t} is not a point of the grid N/{n}")
    return int(r)


# ==================== WHOLE-GRID EVALUATION ====================

def _prefix(arr):
    return np.concatenate(([0], np.cumsum(arr, dtype=np.int64)))


def _all(phi, g, atoms, steps):
    """Truth values on the defined prefix k = 0 .. K - reach(phi)"""
    n = g.n
    if isinstance(phi, Atom):
        return region_mask(g.values, atoms.region(phi.name))
    if isinstance(phi, Top):
        return np.ones(steps + 1, dtype=bool)
    if isinstance(phi, Bot):
        return np.zeros(steps + 1, dtype=bool)
    if isinstance(phi, Not):
        return ~_all(phi.arg, g, atoms, steps)
    if isinstance(phi, (And, Or)):
        left = _all(phi.left, g, atoms, steps)
        right = _all(phi.right, g, atoms, steps)
        size = min(len(left), len(right))
        if isinstance(phi, And):
            return left[:size] & right[:size]
        return left[:size] | right[:size]

    j_min, j_max = window_offsets(phi.window, n)
    span = max(j_max, 0)
    if isinstance(phi, (Diamond, Box)):
        inner = _all(phi.arg, g, atoms, steps)
        size = max(len(inner) - span, 0)
        if j_min > j_max:
            return np.full(size, isinstance(phi, Box), dtype=bool)
        k = np.arange(size)
        sums = _prefix(inner)
        counts = sums[k + j_max + 1] - sums[k + j_min]
        if isinstance(phi, Diamond):
            return counts > 0
        return counts == j_max - j_min + 1

    if isinstance(phi, Until):
        left = _all(phi.left, g, atoms, steps)
        right = _all(phi.right, g, atoms, steps)
        size = max(min(len(left), len(right)) - span, 0)
        if j_min > j_max or size == 0:
            return np.zeros(size, dtype=bool)
        # first index >= k where the left operand fails
        fails = np.where(left, len(left), np.arange(len(left)))
        next_fail = np.minimum.accumulate(fails[::-1])[::-1]
        k = np.arange(size)
        last = np.minimum(k + j_max, next_fail[:size])
        first = k + j_min
        sums = _prefix(right)
        ok = last >= first
        hits = np.zeros(size, dtype=bool)
        hits[ok] = sums[last[ok] + 1] - sums[first[ok]] > 0
        return hits
    raise TypeError(f"not a formula: {phi!r}")


def eval_all(phi, g, atoms):
    """
    Truth of phi at every grid point k/n as a masked boolean array; the
    masked tail holds the points whose windows exceed the trace.
    """
    steps = g.steps
    defined = _all(phi, g, atoms, steps)
    size = max(min(len(defined), steps + 1 - reach_steps(phi, g.n)), 0)
    data = np.zeros(steps + 1, dtype=bool)
    data[:size] = defined[:size]
    mask = np.arange(steps + 1) >= size
    return np.ma.masked_array(data, mask=mask)


# ==================== POINTWISE EVALUATION ====================

def eval_holds(phi, g, atoms, t):
    """g, t |=_n phi, by direct recursion over the grid"""
    n = g.n
    k0 = grid_index(t, n)
    needed = k0 + reach_steps(phi, n)
    if needed > g.steps:
        raise HorizonExceeded(needed / n, g.horizon)
    values = g.values

    @lru_cache(maxsize=None)
    def holds(node, k):
        if isinstance(node, Atom):
            return atoms.region(node.name).contains(values[k])
        if isinstance(node, Top):
            return True
        if isinstance(node, Bot):
            return False
        if isinstance(node, Not):
            return not holds(node.arg, k)
        if isinstance(node, And):
            return holds(node.left, k) and holds(node.right, k)
        if isinstance(node, Or):
            return holds(node.left, k) or holds(node.right, k)
        j_min, j_max = window_offsets(node.window, n)
        offsets = range(j_min, j_max + 1)
        if isinstance(node, Diamond):
            return any(holds(node.arg, k + j) for j in offsets)
        if isinstance(node, Box):
            return all(holds(node.arg, k + j) for j in offsets)
        if isinstance(node, Until):
            return any(
                holds(node.right, k + j) and all(holds(node.left, k + i) for i in range(j))
                for j in offsets
            )
        raise TypeError(f"not a formula: {to_text(node)}")

    return holds(phi, k0)
