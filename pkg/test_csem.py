import math
from functools import lru_cache

import numpy as np
import pytest

from csem import ContinuousEvaluator, eval_timeset, holds_at, reach, until_holds_at, until_timeset
from errors import HorizonExceeded, UnboundedWindow
from formula import (
    And,
    Atom,
    AtomMap,
    Bot,
    Box,
    Diamond,
    Not,
    Or,
    Top,
    Until,
    counterexample_formulas,
    parse,
    temporal_depth,
    to_core,
)
from timeset import RegionSet, TimeSet, intersect, make_interval, parse_set, point
from traces import PLTrace

P_ATOMS = AtomMap({"p": "[1,inf)"})
FORMULAS = counterexample_formulas()


def crossing_trace(tau, tail=15.0):
    """Flat at 0, crossing 1 at tau, then staying above 1"""
    return PLTrace([0, tau - 0.5, tau, tau + 0.5, tail], [0, 0, 1, 1.5, 1.5])


# ==================== EXAMPLES ====================

def test_isolated_point_of_phi_1():
    trace = PLTrace.from_breakpoints([(0, 0), (8.5, 0), (9, 1), (9.5, 1.5), (12, 1.5)])
    assert eval_timeset(FORMULAS["phi_1"], trace, P_ATOMS, 6) == TimeSet((point(4.0),))


def test_isolated_point_on_random_ramps():
    rng = np.random.default_rng(41)
    for _ in range(100):
        tau = 6 + int(rng.integers(0, 257)) / 64
        knee = int(rng.integers(1, int(tau * 8))) / 8
        below = rng.integers(-8, 8, size=2) / 16
        rise = int(rng.integers(1, 9)) / 8
        times = [0.0, knee, tau, tau + 0.25, 13.0]
        values = [below[0], below[1], 1.0, 1.0 + rise, 1.0 + rise + int(rng.integers(0, 4)) / 4]
        trace = PLTrace(times, values)
        found = eval_timeset(FORMULAS["phi_1"], trace, P_ATOMS, 6)
        assert found == TimeSet((point(tau - 5),)), (tau, trace.breakpoints)


def test_atom_and_diamond_on_ramp():
    ramp = PLTrace([0, 12], [0, 12])
    atoms = AtomMap({"p": "[2,4]", "q": "[3,5]"})
    assert eval_timeset(Atom("p"), ramp, atoms, 10) == parse_set("[2,4]")
    assert eval_timeset(parse("F[1,2] q"), ramp, atoms, 10) == parse_set("[1,4]")


@pytest.mark.parametrize("tau, expected", [(8.5, True), (8.25, True), (9.5, False), (7.5, False)])
def test_psi_tracks_first_passage_window(tau, expected):
    assert holds_at(FORMULAS["psi"], crossing_trace(tau), P_ATOMS, 0) is expected


def test_top_and_bot():
    trace = crossing_trace(8.5)
    assert holds_at(Top(), trace, P_ATOMS, 3)
    assert not holds_at(Bot(), trace, P_ATOMS, 3)
    assert eval_timeset(Not(Top()), trace, P_ATOMS, 4) == TimeSet.empty()


def test_horizon_zero():
    trace = PLTrace([0, 1], [0, 2])
    assert holds_at(Not(Atom("p")), trace, P_ATOMS, 0)
    assert not holds_at(Atom("p"), trace, P_ATOMS, 0)
    assert holds_at(parse("F(0,1] p"), trace, P_ATOMS, 0)


def test_horizon_is_checked():
    ramp = PLTrace([0, 10], [0, 10])
    with pytest.raises(HorizonExceeded) as info:
        eval_timeset(parse("F(1,2) p"), ramp, P_ATOMS, 9)
    assert info.value.required == 11
    with pytest.raises(UnboundedWindow):
        eval_timeset(parse("p U[0,inf) p"), ramp, P_ATOMS, 1)


def test_evaluator_reuses_longer_horizons():
    evaluator = ContinuousEvaluator(PLTrace([0, 10], [0, 10]), AtomMap({"p": "[3,inf)"}))
    wide = evaluator.timeset(parse("F(1,2) p"), 8)
    narrow = evaluator.timeset(parse("F(1,2) p"), 3)
    assert wide == parse_set("(1,8]")
    assert narrow == parse_set("(1,3]")


def test_tolerance_merges_float_gaps():
    ramp = PLTrace([0, 10], [0, 10])
    atoms = AtomMap({"p": "[0,1]", "q": "[1.000000000001,2]"})
    phi = parse("p | q")
    assert len(ContinuousEvaluator(ramp, atoms, tolerance=0.0).timeset(phi, 10)) == 2
    assert ContinuousEvaluator(ramp, atoms, tolerance=1e-9).timeset(phi, 10) == parse_set("[0,2]")


# ==================== UNTIL ====================

def test_until_witness_examples():
    a1, a2 = parse_set("[0,10]"), parse_set("[5,6]")
    iv = make_interval(1, True, 2, True)
    assert until_holds_at(a1, a2, iv, 3.5)
    assert not until_holds_at(a1, a2, iv, 2)
    assert until_timeset(a1, a2, iv, 8) == parse_set("[3,5]")


def test_until_with_zero_in_window():
    a2 = parse_set("{3}")
    iv = make_interval(0, True, 1, True)
    assert until_holds_at(TimeSet.empty(), a2, iv, 3)
    assert until_timeset(TimeSet.empty(), a2, iv, 8) == parse_set("{3}")
    assert until_timeset(parse_set("[1,3)"), a2, iv, 8) == parse_set("[2,3]")


def test_reach():
    a1 = parse_set("[0,2), {3}, (4,6]")
    assert reach(a1, 1) == 2
    assert reach(a1, 3) == 3
    assert reach(a1, 2) == 2
    assert reach(a1, 5) == 6


# ==================== RANDOM ORACLE ====================

HORIZON = 10.0


def random_window(rng):
    lo = int(rng.integers(0, 4)) / 2
    hi = lo + int(rng.integers(0, 4)) / 2
    if lo == hi:
        return point(lo)
    return make_interval(lo, rng.random() < 0.5, hi, rng.random() < 0.5)


def random_formula(rng, depth=3):
    if depth == 0 or rng.random() < 0.25:
        return Atom(("p", "q")[rng.integers(0, 2)]) if rng.random() < 0.9 else Top()
    kind = rng.integers(0, 6)
    if kind == 0:
        return Not(random_formula(rng, depth - 1))
    if kind == 1:
        return And(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if kind == 2:
        return Or(random_formula(rng, depth - 1), random_formula(rng, depth - 1))
    if kind == 3:
        return Diamond(random_window(rng), random_formula(rng, depth - 1))
    if kind == 4:
        return Box(random_window(rng), random_formula(rng, depth - 1))
    return Until(random_window(rng), random_formula(rng, depth - 1), random_formula(rng, depth - 1))


def random_trace(rng):
    # slopes of +-1 and levels on quarters keep every crossing exact
    steps = rng.choice([-0.5, 0.0, 0.5], size=int(2 * HORIZON))
    values = int(rng.integers(-2, 3)) / 2 + np.concatenate(([0.0], np.cumsum(steps)))
    return PLTrace(np.arange(len(values)) / 2, values)


def random_atoms(rng):
    def region():
        lo = int(rng.integers(-8, 8)) / 4
        if rng.random() < 0.2:
            return RegionSet([make_interval(lo, True, math.inf, False)])
        hi = lo + int(rng.integers(1, 8)) / 4
        return RegionSet([make_interval(lo, rng.random() < 0.5, hi, rng.random() < 0.5)])

    return AtomMap({"p": region(), "q": region()})


def witnesses(window, t, *sets):
    """Offsets s in the window where the truth of any set can change, plus midpoints"""
    lo, hi = window.lo.value, window.hi.value
    critical = {lo, hi}
    for s in sets:
        critical.update(e - t for e in s.endpoints() if math.isfinite(e) and lo <= e - t <= hi)
    critical = sorted(critical)
    return critical + [(x + y) / 2 for x, y in zip(critical, critical[1:])]


def held_throughout(a1, t, s):
    if s == 0:
        return True
    span = TimeSet((make_interval(t, True, t + s, False),))
    return intersect(span, a1) == span


def brute_holds(phi, evaluator, h, t):
    """Truth at t from the operator definition, given the children's time sets"""
    if isinstance(phi, (Atom, Top, Bot)):
        return None
    if isinstance(phi, Not):
        return not evaluator.timeset(phi.arg, h).contains(t)
    if isinstance(phi, And):
        return evaluator.timeset(phi.left, h).contains(t) and evaluator.timeset(phi.right, h).contains(t)
    if isinstance(phi, Or):
        return evaluator.timeset(phi.left, h).contains(t) or evaluator.timeset(phi.right, h).contains(t)
    inner_h = h + phi.window.hi.value
    if isinstance(phi, (Diamond, Box)):
        a = evaluator.timeset(phi.arg, inner_h)
        offsets = [s for s in witnesses(phi.window, t, a) if phi.window.contains(s)]
        if isinstance(phi, Diamond):
            return any(a.contains(t + s) for s in offsets)
        return all(a.contains(t + s) for s in offsets)
    a1 = evaluator.timeset(phi.left, inner_h)
    a2 = evaluator.timeset(phi.right, inner_h)
    offsets = [s for s in witnesses(phi.window, t, a1, a2) if phi.window.contains(s)]
    return any(a2.contains(t + s) and held_throughout(a1, t, s) for s in offsets)


def subformulas(phi):
    yield phi
    for name in ("arg", "left", "right"):
        child = getattr(phi, name, None)
        if child is not None:
            yield from subformulas(child)


def test_operators_agree_with_definitions():
    rng = np.random.default_rng(42)
    checked = 0
    for _ in range(600):
        phi = random_formula(rng)
        trace, atoms = random_trace(rng), random_atoms(rng)
        evaluator = ContinuousEvaluator(trace, atoms)
        h = HORIZON - temporal_depth(phi)
        for node in subformulas(phi):
            found = evaluator.timeset(node, h)
            probes = {k / 4 for k in range(int(4 * h) + 1)}
            probes.update(e for e in found.endpoints() if math.isfinite(e) and e <= h)
            for t in probes:
                expected = brute_holds(node, evaluator, h, t)
                if expected is not None:
                    assert found.contains(t) == expected, (phi, node, t)
                    checked += 1
    assert checked > 5_000


def piecewise_truth(trace, atoms):
    """
    Truth from the operator definitions on the eighth grid, using only
    trace.value_at. Every truth change of a formula over random_trace lies on
    a quarter, so even u stands for the point u/8 and odd u for the open piece
    ((u-1)/8, (u+1)/8), on which truth is constant.
    """

    @lru_cache(maxsize=None)
    def truth(node, u):
        if isinstance(node, Atom):
            return atoms.region(node.name).contains(trace.value_at(u / 8))
        if isinstance(node, (Top, Bot)):
            return isinstance(node, Top)
        if isinstance(node, Not):
            return not truth(node.arg, u)
        if isinstance(node, And):
            return truth(node.left, u) and truth(node.right, u)
        if isinstance(node, Or):
            return truth(node.left, u) or truth(node.right, u)
        window = node.window
        lo, hi = round(8 * window.lo.value), round(8 * window.hi.value)

        def meets(v, after=None):
            # piece v meets u + window, optionally only at times strictly after `after`
            if v % 2 == 0:
                return (after is None or v > after) and window.contains((v - u) / 8)
            lower = v - 1 if after is None else max(v - 1, after)
            return lower < u + hi and u + lo < v + 1

        if isinstance(node, Diamond):
            return any(truth(node.arg, v) for v in range(u + lo, u + hi + 1) if meets(v))
        if isinstance(node, Box):
            return all(truth(node.arg, v) for v in range(u + lo, u + hi + 1) if meets(v))
        if window.contains(0) and truth(node.right, u):
            return True
        for v in range(u, u + hi + 1):
            if not meets(v, after=u):
                continue
            # an open piece is entered as soon as it is reached
            held = range(u, v + v % 2)
            if truth(node.right, v) and all(truth(node.left, x) for x in held):
                return True
        return False

    return truth


def test_timesets_match_piecewise_evaluation():
    rng = np.random.default_rng(46)
    checked = 0
    for _ in range(400):
        phi = random_formula(rng)
        trace, atoms = random_trace(rng), random_atoms(rng)
        evaluator = ContinuousEvaluator(trace, atoms)
        truth = piecewise_truth(trace, atoms)
        h = HORIZON - temporal_depth(phi)
        for node in subformulas(phi):
            found = evaluator.timeset(node, h)
            for u in range(round(8 * h) + 1):
                assert found.contains(u / 8) == truth(node, u), (phi, node, u / 8)
                checked += 1
    assert checked > 10_000


def test_holds_at_matches_timeset():
    rng = np.random.default_rng(43)
    for _ in range(300):
        phi = random_formula(rng)
        trace, atoms = random_trace(rng), random_atoms(rng)
        h = HORIZON - temporal_depth(phi)
        found = eval_timeset(phi, trace, atoms, h)
        for t in {int(rng.integers(0, int(8 * h) + 1)) / 8 for _ in range(5)}:
            assert holds_at(phi, trace, atoms, t) == found.contains(t)


def assert_until_matches_point_oracle(cases):
    rng = np.random.default_rng(44)
    for _ in range(cases):
        a1 = TimeSet([make_interval(lo, rng.random() < 0.5, lo + 1.5, rng.random() < 0.5)
                      for lo in sorted(rng.integers(0, 16, size=3) / 2)])
        a2 = TimeSet([point(float(x)) for x in rng.integers(0, 20, size=2) / 2])
        iv = random_window(rng)
        found = until_timeset(a1, a2, iv, 8.0)
        for t in (k / 4 for k in range(33)):
            assert found.contains(t) == until_holds_at(a1, a2, iv, t), (a1, a2, iv, t)


def test_until_timeset_matches_point_oracle():
    assert_until_matches_point_oracle(3_000)


@pytest.mark.slow
def test_until_timeset_matches_point_oracle_full():
    assert_until_matches_point_oracle(10_000)


def assert_desugaring_preserves_timesets(cases):
    rng = np.random.default_rng(45)
    for _ in range(cases):
        phi = random_formula(rng)
        trace, atoms = random_trace(rng), random_atoms(rng)
        h = HORIZON - temporal_depth(phi)
        assert eval_timeset(phi, trace, atoms, h) == eval_timeset(to_core(phi), trace, atoms, h), phi


def test_desugared_formulas_have_equal_timesets():
    assert_desugaring_preserves_timesets(1_000)


@pytest.mark.slow
def test_desugared_formulas_have_equal_timesets_full():
    assert_desugaring_preserves_timesets(10_000)
