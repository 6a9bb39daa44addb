"""
MTL formulas: abstract syntax, concrete-syntax parser and printer,
desugaring to the core connectives, the flat fragment check, and the atom
map B_a with its propositional-region algebra.

Concrete syntax (precedence ! > & > |, temporal operators bind tightly):

    formula := disj
    disj    := conj ("|" conj)*
    conj    := unary ("&" unary)*
    unary   := "!" unary | "F" ival unary | "G" ival unary
             | primary ("U" ival unary)?
    primary := NAME | "true" | "false" | "(" formula ")"
    ival    := ("[" | "(") num "," (num | "inf") ("]" | ")")
"""
import io
import logging
import re
from collections.abc import Mapping
from dataclasses import dataclass
from typing import Optional, Tuple, Union

from dotenv import dotenv_values
from lark import Lark, Transformer, v_args
from lark.exceptions import UnexpectedInput, VisitError

from errors import EmptyInterval, FormatError, MTLError, NotPropositional, ParseError, UnboundedWindow, UnknownAtom
from timeset import (
    Endpoint,
    Interval,
    RegionSet,
    complement_in_reals,
    format_number,
    intersect,
    make_interval,
    parse_region,
    union,
)

logger = logging.getLogger(__name__)

# Designated always-true atom used by to_core; its region is the whole line.
TOP_ATOM = "__top__"
RESERVED = {"F", "G", "U", "true", "false", "inf"}


# ==================== ABSTRACT SYNTAX ====================

@dataclass(frozen=True)
class Atom:
    name: str


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class Bot:
    pass


@dataclass(frozen=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Until:
    window: Interval
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Diamond:
    window: Interval
    arg: "Formula"


@dataclass(frozen=True)
class Box:
    window: Interval
    arg: "Formula"


Formula = Union[Atom, Top, Bot, Not, And, Or, Until, Diamond, Box]
TEMPORAL = (Until, Diamond, Box)


def window(lo, hi, lo_closed=False, hi_closed=False):
    """Shorthand for temporal windows; open on both sides unless told otherwise"""
    return make_interval(lo, lo_closed, hi, hi_closed)


# ==================== PARSER ====================

GRAMMAR = r"""
    ?start: disj

    ?disj: conj ("|" conj)*
    ?conj: unary ("&" unary)*

    ?unary: "!" unary                -> neg
          | "F" ival unary           -> diamond
          | "G" ival unary           -> box
          | primary "U" ival unary   -> until
          | primary

    ?primary: CNAME                  -> atom
            | "true"                 -> top
            | "false"                -> bot
            | "(" disj ")"

    ival: ival_open NUMBER "," bound ival_close
    !ival_open: "[" | "("
    !ival_close: "]" | ")"
    !bound: NUMBER | "inf"

    %import common.CNAME
    %import common.NUMBER
    %import common.WS
    %ignore WS
"""

_PARSER = Lark(GRAMMAR, parser="lalr", propagate_positions=True)


class _ToAst(Transformer):
    def atom(self, children):
        return Atom(str(children[0]))

    def top(self, _):
        return Top()

    def bot(self, _):
        return Bot()

    def neg(self, children):
        return Not(children[0])

    def diamond(self, children):
        return Diamond(children[0], children[1])

    def box(self, children):
        return Box(children[0], children[1])

    def until(self, children):
        left, ival, right = children
        return Until(ival, left, right)

    def disj(self, children):
        result = children[0]
        for child in children[1:]:
            result = Or(result, child)
        return result

    def conj(self, children):
        result = children[0]
        for child in children[1:]:
            result = And(result, child)
        return result

    def ival_open(self, children):
        return str(children[0])

    def ival_close(self, children):
        return str(children[0])

    def bound(self, children):
        return str(children[0])

    @v_args(meta=True)
    def ival(self, meta, children):
        lo_bracket, lo, hi, hi_bracket = children
        try:
            return make_interval(float(lo), lo_bracket == "[", float(hi), hi_bracket == "]")
        except EmptyInterval as e:
            raise ParseError(f"empty temporal window: {e}", meta.start_pos) from e


def _describe_terminal(name):
    try:
        pattern = _PARSER.get_terminal(name).pattern
    except KeyError:
        return name
    return repr(pattern.value) if pattern.type == "str" else name


def parse(text):
    """Parse concrete syntax into a Formula; ParseError carries a byte offset"""
    try:
        tree = _PARSER.parse(text)
    except UnexpectedInput as e:
        pos = getattr(e, "pos_in_stream", None)
        if pos is None or pos < 0:
            pos = len(text)
        expected = getattr(e, "expected", None) or getattr(e, "allowed", None) or ()
        raise ParseError(
            "unexpected input",
            len(text[:pos].encode("utf-8")),
            {_describe_terminal(name) for name in expected},
        ) from e
    try:
        return _ToAst().transform(tree)
    except VisitError as e:
        if isinstance(e.orig_exc, ParseError):
            err = e.orig_exc
            offset = len(text[: err.offset].encode("utf-8")) if err.offset is not None else None
            raise ParseError(str(err).split(" at byte")[0], offset) from e
        raise


# ==================== PRINTER ====================

def _ival_text(iv):
    return (
        ("[" if iv.lo.closed else "(")
        + format_number(iv.lo.value)
        + ","
        + format_number(iv.hi.value)
        + ("]" if iv.hi.closed else ")")
    )


def _primary_text(phi):
    if isinstance(phi, (Atom, Top, Bot)):
        return to_text(phi)
    return "(" + to_text(phi) + ")"


def _operand_text(phi):
    if isinstance(phi, (And, Or)):
        return "(" + to_text(phi) + ")"
    return to_text(phi)


def to_text(phi):
    """Concrete syntax for phi; parse(to_text(phi)) == phi"""
    if isinstance(phi, Atom):
        return phi.name
    if isinstance(phi, Top):
        return "true"
    if isinstance(phi, Bot):
        return "false"
    if isinstance(phi, Not):
        return "!" + _operand_text(phi.arg)
    if isinstance(phi, And):
        return _operand_text(phi.left) + " & " + _operand_text(phi.right)
    if isinstance(phi, Or):
        return _operand_text(phi.left) + " | " + _operand_text(phi.right)
    if isinstance(phi, Diamond):
        return "F" + _ival_text(phi.window) + " " + _operand_text(phi.arg)
    if isinstance(phi, Box):
        return "G" + _ival_text(phi.window) + " " + _operand_text(phi.arg)
    if isinstance(phi, Until):
        return _primary_text(phi.left) + " U" + _ival_text(phi.window) + " " + _operand_text(phi.right)
    raise TypeError(f"not a formula: {phi!r}")


# ==================== STRUCTURE ====================

def to_core(phi):
    """Rewrite sugar into Atom/Not/And/Until; true becomes the designated atom TOP_ATOM"""
    if isinstance(phi, Atom):
        return phi
    if isinstance(phi, Top):
        return Atom(TOP_ATOM)
    if isinstance(phi, Bot):
        return Not(Atom(TOP_ATOM))
    if isinstance(phi, Not):
        return Not(to_core(phi.arg))
    if isinstance(phi, And):
        return And(to_core(phi.left), to_core(phi.right))
    if isinstance(phi, Or):
        return Not(And(Not(to_core(phi.left)), Not(to_core(phi.right))))
    if isinstance(phi, Until):
        return Until(phi.window, to_core(phi.left), to_core(phi.right))
    if isinstance(phi, Diamond):
        return Until(phi.window, Atom(TOP_ATOM), to_core(phi.arg))
    if isinstance(phi, Box):
        return Not(Until(phi.window, Atom(TOP_ATOM), Not(to_core(phi.arg))))
    raise TypeError(f"not a formula: {phi!r}")


def children(phi):
    if isinstance(phi, (Not, Diamond, Box)):
        return (phi.arg,)
    if isinstance(phi, (And, Or, Until)):
        return (phi.left, phi.right)
    return ()


def is_propositional(phi):
    if isinstance(phi, TEMPORAL):
        return False
    return all(is_propositional(c) for c in children(phi))


def atoms_of(phi):
    if isinstance(phi, Atom):
        return {phi.name}
    names = set()
    for c in children(phi):
        names |= atoms_of(c)
    return names


def temporal_depth(phi):
    """Largest sum of window upper bounds along any path of the syntax tree"""
    if isinstance(phi, (Atom, Top, Bot)):
        return 0.0
    if isinstance(phi, Not):
        return temporal_depth(phi.arg)
    if isinstance(phi, (And, Or)):
        return max(temporal_depth(phi.left), temporal_depth(phi.right))
    hi = phi.window.hi.value
    if hi == float("inf"):
        raise UnboundedWindow(f"window {phi.window} of {to_text(phi)} is unbounded")
    return hi + max(temporal_depth(c) for c in children(phi))


def until_depth(phi):
    here = 1 if isinstance(phi, Until) else 0
    return here + max((until_depth(c) for c in children(phi)), default=0)


@dataclass(frozen=True)
class FlatCheck:
    ok: bool
    path: Tuple[str, ...] = ()
    reason: Optional[str] = None

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "flat"
        where = "/".join(self.path) or "<root>"
        return f"not flat at {where}: {self.reason}"


def is_flat(phi, _path=()):
    """
    Membership in the flat fragment: Boolean combinations of propositional
    formulas and of F_I p / G_I p with p propositional. Checked on the
    sugared tree; failures report the path to the offending node.
    """
    if isinstance(phi, (Atom, Top, Bot)):
        return FlatCheck(True)
    if isinstance(phi, Until):
        return FlatCheck(False, _path, "until is outside the flat fragment")
    if isinstance(phi, (Diamond, Box)):
        if is_propositional(phi.arg):
            return FlatCheck(True)
        op = "F" if isinstance(phi, Diamond) else "G"
        return FlatCheck(False, _path + (op,), f"{op}{_ival_text(phi.window)} has a temporal argument")
    if isinstance(phi, Not):
        return is_flat(phi.arg, _path + ("!",))
    step = "&" if isinstance(phi, And) else "|"
    left = is_flat(phi.left, _path + (step + ".left",))
    if not left:
        return left
    return is_flat(phi.right, _path + (step + ".right",))


# ==================== ATOM MAP ====================

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class AtomMap(Mapping):
    """Assignment atom name -> RegionSet B_a"""

    def __init__(self, regions=None):
        self._regions = {}
        for name, region in (regions or {}).items():
            if not _NAME_RE.match(name) or name in RESERVED:
                raise FormatError(f"'{name}' is not a valid atom name")
            if isinstance(region, str):
                region = parse_region(region)
            if not isinstance(region, RegionSet):
                region = RegionSet(tuple(region))
            self._regions[name] = region

    @classmethod
    def parse(cls, text):
        return cls._from_pairs(dotenv_values(stream=io.StringIO(text), interpolate=False))

    @classmethod
    def load(cls, path):
        atoms = cls._from_pairs(dotenv_values(path, interpolate=False))
        logger.info("✅ Loaded %d atoms from %s", len(atoms), path)
        return atoms

    @classmethod
    def _from_pairs(cls, pairs):
        regions = {}
        for name, text in pairs.items():
            if text is None:
                raise FormatError(f"atom '{name}' has no region (expected 'name = <region>')")
            try:
                regions[name] = parse_region(text)
            except MTLError as e:
                raise FormatError(f"atom '{name}': {e}") from e
        atoms = cls(regions)
        report = separation_report(atoms)
        for name in report["unseparated_atoms"]:
            logger.warning("⚠️ Region of atom '%s' is not a union of separated intervals", name)
        for a, b in report["touching_pairs"]:
            logger.warning("⚠️ Regions of '%s' and '%s' are disjoint but not separated", a, b)
        return atoms

    def region(self, name):
        if name == TOP_ATOM:
            return RegionSet.reals()
        try:
            return self._regions[name]
        except KeyError:
            raise UnknownAtom(name) from None

    def __getitem__(self, name):
        return self.region(name)

    def __iter__(self):
        return iter(self._regions)

    def __len__(self):
        return len(self._regions)

    def __eq__(self, other):
        return isinstance(other, AtomMap) and self._regions == other._regions

    def __hash__(self):
        return hash(tuple(sorted(self._regions.items(), key=lambda kv: kv[0])))

    def __reduce__(self):
        return (AtomMap, (dict(self._regions),))

    def to_text(self):
        return "".join(f"{name} = {region}\n" for name, region in self._regions.items())


def propositional_region(p, atoms):
    """Region B_p with X_t |= p  <=>  X_t in B_p, for propositional p"""
    if isinstance(p, Atom):
        return atoms.region(p.name)
    if isinstance(p, Top):
        return RegionSet.reals()
    if isinstance(p, Bot):
        return RegionSet.empty()
    if isinstance(p, Not):
        return complement_in_reals(propositional_region(p.arg, atoms))
    if isinstance(p, And):
        return intersect(propositional_region(p.left, atoms), propositional_region(p.right, atoms))
    if isinstance(p, Or):
        return union(propositional_region(p.left, atoms), propositional_region(p.right, atoms))
    raise NotPropositional(f"{to_text(p)} contains a temporal operator")


def check_separated(region):
    """True iff the components of region have pairwise disjoint closures"""
    parts = region.intervals
    return all(prev.hi.value < nxt.lo.value for prev, nxt in zip(parts, parts[1:]))


def _closure(region):
    return RegionSet(
        Interval(Endpoint(iv.lo.value, True), Endpoint(iv.hi.value, True)) if iv.bounded
        else Interval(
            Endpoint(iv.lo.value, iv.lo.value != float("-inf")),
            Endpoint(iv.hi.value, iv.hi.value != float("inf")),
        )
        for iv in region.intervals
    )


def separation_report(atoms):
    names = list(atoms)
    unseparated = [name for name in names if not check_separated(atoms.region(name))]
    touching = []
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            ra, rb = atoms.region(a), atoms.region(b)
            if not intersect(ra, rb) and intersect(_closure(ra), _closure(rb)):
                touching.append((a, b))
    return {
        "separated": not unseparated and not touching,
        "unseparated_atoms": unseparated,
        "touching_pairs": touching,
    }


# ==================== CANNED FORMULAS ====================

def counterexample_formulas():
    """The nested-diamond chain whose discretization never converges"""
    p = Atom("p")
    phi_1 = parse("G(1,2)(F(1,4) p & !F(1,3) p)")
    phi_2 = And(
        And(Diamond(window(1, 3), phi_1), Not(Diamond(window(1, 2), phi_1))),
        Not(Diamond(window(2, 3), phi_1)),
    )
    phi_3 = Diamond(window(1, 2), phi_2)
    psi = And(And(Not(p), Not(Diamond(window(0, 8), p))), phi_3)
    return {"phi_1": phi_1, "phi_2": phi_2, "phi_3": phi_3, "psi": psi}


def flat_zero_formula():
    return parse("!F(0,1) p")


def flat_diamond_formula():
    return parse("F[1,2] p")
