"""Symbolic heaps: the abstract-domain elements of the analysis.

A symbolic heap is an existentially quantified separating conjunction of
pure atoms (pointer equalities/disequalities and exact integer values) and
spatial atoms (points-to cells, acyclic list-segment predicates, and freed
cells). A set of symbolic heaps, one disjunct per reachable memory shape,
is attached to every program location during analysis.

Spatial atoms:

  PointsTo(src, fields)          one allocated cell with the given record
  Ls(min, src, dst)              acyclic singly-linked segment, >= min cells
  Dls(min, first, last, p, n)    acyclic doubly-linked segment; p is the
                                 prev of the first cell, n the next of the
                                 last cell; empty iff first==n and last==p
  Nls(min, src, dst, sink)       acyclic top-level chain of >= min cells,
                                 each heading a disjoint inner SLL ending
                                 at the shared sink
  Freed(src)                     a deallocated cell that is still referenced

Segment atoms carry the field names that link their cells, so a formula is
self-contained: no struct table is needed to interpret it. Defaults match
the conventional names (next/prev/inner).

Normalization collapses equality classes to a single representative
(nil > program variable > existential), drops out-of-scope existentials,
deduplicates atoms, and canonically renames the remaining existentials so
that syntactic equality of normalized heaps is meaningful. A heap whose
pure part is contradictory raises Contradiction, which callers treat as an
unsatisfiable (discardable) branch.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Union

PROGRAM = "program"
EXISTENTIAL = "existential"
NILKIND = "nil"

_KIND_RANK = {NILKIND: 0, PROGRAM: 1, EXISTENTIAL: 2}


@dataclass(frozen=True)
class Var:
    name: str
    kind: str = PROGRAM

    def __post_init__(self):
        if self.kind not in _KIND_RANK:
            raise ValueError(f"bad variable kind: {self.kind!r}")

    @property
    def is_nil(self) -> bool:
        return self.kind == NILKIND

    @property
    def is_existential(self) -> bool:
        return self.kind == EXISTENTIAL

    @property
    def is_program(self) -> bool:
        return self.kind == PROGRAM

    def __repr__(self):
        return self.name if self.is_program or self.is_nil else f"?{self.name}"


NIL = Var("nil", NILKIND)

# Terms are variables or integer constants.
Term = Union[Var, int]

_fresh_counter = itertools.count()


def fresh_existential(hint: str = "v") -> Var:
    return Var(f"_{hint}{next(_fresh_counter)}", EXISTENTIAL)


def _natural(name: str):
    # sort "_g2" before "_g10"
    head = name.rstrip("0123456789")
    tail = name[len(head):]
    return (head, int(tail) if tail else -1)


def term_key(t: Term):
    """Total deterministic order over terms (ints before vars)."""
    if isinstance(t, int):
        return (0, t, "", ())
    return (1, _KIND_RANK[t.kind], t.name, _natural(t.name))


def subst_term(t: Term, mapping: dict) -> Term:
    if isinstance(t, Var):
        return mapping.get(t, t)
    return t


# ---------------------------------------------------------------------------
# Pure atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Eq:
    a: Term
    b: Term


@dataclass(frozen=True)
class Neq:
    a: Term
    b: Term


@dataclass(frozen=True)
class IntVal:
    var: Var
    value: int


PureAtom = Union[Eq, Neq, IntVal]


# ---------------------------------------------------------------------------
# Spatial atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointsTo:
    src: Var
    fields: tuple  # tuple of (fieldName, Term), sorted by field name

    def __post_init__(self):
        object.__setattr__(self, "fields", tuple(sorted(self.fields)))

    @property
    def field_map(self) -> dict:
        return dict(self.fields)

    @property
    def field_names(self) -> frozenset:
        return frozenset(name for name, _ in self.fields)


@dataclass(frozen=True)
class Ls:
    min: int
    src: Var
    dst: Var
    next_field: str = "next"


@dataclass(frozen=True)
class Dls:
    min: int
    first: Var
    last: Var
    prev_link: Var  # value of the first cell's prev field
    next_link: Var  # value of the last cell's next field
    next_field: str = "next"
    prev_field: str = "prev"


@dataclass(frozen=True)
class Nls:
    min: int
    src: Var
    dst: Var
    sink: Var  # shared terminator of every inner list
    next_field: str = "next"
    nested_field: str = "inner"
    inner_next_field: str = "next"


@dataclass(frozen=True)
class Freed:
    src: Var


SpatialAtom = Union[PointsTo, Ls, Dls, Nls, Freed]

SEGMENT_TYPES = (Ls, Dls, Nls)


def points_to(src: Var, **fields) -> PointsTo:
    return PointsTo(src, tuple(fields.items()))


def atom_terms(atom) -> list:
    """All terms occurring in an atom, in a fixed positional order."""
    if isinstance(atom, Eq) or isinstance(atom, Neq):
        return [atom.a, atom.b]
    if isinstance(atom, IntVal):
        return [atom.var]
    if isinstance(atom, PointsTo):
        return [atom.src] + [v for _, v in atom.fields]
    if isinstance(atom, Ls):
        return [atom.src, atom.dst]
    if isinstance(atom, Dls):
        return [atom.first, atom.last, atom.prev_link, atom.next_link]
    if isinstance(atom, Nls):
        return [atom.src, atom.dst, atom.sink]
    if isinstance(atom, Freed):
        return [atom.src]
    raise TypeError(f"not an atom: {atom!r}")


def atom_vars(atom) -> set:
    return {t for t in atom_terms(atom) if isinstance(t, Var)}


def subst_atom(atom, mapping: dict):
    if isinstance(atom, Eq):
        return Eq(subst_term(atom.a, mapping), subst_term(atom.b, mapping))
    if isinstance(atom, Neq):
        return Neq(subst_term(atom.a, mapping), subst_term(atom.b, mapping))
    if isinstance(atom, IntVal):
        v = mapping.get(atom.var, atom.var)
        if isinstance(v, int):
            if v == atom.value:
                return None  # trivially true
            raise Contradiction(f"{atom.var} = {atom.value} vs {v}")
        return IntVal(v, atom.value)
    if isinstance(atom, PointsTo):
        return PointsTo(subst_term(atom.src, mapping),
                        tuple((f, subst_term(v, mapping)) for f, v in atom.fields))
    if isinstance(atom, Ls):
        return replace(atom, src=subst_term(atom.src, mapping), dst=subst_term(atom.dst, mapping))
    if isinstance(atom, Dls):
        return replace(atom,
                       first=subst_term(atom.first, mapping),
                       last=subst_term(atom.last, mapping),
                       prev_link=subst_term(atom.prev_link, mapping),
                       next_link=subst_term(atom.next_link, mapping))
    if isinstance(atom, Nls):
        return replace(atom,
                       src=subst_term(atom.src, mapping),
                       dst=subst_term(atom.dst, mapping),
                       sink=subst_term(atom.sink, mapping))
    if isinstance(atom, Freed):
        return Freed(subst_term(atom.src, mapping))
    raise TypeError(f"not an atom: {atom!r}")


def atom_min_cells(atom) -> int:
    """Minimum number of allocated cells any model assigns to this atom."""
    if isinstance(atom, PointsTo):
        return 1
    if isinstance(atom, SEGMENT_TYPES):
        return atom.min
    return 0  # Freed


# ---------------------------------------------------------------------------
# Symbolic heaps
# ---------------------------------------------------------------------------


class Contradiction(Exception):
    """The pure part of a heap is unsatisfiable; discard the branch."""


@dataclass(frozen=True)
class SymbolicHeap:
    existentials: frozenset = frozenset()
    pure: frozenset = frozenset()
    spatial: tuple = ()

    def all_vars(self) -> set:
        out = set()
        for a in self.pure:
            out |= atom_vars(a)
        for a in self.spatial:
            out |= atom_vars(a)
        return out

    def free_vars(self) -> set:
        """Variables occurring in atoms that are not bound or nil."""
        return {v for v in self.all_vars()
                if not v.is_nil and v not in self.existentials}

    def ints(self) -> set:
        out = set()
        for a in itertools.chain(self.pure, self.spatial):
            if isinstance(a, IntVal):
                out.add(a.value)
            out |= {t for t in atom_terms(a) if isinstance(t, int)}
        return out

    def with_pure(self, *atoms) -> "SymbolicHeap":
        return replace(self, pure=self.pure | set(atoms))

    def with_spatial(self, *atoms) -> "SymbolicHeap":
        return replace(self, spatial=self.spatial + tuple(atoms))

    def with_existentials(self, *vs) -> "SymbolicHeap":
        return replace(self, existentials=self.existentials | set(vs))

    def sort_key(self):
        from .sltext import format_heap
        return format_heap(self)

    def __str__(self):
        from .sltext import format_heap
        return format_heap(self)


EMP = SymbolicHeap()


def heap(existentials: Iterable[Var] = (), pure: Iterable = (), spatial: Iterable = ()) -> SymbolicHeap:
    return SymbolicHeap(frozenset(existentials), frozenset(pure), tuple(spatial))


def substitute(h: SymbolicHeap, frm: Var, to: Term) -> SymbolicHeap:
    """Replace every occurrence of frm by to, adjusting the binder set."""
    if frm.is_nil:
        raise ValueError("cannot substitute nil")
    mapping = {frm: to}
    pure = set()
    for a in h.pure:
        na = subst_atom(a, mapping)
        if na is not None:
            pure.add(na)
    spatial = tuple(subst_atom(a, mapping) for a in h.spatial)
    exist = set(h.existentials) - {frm}
    if isinstance(to, Var) and to.is_existential:
        exist.add(to)
    return SymbolicHeap(frozenset(exist), frozenset(pure), spatial)


def alloc_count(h: SymbolicHeap) -> int:
    """Lower bound on the number of allocated cells in any model of h."""
    return sum(atom_min_cells(a) for a in h.spatial)


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


class _UnionFind:
    def __init__(self):
        self.parent = {}

    def find(self, x):
        p = self.parent.setdefault(x, x)
        while p != x:
            self.parent[x] = p = self.parent.setdefault(p, p)
            x = p
            p = self.parent.setdefault(x, x)
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            # keep the preferred representative (nil > program > existential)
            if term_key(ra) <= term_key(rb):
                self.parent[rb] = ra
            else:
                self.parent[ra] = rb


def _rep_map(h: SymbolicHeap):
    """Map each var to its equivalence-class representative; ints stay as pinned values."""
    uf = _UnionFind()
    int_pins = {}
    for a in h.pure:
        if isinstance(a, Eq):
            x, y = a.a, a.b
            if isinstance(x, int) and isinstance(y, int):
                if x != y:
                    raise Contradiction(f"{x} = {y}")
            elif isinstance(x, int):
                int_pins.setdefault(uf.find(y), set()).add(x)
            elif isinstance(y, int):
                int_pins.setdefault(uf.find(x), set()).add(y)
            else:
                uf.union(x, y)
        elif isinstance(a, IntVal):
            int_pins.setdefault(uf.find(a.var), set()).add(a.value)
    mapping = {}
    values = {}
    for v in h.all_vars():
        r = uf.find(v)
        mapping[v] = r
    # merge pins recorded against stale representatives
    for v, pins in list(int_pins.items()):
        r = uf.find(v)
        if r is not v:
            int_pins.setdefault(r, set()).update(pins)
            del int_pins[v]
    for r, pins in int_pins.items():
        if len(pins) > 1:
            raise Contradiction(f"{r} pinned to {sorted(pins)}")
        values[uf.find(r)] = next(iter(pins))
    return mapping, values


def resolve_map(h: SymbolicHeap):
    """Equivalence-class representatives and pinned integer values of h.

    Returns (mapping var -> representative, values representative -> int).
    """
    return _rep_map(h)


def _ordered_pair(a: Term, b: Term):
    return (a, b) if term_key(a) <= term_key(b) else (b, a)


def normalize(h: SymbolicHeap) -> SymbolicHeap:
    """Canonical form: representatives substituted, scopes reduced, atoms
    deduplicated, existentials renamed deterministically.

    Raises Contradiction when the pure part clashes (x=y and x!=y on the
    same representatives, conflicting pinned integers, or an equality that
    forces nil to be allocated).
    """
    mapping, values = _rep_map(h)

    pure = set()
    classes = {}
    for v, r in mapping.items():
        classes.setdefault(r, set()).add(v)

    # retain one equality per non-representative *program* variable so the
    # state still determines its value; existentials are merged away
    for r, members in classes.items():
        for v in members:
            if v is not r and v.is_program and isinstance(r, Var):
                pure.add(Eq(v, r))

    for r, val in values.items():
        if r.is_nil:
            raise Contradiction("nil pinned to an integer")
        pure.add(IntVal(mapping.get(r, r), val))

    def res(t: Term) -> Term:
        if isinstance(t, Var):
            r = mapping.get(t, t)
            return values.get(r, r)
        return t

    for a in h.pure:
        if isinstance(a, (Eq, Neq)):
            x, y = res(a.a), res(a.b)
            if x == y:
                if isinstance(a, Neq):
                    raise Contradiction(f"{x} != {x}")
                continue
            both_int = isinstance(x, int) and isinstance(y, int)
            if isinstance(a, Eq):
                if both_int:
                    raise Contradiction(f"{x} = {y}")  # distinct pins already merged
                continue  # equality is absorbed by the representative map
            if both_int:
                continue  # distinct constants: trivially true
            # a disequality between a var and its pinned value clashes
            pure.add(Neq(*_ordered_pair(x, y)))
        # IntVal handled via values

    # a Neq between two vars pinned to the same int, or var vs its own value
    drop = set()
    for a in pure:
        if isinstance(a, Neq):
            x, y = a.a, a.b
            if x == y:
                raise Contradiction(f"{x} != {y}")
            if isinstance(x, int) and isinstance(y, int):
                drop.add(a)
    pure -= drop

    spatial = []
    for a in h.spatial:
        na = subst_atom(a, {v: res(v) for v in atom_vars(a)})
        if isinstance(na, (PointsTo, Freed)) and na.src.is_nil:
            raise Contradiction("nil cannot be allocated or freed")
        if isinstance(na, Ls) and na.min == 0 and na.src == na.dst:
            continue  # empty segment is emp
        if isinstance(na, Nls) and na.min == 0 and na.src == na.dst:
            continue
        if isinstance(na, Dls) and na.min == 0 and na.first == na.next_link and na.last == na.prev_link:
            continue
        spatial.append(na)

    # check disequalities against the collapsed equalities
    eqpairs = {(_ordered_pair(a.a, a.b)) for a in pure if isinstance(a, Eq)}
    for a in pure:
        if isinstance(a, Neq) and _ordered_pair(a.a, a.b) in eqpairs:
            raise Contradiction(f"{a.a} = {a.b} and {a.a} != {a.b}")

    used = set()
    for a in itertools.chain(pure, spatial):
        used |= atom_vars(a)
    exist = {v for v in h.existentials if mapping.get(v, v) == v and v in used}

    return _canonicalize(SymbolicHeap(frozenset(exist), frozenset(pure), tuple(spatial)))


def _blind_key(atom, exist: frozenset):
    def t(x):
        if isinstance(x, Var) and x in exist:
            return (2, "?", "", ())
        return term_key(x)

    name = type(atom).__name__
    if isinstance(atom, PointsTo):
        return (name, t(atom.src), tuple((f, t(v)) for f, v in atom.fields))
    if isinstance(atom, Ls):
        return (name, atom.next_field, atom.min, t(atom.src), t(atom.dst))
    if isinstance(atom, Dls):
        return (name, atom.next_field, atom.prev_field, atom.min,
                t(atom.first), t(atom.last), t(atom.prev_link), t(atom.next_link))
    if isinstance(atom, Nls):
        return (name, atom.next_field, atom.nested_field, atom.inner_next_field,
                atom.min, t(atom.src), t(atom.dst), t(atom.sink))
    if isinstance(atom, Freed):
        return (name, t(atom.src))
    if isinstance(atom, IntVal):
        return (name, t(atom.var), atom.value)
    return (type(atom).__name__, t(atom.a), t(atom.b))


def _full_key(atom):
    name = type(atom).__name__
    if isinstance(atom, PointsTo):
        return (name, term_key(atom.src), tuple((f, term_key(v)) for f, v in atom.fields))
    if isinstance(atom, Ls):
        return (name, atom.next_field, atom.min, term_key(atom.src), term_key(atom.dst))
    if isinstance(atom, Dls):
        return (name, atom.next_field, atom.prev_field, atom.min, term_key(atom.first),
                term_key(atom.last), term_key(atom.prev_link), term_key(atom.next_link))
    if isinstance(atom, Nls):
        return (name, atom.next_field, atom.nested_field, atom.inner_next_field,
                atom.min, term_key(atom.src), term_key(atom.dst), term_key(atom.sink))
    if isinstance(atom, Freed):
        return (name, term_key(atom.src))
    if isinstance(atom, IntVal):
        return (name, term_key(atom.var), atom.value)
    return (name, term_key(atom.a), term_key(atom.b))


def _canonicalize(h: SymbolicHeap) -> SymbolicHeap:
    """Rename existentials to _g0, _g1, ... deterministically and sort atoms.

    Existentials are ordered by an occurrence signature that ignores their
    current names, so alpha-variants built the same way canonicalize alike;
    ties fall back to the current name, which keeps the map idempotent.
    """
    if not h.existentials:
        spatial = tuple(sorted(h.spatial, key=_full_key))
        pure = frozenset(_orient_pure(a) for a in h.pure)
        return SymbolicHeap(h.existentials, pure, spatial)

    exist = h.existentials
    sig = {v: [] for v in exist}
    for a in itertools.chain(sorted(h.spatial, key=lambda a: _blind_key(a, exist)),
                             sorted(h.pure, key=lambda a: _blind_key(a, exist))):
        bk = _blind_key(a, exist)
        for pos, t in enumerate(atom_terms(a)):
            if isinstance(t, Var) and t in exist:
                sig[t].append((bk, pos))
    order = sorted(exist, key=lambda v: (sorted(sig[v]), _natural(v.name), v.name))
    mapping = {v: Var(f"_g{i}", EXISTENTIAL) for i, v in enumerate(order)}
    pure = set()
    for a in h.pure:
        na = subst_atom(a, mapping)
        if na is not None:
            pure.add(_orient_pure(na))
    spatial = tuple(sorted((subst_atom(a, mapping) for a in h.spatial), key=_full_key))
    return SymbolicHeap(frozenset(mapping.values()), frozenset(pure), spatial)


def _orient_pure(a):
    if isinstance(a, Eq):
        return Eq(*_ordered_pair(a.a, a.b))
    if isinstance(a, Neq):
        return Neq(*_ordered_pair(a.a, a.b))
    return a


# ---------------------------------------------------------------------------
# State sets
# ---------------------------------------------------------------------------

StateSet = frozenset


def state_set(heaps: Iterable[SymbolicHeap]) -> StateSet:
    """Normalize and deduplicate; contradictory members are dropped."""
    out = set()
    for h in heaps:
        try:
            out.add(normalize(h))
        except Contradiction:
            pass
    return frozenset(out)


def sorted_heaps(s: Iterable[SymbolicHeap]) -> list:
    return sorted(s, key=lambda h: h.sort_key())
