"""Bounded-model decision procedures for symbolic heaps.

Satisfiability and entailment are decided by finite model search up to a
location bound derived from the query:

  * `compute_bound` gives the number of locations that suffices to unfold
    every list predicate in a formula (a deliberately generous count).
  * `check_sat` enumerates candidate models generatively: choose a length
    for every segment atom, a value for every variable (cells introduced
    by the atoms, junk locations, nil, and in-range integers), build the
    heap the atoms describe, and verify the candidate with `satisfies`.
  * `check_entail(lhs, rhs)` searches models of lhs up to the combined
    bound of both sides for a counter-model of rhs.

`satisfies` is the single source of truth for the semantics: a model
satisfies a heap iff there is an assignment of the existentials and a
partition of the allocated cells into one footprint per spatial atom
(points-to: exactly its cell; ls/dls/nls: an acyclic chain whose cells all
differ from the end link; freed: a distinct deallocated location). Freed
locations not claimed by any atom are permitted; allocated cells must all
be claimed.

`oracle_check_sat` / `oracle_check_entail` answer the same questions by
exhaustive enumeration of every model up to a given size, with no
formula-derived bound. They exist purely as a cross-check for the search
above. The enumeration is exhaustive up to three satisfaction-preserving
quotients, documented at `_oracle_models`: canonical location naming,
only referenced/allocated/freed locations, and canonical fresh integers.

Model values are encoded as: locations = ints >= 0, nil = -1, integer
values = ("i", n) pairs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .formula import (
    Contradiction, Dls, Eq, Freed, IntVal, Ls, Neq, Nls, PointsTo,
    SEGMENT_TYPES, SymbolicHeap, Var, normalize, term_key,
)

NILV = -1


def _enc_int(n: int):
    return ("i", n)


def _is_loc(v) -> bool:
    return isinstance(v, int) and v >= 0


class HeapModel:
    """A finite stack-and-heap structure; the solver's concrete models."""

    __slots__ = ("n_locs", "stack", "heap", "freed")

    def __init__(self, n_locs: int, stack: dict, heap: dict, freed: frozenset):
        self.n_locs = n_locs
        self.stack = stack
        self.heap = heap
        self.freed = frozenset(freed)

    def __repr__(self):
        return f"HeapModel(n={self.n_locs}, stack={self.stack}, heap={self.heap}, freed={set(self.freed)})"

    def to_json(self) -> dict:
        def enc(v):
            if v == NILV:
                return "nil"
            if _is_loc(v):
                return f"L{v}"
            return v[1]

        return {
            "locations": self.n_locs,
            "stack": {v.name: enc(val) for v, val in sorted(self.stack.items(), key=lambda p: p[0].name)},
            "heap": {f"L{loc}": {f: enc(v) for f, v in sorted(cell.items())}
                     for loc, cell in sorted(self.heap.items())},
            "freed": [f"L{loc}" for loc in sorted(self.freed)],
        }


@dataclass(frozen=True)
class Bound:
    max_locations: int


def compute_bound(h: SymbolicHeap) -> Bound:
    """Locations sufficient to unfold every predicate instance in h."""
    n_pt = sum(1 for a in h.spatial if isinstance(a, PointsTo))
    n_fr = sum(1 for a in h.spatial if isinstance(a, Freed))
    seg = sum(a.min + 2 for a in h.spatial if isinstance(a, SEGMENT_TYPES))
    return Bound(n_pt + n_fr + seg + len(h.free_vars()) + 1)


# ---------------------------------------------------------------------------
# Model checking
# ---------------------------------------------------------------------------


def _sig_of(atom):
    if isinstance(atom, PointsTo):
        return tuple(sorted(atom.field_names))
    if isinstance(atom, Ls):
        return (atom.next_field,)
    if isinstance(atom, Dls):
        return tuple(sorted((atom.next_field, atom.prev_field)))
    if isinstance(atom, Nls):
        return tuple(sorted((atom.next_field, atom.nested_field)))
    return None


def _sigs_of(h: SymbolicHeap) -> set:
    out = set()
    for a in h.spatial:
        s = _sig_of(a)
        if s:
            out.add(s)
        if isinstance(a, Nls):
            out.add((a.inner_next_field,))
    return out


def satisfies(model: HeapModel, h: SymbolicHeap, k: int = 5) -> bool:
    """True iff the model is described by h (see module docstring).

    Free variables of h must be present on the model's stack.
    """
    for v in h.free_vars():
        if v not in model.stack:
            raise KeyError(f"variable {v.name} not on the model stack")

    exist = h.existentials

    def val(asn, t):
        if isinstance(t, int):
            return _enc_int(t)
        if t.is_nil:
            return NILV
        if t in exist:
            return asn.get(t)
        return model.stack[t]

    def unify(asn, t, value):
        """Returns an extended assignment or None on clash."""
        cur = val(asn, t)
        if cur is None:
            new = dict(asn)
            new[t] = value
            return new
        return asn if cur == value else None

    all_values = list(range(model.n_locs)) + [NILV] + [_enc_int(i) for i in range(-k, k + 1)]

    def pure_ok(asn):
        pending = [v for a in h.pure for v in _pure_vars(a) if v in exist and asn.get(v) is None]
        pending = sorted(set(pending), key=term_key)
        for combo in itertools.product(all_values, repeat=len(pending)):
            trial = dict(asn)
            trial.update(zip(pending, combo))
            if all(_eval_pure(a, lambda t: val(trial, t)) for a in h.pure):
                return True
        return False

    def walk_chain(start, nf, avail, min_len, stop_cb):
        """Walk next-linked cells from `start`, trying every prefix >= min_len.

        stop_cb(cells_tuple, after_value) is called for each candidate stop;
        returns True to accept.
        """
        cells = []
        cur = start
        while True:
            if len(cells) >= min_len and stop_cb(tuple(cells), cur):
                return True
            if not _is_loc(cur) or cur not in avail or cur in cells:
                return False
            cell = model.heap.get(cur)
            if cell is None or set(cell.keys()) != {nf}:
                return False
            cells.append(cur)
            cur = cell[nf]

    def match(atoms, avail, freed_avail, asn):
        if not atoms:
            return not avail and pure_ok(asn)

        # prefer an atom whose anchor is already determined
        idx = 0
        for i, a in enumerate(atoms):
            anchor = _anchor(a)
            if anchor is None or val(asn, anchor) is not None:
                idx = i
                break
        atom = atoms[idx]
        rest = atoms[:idx] + atoms[idx + 1:]
        anchor = _anchor(atom)
        anchor_vals = ([val(asn, anchor)] if val(asn, anchor) is not None
                       else all_values)

        for av in anchor_vals:
            asn1 = unify(asn, anchor, av) if anchor is not None else asn
            if asn1 is None:
                continue
            if _match_one(atom, av, rest, avail, freed_avail, asn1):
                return True
        return False

    def _match_one(atom, av, rest, avail, freed_avail, asn):
        if isinstance(atom, PointsTo):
            if not _is_loc(av) or av not in avail:
                return False
            cell = model.heap[av]
            if set(cell.keys()) != set(atom.field_names):
                return False
            cur = asn
            for f, t in atom.fields:
                cur = unify(cur, t, cell[f])
                if cur is None:
                    return False
            return match(rest, avail - {av}, freed_avail, cur)

        if isinstance(atom, Freed):
            if av not in freed_avail:
                return False
            return match(rest, avail, freed_avail - {av}, asn)

        if isinstance(atom, Ls):
            def stop(cells, after):
                asn1 = unify(asn, atom.dst, after)
                if asn1 is None or val(asn1, atom.dst) in cells:
                    return False
                return match(rest, avail - set(cells), freed_avail, asn1)

            return walk_chain(av, atom.next_field, avail, atom.min, stop)

        if isinstance(atom, Dls):
            return _match_dls(atom, av, rest, avail, freed_avail, asn)

        if isinstance(atom, Nls):
            return _match_nls(atom, av, rest, avail, freed_avail, asn)

        raise TypeError(f"not a spatial atom: {atom!r}")

    def _match_dls(atom, av, rest, avail, freed_avail, asn):
        nf, pf = atom.next_field, atom.prev_field
        # empty segment: first == next_link and last == prev_link
        if atom.min == 0:
            a1 = unify(asn, atom.next_link, av)
            if a1 is not None:
                pl = val(a1, atom.prev_link)
                for cand in ([pl] if pl is not None else all_values):
                    a2 = unify(a1, atom.prev_link, cand)
                    a2 = a2 and unify(a2, atom.last, cand)
                    if a2 is not None and match(rest, avail, freed_avail, a2):
                        return True
        # non-empty: walk from first checking prev consistency
        cells = []
        cur = av
        prev_expect = atom.prev_link
        while True:
            if len(cells) >= max(atom.min, 1):
                a1 = unify(asn, atom.last, cells[-1])
                a1 = a1 and unify(a1, atom.next_link, cur)
                if a1 is not None and val(a1, atom.next_link) not in cells:
                    if match(rest, avail - set(cells), freed_avail, a1):
                        return True
            if not _is_loc(cur) or cur not in avail or cur in cells:
                return False
            cell = model.heap.get(cur)
            if cell is None or set(cell.keys()) != {nf, pf}:
                return False
            if not cells:
                a0 = unify(asn, prev_expect, cell[pf])
                if a0 is None:
                    return False
                asn = a0
            elif cell[pf] != cells[-1]:
                return False
            cells.append(cur)
            cur = cell[nf]

    def _match_nls(atom, av, rest, avail, freed_avail, asn):
        nf, nst, inf = atom.next_field, atom.nested_field, atom.inner_next_field

        def inner_chains(tops, avail2, asn2):
            """Consume the inner list of each top cell, then the rest."""
            if not tops:
                return match(rest, avail2, freed_avail, asn2)
            head, *more = tops
            w = model.heap[head][nst]

            def stop(cells, after):
                a1 = unify(asn2, atom.sink, after)
                if a1 is None or val(a1, atom.sink) in cells:
                    return False
                return inner_chains(more, avail2 - set(cells), a1)

            cur = w
            cells = []
            while True:
                if stop(tuple(cells), cur):
                    return True
                if not _is_loc(cur) or cur not in avail2 or cur in cells:
                    return False
                cell = model.heap.get(cur)
                if cell is None or set(cell.keys()) != {inf}:
                    return False
                cells.append(cur)
                cur = cell[inf]

        if atom.min == 0:
            a1 = unify(asn, atom.dst, av)
            if a1 is not None and match(rest, avail, freed_avail, a1):
                return True

        cells = []
        cur = av
        while True:
            if len(cells) >= max(atom.min, 1):
                a1 = unify(asn, atom.dst, cur)
                if a1 is not None and val(a1, atom.dst) not in cells:
                    if inner_chains(tuple(cells), avail - set(cells), a1):
                        return True
            if not _is_loc(cur) or cur not in avail or cur in cells:
                return False
            cell = model.heap.get(cur)
            if cell is None or set(cell.keys()) != {nf, nst}:
                return False
            cells.append(cur)
            cur = cell[nf]

    avail0 = frozenset(model.heap.keys())
    return match(tuple(h.spatial), avail0, frozenset(model.freed), {})


def _anchor(atom):
    if isinstance(atom, (PointsTo, Freed)):
        return atom.src
    if isinstance(atom, (Ls, Nls)):
        return atom.src
    if isinstance(atom, Dls):
        return atom.first
    return None


def _pure_vars(a):
    if isinstance(a, IntVal):
        return [a.var]
    return [t for t in (a.a, a.b) if isinstance(t, Var)]


def _eval_pure(a, val):
    if isinstance(a, Eq):
        return val(a.a) == val(a.b)
    if isinstance(a, Neq):
        return val(a.a) != val(a.b)
    if isinstance(a, IntVal):
        return val(a.var) == _enc_int(a.value)
    raise TypeError(f"not a pure atom: {a!r}")


# ---------------------------------------------------------------------------
# Generative model search
# ---------------------------------------------------------------------------


def _var_order(h: SymbolicHeap) -> list:
    return sorted(h.free_vars() | h.existentials, key=term_key)


def _int_hint(h: SymbolicHeap, v: Var) -> bool:
    for a in h.pure:
        if isinstance(a, IntVal) and a.var == v:
            return True
        if isinstance(a, (Eq, Neq)) and v in (a.a, a.b):
            other = a.b if a.a == v else a.a
            if isinstance(other, int):
                return True
    return False


def _iter_models(h: SymbolicHeap, max_locs: int, k: int, extra_ints=()):
    """Yield every model of h with at most max_locs locations, up to
    renaming, with variables valued on named cells, junk locations, nil,
    and integers. Every yielded model passes `satisfies`."""
    variables = _var_order(h)
    ints = sorted(set(h.ints()) | set(extra_ints))
    palette = [i for i in range(-k, k + 1) if i not in ints]
    pure_ground = [a for a in h.pure
                   if all(v not in h.existentials for v in _pure_vars(a))]
    segs = [a for a in h.spatial if isinstance(a, SEGMENT_TYPES)]
    fixed_cells = sum(1 for a in h.spatial if isinstance(a, (PointsTo, Freed)))

    def valuations(i, used, asn, ints_used):
        if i == len(variables):
            yield dict(asn), used
            return
        v = variables[i]
        opts = [NILV]
        opts += [j for j in range(used + 1) if j < max_locs]
        if _int_hint(h, v):
            opts += [_enc_int(n) for n in ints]
            if ints_used < len(palette):
                opts.append(_enc_int(palette[ints_used]))
        for o in opts:
            asn[v] = o
            nu = used + 1 if o == used else used
            niu = ints_used + (1 if (isinstance(o, tuple) and o[1] in palette) else 0)
            yield from valuations(i + 1, nu, asn, niu)
        del asn[v]

    def lengths(i, budget, acc):
        # budget counts anonymous cells only: segment heads (and dls tails)
        # sit at already-counted named slots. Lengths are additionally
        # capped at min + LENGTH_SLACK: models whose chains run past every
        # variable and minimum behave identically for any query, so longer
        # unfoldings add nothing (cross-checked by the oracle agreement
        # suite).
        if i == len(segs):
            yield tuple(acc)
            return
        a = segs[i]
        if isinstance(a, Ls):
            for ln in range(a.min, min(a.min + LENGTH_SLACK, budget + 1) + 1):
                cost = max(ln - 1, 0)
                if cost > budget:
                    break
                acc.append(ln)
                yield from lengths(i + 1, budget - cost, acc)
                acc.pop()
        elif isinstance(a, Dls):
            for ln in range(a.min, min(a.min + LENGTH_SLACK, budget + 2) + 1):
                cost = max(ln - 2, 0)
                if cost > budget:
                    break
                acc.append(ln)
                yield from lengths(i + 1, budget - cost, acc)
                acc.pop()
        else:  # Nls: top length plus inner lengths, all but the head anonymous
            for top in range(a.min, min(a.min + LENGTH_SLACK, budget + 1) + 1):
                cost = max(top - 1, 0)
                if cost > budget:
                    break
                for inner in _compositions(top, min(budget - cost, top * INNER_SLACK),
                                           INNER_SLACK):
                    acc.append((top, inner))
                    yield from lengths(i + 1, budget - cost - sum(inner), acc)
                    acc.pop()

    for asn, used in valuations(0, 0, {}, 0):
        def val(t):
            if isinstance(t, int):
                return _enc_int(t)
            if t.is_nil:
                return NILV
            return asn[t]

        if not all(_eval_pure(a, val) for a in pure_ground):
            continue
        budget = max_locs - used
        if budget < 0:
            continue
        for lens in lengths(0, budget, []):
            model = _construct(h, asn, lens, used, max_locs, segs, val)
            if model is not None and satisfies(model, h, k):
                yield model


def _compositions(parts: int, total_budget: int, each_max: int = None):
    """All tuples of `parts` non-negative ints with sum <= total_budget
    (each entry additionally bounded by each_max when given)."""
    if parts == 0:
        yield ()
        return
    hi = total_budget if each_max is None else min(total_budget, each_max)
    for first in range(hi + 1):
        for rest in _compositions(parts - 1, total_budget - first, each_max):
            yield (first,) + rest


def _construct(h, asn, lens, used, max_locs, segs, val):
    heap = {}
    freed = set()
    anon = itertools.count(used)
    n_locs = used

    def fresh():
        nonlocal n_locs
        loc = next(anon)
        n_locs = max(n_locs, loc + 1)
        return loc

    def put(loc, cell):
        if not _is_loc(loc) or loc in heap or loc in freed:
            return False
        heap[loc] = cell
        return True

    lens = list(lens)
    seg_i = iter(lens)

    def next_len():
        return next(seg_i)

    for atom in h.spatial:
        if isinstance(atom, PointsTo):
            if not put(val(atom.src), {f: val(t) for f, t in atom.fields}):
                return None
        elif isinstance(atom, Freed):
            loc = val(atom.src)
            if not _is_loc(loc) or loc in heap or loc in freed:
                return None
            freed.add(loc)
        elif isinstance(atom, Ls):
            ln = next_len()
            if ln == 0:
                if val(atom.src) != val(atom.dst):
                    return None
                continue
            cur = val(atom.src)
            for i in range(ln):
                nxt = val(atom.dst) if i == ln - 1 else fresh()
                if not put(cur, {atom.next_field: nxt}):
                    return None
                cur = nxt
        elif isinstance(atom, Dls):
            ln = next_len()
            nf, pf = atom.next_field, atom.prev_field
            if ln == 0:
                if val(atom.first) != val(atom.next_link) or val(atom.last) != val(atom.prev_link):
                    return None
                continue
            cells = [val(atom.first)] + [fresh() for _ in range(ln - 2)] + \
                    ([val(atom.last)] if ln > 1 else [])
            if ln == 1 and val(atom.first) != val(atom.last):
                return None
            prev = val(atom.prev_link)
            for i, c in enumerate(cells):
                nxt = cells[i + 1] if i + 1 < len(cells) else val(atom.next_link)
                if not put(c, {nf: nxt, pf: prev}):
                    return None
                prev = c
        elif isinstance(atom, Nls):
            top, inner = next_len()
            if top == 0:
                if val(atom.src) != val(atom.dst):
                    return None
                continue
            tops = [val(atom.src)] + [fresh() for _ in range(top - 1)]
            for i, c in enumerate(tops):
                nxt = tops[i + 1] if i + 1 < len(tops) else val(atom.dst)
                w = val(atom.sink)
                chain = [fresh() for _ in range(inner[i])]
                for j, ic in enumerate(chain):
                    tgt = chain[j + 1] if j + 1 < len(chain) else val(atom.sink)
                    if not put(ic, {atom.inner_next_field: tgt}):
                        return None
                if chain:
                    w = chain[0]
                if not put(c, {atom.next_field: nxt, atom.nested_field: w}):
                    return None
    if n_locs > max_locs:
        return None
    stack = {v: asn[v] for v in h.free_vars()}
    return HeapModel(n_locs, stack, heap, frozenset(freed))


# ---------------------------------------------------------------------------
# Solver facade
# ---------------------------------------------------------------------------


class Solver:
    """Satisfiability and entailment with memoization.

    Stateless apart from caches; safe for concurrent use under the GIL.
    """

    def __init__(self, int_range: int = 5):
        self.k = int_range
        self._sat = {}
        self._entail = {}
        self._models = {}

    def _normalized(self, h: SymbolicHeap):
        try:
            return normalize(h)
        except Contradiction:
            return None

    def check_sat(self, h: SymbolicHeap):
        """First model within the computed bound, or None if unsatisfiable."""
        n = self._normalized(h)
        if n is None:
            return None
        if n in self._sat:
            return self._sat[n]
        bound = compute_bound(n).max_locations
        model = next(_iter_models(n, bound, self.k), None)
        self._sat[n] = model
        return model

    def is_sat(self, h: SymbolicHeap) -> bool:
        return self.check_sat(h) is not None

    def _lhs_models(self, n: SymbolicHeap, max_locs: int, extra_ints):
        key = (n, max_locs, extra_ints)
        if key not in self._models:
            self._models[key] = list(_iter_models(n, max_locs, self.k, extra_ints))
        return self._models[key]

    def entail_counter_model(self, lhs: SymbolicHeap, rhs: SymbolicHeap):
        """(valid, counter_model): counter_model is a model of lhs that
        refutes rhs, when the entailment does not hold."""
        ln = self._normalized(lhs)
        if ln is None:
            return True, None
        rn = self._normalized(rhs)
        if rn is None:
            m = self.check_sat(ln)
            return (m is None), m
        missing = rn.free_vars() - ln.free_vars()
        if missing:
            names = ", ".join(sorted(v.name for v in missing))
            raise ValueError(f"entailment rhs uses variables not free in lhs: {names}")
        combined = compute_bound(ln).max_locations + compute_bound(rn).max_locations
        extra = tuple(sorted(rn.ints()))
        for m in self._lhs_models(ln, combined, extra):
            if not satisfies(m, rn, self.k):
                return False, m
        return True, None

    def check_entail(self, lhs: SymbolicHeap, rhs: SymbolicHeap) -> bool:
        key = (self._normalized(lhs), self._normalized(rhs))
        if key not in self._entail:
            self._entail[key] = self.entail_counter_model(lhs, rhs)[0]
        return self._entail[key]


# ---------------------------------------------------------------------------
# Brute-force oracle
# ---------------------------------------------------------------------------

ORACLE_MAX_SIZE = 8


def _oracle_models(variables, sigs, max_size: int, k: int, ints):
    """Exhaustively enumerate models with at most max_size locations.

    The enumeration is exhaustive up to three quotients, each preserving
    `satisfies` for formulas over the given variables/signatures/integers:
      * locations are introduced in first-use order (canonical naming);
      * every location is referenced by the stack or a field, allocated,
        or freed (others are unobservable);
      * integer values are the given constants plus canonically-introduced
        fresh representatives from [-k, k].
    """
    sigs = sorted(set(sigs))
    ints = sorted(set(ints))
    palette = [i for i in range(-k, k + 1) if i not in ints]
    variables = sorted(variables, key=term_key)

    def value_opts(used, ints_used):
        opts = [NILV] + list(range(min(used + 1, max_size)))
        opts += [_enc_int(n) for n in ints]
        if ints_used < len(palette):
            opts.append(_enc_int(palette[ints_used]))
        return opts

    def bump(o, used, ints_used):
        if o == used:
            used += 1
        if isinstance(o, tuple) and o[1] in palette[ints_used:ints_used + 1]:
            ints_used += 1
        return used, ints_used

    stack = {}
    heap = {}
    freed = set()

    def assign_vars(i, used, ints_used):
        if i == len(variables):
            yield from fill_loc(0, used, ints_used)
            return
        v = variables[i]
        for o in value_opts(used, ints_used):
            stack[v] = o
            u2, iu2 = bump(o, used, ints_used)
            yield from assign_vars(i + 1, u2, iu2)
        del stack[v]

    def fill_loc(loc, used, ints_used):
        if loc == used:
            yield HeapModel(used, dict(stack), {l: dict(c) for l, c in heap.items()},
                            frozenset(freed))
            return
        # plain (referenced but neither allocated nor freed)
        yield from fill_loc(loc + 1, used, ints_used)
        # freed
        freed.add(loc)
        yield from fill_loc(loc + 1, used, ints_used)
        freed.discard(loc)
        # allocated, one signature at a time
        for sig in sigs:
            heap[loc] = {}
            yield from fill_fields(loc, sig, 0, used, ints_used)
            del heap[loc]

    def fill_fields(loc, sig, fi, used, ints_used):
        if fi == len(sig):
            yield from fill_loc(loc + 1, used, ints_used)
            return
        f = sig[fi]
        for o in value_opts(used, ints_used):
            heap[loc][f] = o
            u2, iu2 = bump(o, used, ints_used)
            yield from fill_fields(loc, sig, fi + 1, u2, iu2)
        del heap[loc][f]

    yield from assign_vars(0, 0, 0)


def oracle_check_sat(h: SymbolicHeap, max_size: int, k: int = 5):
    """Exhaustive satisfiability check; returns a model or None."""
    if max_size > ORACLE_MAX_SIZE:
        raise ValueError(f"oracle limited to {ORACLE_MAX_SIZE} locations")
    for m in _oracle_models(h.free_vars(), _sigs_of(h), max_size, k, h.ints()):
        if satisfies(m, h, k):
            return m
    return None


def oracle_check_entail(lhs: SymbolicHeap, rhs: SymbolicHeap, max_size: int, k: int = 5) -> bool:
    if max_size > ORACLE_MAX_SIZE:
        raise ValueError(f"oracle limited to {ORACLE_MAX_SIZE} locations")
    missing = rhs.free_vars() - lhs.free_vars()
    if missing:
        names = ", ".join(sorted(v.name for v in missing))
        raise ValueError(f"entailment rhs uses variables not free in lhs: {names}")
    sigs = _sigs_of(lhs) | _sigs_of(rhs)
    ints = lhs.ints() | rhs.ints()
    for m in _oracle_models(lhs.free_vars(), sigs, max_size, k, ints):
        if satisfies(m, lhs, k) and not satisfies(m, rhs, k):
            return False
    return True
