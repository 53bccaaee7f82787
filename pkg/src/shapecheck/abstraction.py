"""Widening by folding adjacent spatial atoms into list predicates.

A fold joins two link-compatible atoms A (ending at y) and B (starting at
y) into one segment predicate, provided the joint y is an existential that
no other atom or program variable refers to, and the solver can discharge
the acyclicity premise (the fold's source differs from its end link in
every model). Tracked minimum lengths add up and saturate at the
configured limit.

Folding which shapes to attempt is driven by FoldSpecs derived from the
struct classification: a points-to atom participates in SLL folding only
when its record is exactly the SLL link field, in DLL folding only for a
next/prev record, and so on. Field names that never classified as a list
shape are never folded.

`widen` applies folds to every disjunct until none applies, additionally
discarding freed cells that nothing references any longer (a sound
weakening; such cells can never be freed or dereferenced again).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .formula import (
    Dls, Eq, Freed, IntVal, Ls, Nls, PointsTo, StateSet, SymbolicHeap, Var,
    atom_terms, atom_vars, normalize, state_set,
)

LENGTH_LIMIT = 2


@dataclass(frozen=True)
class FoldSpecs:
    """Link-field shapes eligible for folding, from struct classification."""
    sll: tuple = ("next",)
    dll: tuple = (("next", "prev"),)
    nll: tuple = (("next", "inner", "next"),)


DEFAULT_SPECS = FoldSpecs()


def _occurrences(h: SymbolicHeap, v: Var) -> int:
    n = 0
    for a in itertools.chain(h.pure, h.spatial):
        n += sum(1 for t in atom_terms(a) if t == v)
    return n


def _spatial_occurrences(h: SymbolicHeap, v: Var) -> int:
    return sum(sum(1 for t in atom_terms(a) if t == v) for a in h.spatial)


def _foldable_var(h: SymbolicHeap, y, scope) -> bool:
    if not (isinstance(y, Var) and y.is_existential and y not in scope):
        return False
    return not any(isinstance(a, IntVal) and a.var == y for a in h.pure)


def _joint_ok(h: SymbolicHeap, y, scope) -> bool:
    """The joint cell may be folded away when nothing else points to it:
    no other spatial atom links to it and no program variable names it.
    Pure disequalities (e.g. separation facts recorded by allocation) do
    not block folding; they are dropped with the variable's scope."""
    return _foldable_var(h, y, scope) and _spatial_occurrences(h, y) == 2


def _acyclic(h: SymbolicHeap, solver, x: Var, z: Var) -> bool:
    """True iff h entails x != z (i.e. h with x = z is unsatisfiable)."""
    if x == z:
        return False
    return not solver.is_sat(h.with_pure(Eq(x, z)))


def _rebuild(h: SymbolicHeap, remove_idx, new_atom) -> SymbolicHeap:
    # normalize prunes binders the fold no longer mentions (the joint,
    # consumed inner-chain links)
    spatial = [a for i, a in enumerate(h.spatial) if i not in remove_idx]
    spatial.insert(min(remove_idx), new_atom)
    return normalize(SymbolicHeap(h.existentials, h.pure, tuple(spatial)))


def _cap(m: int) -> int:
    return min(LENGTH_LIMIT, m)


def try_fold_sll(h: SymbolicHeap, scope, solver, specs: FoldSpecs = DEFAULT_SPECS):
    """Fold one eligible pair into an Ls atom; None when no pair qualifies."""
    for nf in specs.sll:
        units = []
        for i, a in enumerate(h.spatial):
            if isinstance(a, PointsTo) and a.field_names == {nf}:
                units.append((i, a.src, a.field_map[nf], 1))
            elif isinstance(a, Ls) and a.next_field == nf:
                units.append((i, a.src, a.dst, a.min))
        for (i, x, y, ma), (j, y2, z, mb) in itertools.permutations(units, 2):
            if y != y2 or not _joint_ok(h, y, scope):
                continue
            if not isinstance(z, Var) or not _acyclic(h, solver, x, z):
                continue
            return _rebuild(h, {i, j}, Ls(_cap(ma + mb), x, z, nf))
    return None


def try_fold_dll(h: SymbolicHeap, scope, solver, specs: FoldSpecs = DEFAULT_SPECS):
    """Fold one DLL-compatible pair, requiring prev consistency at the joint.

    A points-to unit keeps its cell variable in the folded segment (as the
    first or last cell), so back-references to it stay expressible; only a
    segment unit's inner endpoint vanishes and must be unreferenced.
    """
    for nf, pf in specs.dll:
        units = []
        for i, a in enumerate(h.spatial):
            if isinstance(a, PointsTo) and a.field_names == {nf, pf}:
                fm = a.field_map
                units.append((i, a.src, a.src, fm[pf], fm[nf], 1, True))
            elif isinstance(a, Dls) and (a.next_field, a.prev_field) == (nf, pf):
                units.append((i, a.first, a.last, a.prev_link, a.next_link, a.min, False))
        for (i, f1, l1, p1, n1, ma, pt_a), (j, f2, l2, p2, n2, mb, pt_b) in \
                itertools.permutations(units, 2):
            if n1 != f2 or not _foldable_var(h, n1, scope):
                continue
            if p2 != l1:  # prev of B's first cell must point back at A's last
                continue
            if not pt_b and _spatial_occurrences(h, f2) != 2:
                continue  # B's first cell vanishes
            if not pt_a and _spatial_occurrences(h, l1) != 2:
                continue  # A's last cell vanishes
            if not isinstance(n2, Var) or not _acyclic(h, solver, f1, n2):
                continue
            return _rebuild(h, {i, j}, Dls(_cap(ma + mb), f1, l2, p1, n2, nf, pf))
    return None


def _nll_units(h: SymbolicHeap, scope, nf, nst, inf):
    """Top-level NLL building blocks: (indices, src, next, min, sink)."""
    units = []
    for i, a in enumerate(h.spatial):
        if isinstance(a, Nls) and (a.next_field, a.nested_field, a.inner_next_field) == (nf, nst, inf):
            units.append(((i,), a.src, a.dst, a.min, a.sink))
        elif isinstance(a, PointsTo) and a.field_names == {nf, nst}:
            w = a.field_map[nst]
            chain = _inner_chain(h, w, inf, scope, skip={i})
            if chain is not None:
                idxs, sink = chain
                units.append(((i,) + idxs, a.src, a.field_map[nf], 1, sink))
    return units


def _inner_chain(h: SymbolicHeap, w, inf, scope, skip):
    """Follow {inf}-linked atoms from w; returns (consumed indices, sink).

    Every chain variable before the sink loses its name in the fold, so it
    must be an existential referenced only by its two adjacent positions.
    When w heads no atom the chain is empty and w itself is the sink.
    """
    idxs = []
    cur = w
    for _ in range(len(h.spatial) + 1):
        if not isinstance(cur, Var):
            return None
        hop = None
        for i, a in enumerate(h.spatial):
            if i in skip or i in idxs:
                continue
            if isinstance(a, PointsTo) and a.field_names == {inf} and a.src == cur:
                hop = (i, a.field_map[inf])
                break
            if isinstance(a, Ls) and a.next_field == inf and a.src == cur:
                hop = (i, a.dst)
                break
        if hop is None:
            return (tuple(idxs), cur)  # cur is the sink
        if not _joint_ok(h, cur, scope):
            return None
        idxs.append(hop[0])
        cur = hop[1]
    return None


def try_fold_nll(h: SymbolicHeap, scope, solver, specs: FoldSpecs = DEFAULT_SPECS):
    """Fold one pair of NLL-compatible blocks sharing a nested sink."""
    for nf, nst, inf in specs.nll:
        units = _nll_units(h, scope, nf, nst, inf)
        for (ia, xa, ya, ma, sa), (ib, xb, yb, mb, sb) in itertools.permutations(units, 2):
            if set(ia) & set(ib):
                continue
            if ya != xb or not _joint_ok(h, ya, scope):
                continue
            if sa != sb:  # inner lists must share one sink
                continue
            if not isinstance(yb, Var) or not _acyclic(h, solver, xa, yb):
                continue
            return _rebuild(h, set(ia) | set(ib), Nls(_cap(ma + mb), xa, yb, sa, nf, nst, inf))
    return None


def drop_dead_existential_pure(h: SymbolicHeap):
    """Remove pure atoms that only constrain existentials with no spatial
    occurrence; None if unchanged.

    A sound weakening (more models), used during widening so separation
    facts about folded-away cells do not pile up across loop iterations.
    """
    dead = {v for v in h.existentials if _spatial_occurrences(h, v) == 0}
    if not dead:
        return None
    doomed = {a for a in h.pure if atom_vars(a) & dead}
    if not doomed:
        return None
    return normalize(SymbolicHeap(h.existentials, h.pure - doomed, h.spatial))


def drop_unreferenced_freed(h: SymbolicHeap):
    """Remove Freed atoms whose cell nothing references; None if unchanged.

    Sound weakening: an unreferenced freed cell can never be freed again or
    dereferenced, so forgetting it preserves every verdict.
    """
    for i, a in enumerate(h.spatial):
        if isinstance(a, Freed) and a.src.is_existential and _occurrences(h, a.src) == 1:
            spatial = h.spatial[:i] + h.spatial[i + 1:]
            return normalize(SymbolicHeap(h.existentials - {a.src}, h.pure, spatial))
    return None


FOLDS = (try_fold_sll, try_fold_dll, try_fold_nll)


def widen_heap(h: SymbolicHeap, scope, solver, specs: FoldSpecs = DEFAULT_SPECS) -> SymbolicHeap:
    h = normalize(h)
    while True:
        for step in FOLDS + (drop_unreferenced_freed, drop_dead_existential_pure):
            h2 = step(h, scope, solver, specs) if step in FOLDS else step(h)
            if h2 is not None:
                break
        else:
            return h
        h = h2


def widen(s: StateSet, scope, solver, specs: FoldSpecs = DEFAULT_SPECS) -> StateSet:
    """Fold every member to a fixpoint, then deduplicate."""
    return state_set(widen_heap(h, scope, solver, specs) for h in s)
