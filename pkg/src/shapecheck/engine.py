"""Forward abstract interpretation over the CFG.

Each function is analyzed by a worklist fixpoint: a set of symbolic heaps
per location, transfer functions over edge labels, join with entailment
pruning everywhere, and widening (predicate folding) at loop heads from
the second visit onward. Loop-head iteration beyond the configured
ceiling is a hard failure, not an UNKNOWN.

Calls are handled with summaries: the callee's footprint (the part of the
caller's heap reachable from the arguments) becomes the precondition,
expressed over immutable ghost parameters (`p@in`) so by-value parameter
reassignment inside the callee cannot leak back to the caller; the rest of
the heap is framed around the callee's postcondition. Summaries are cached
per (function, normalized precondition) and matched syntactically; a
mismatch merely triggers reanalysis.

Memory-safety incidents are collected as the interpretation runs:

  valid-deref    nil dereference, use after free, dereferencing a pointer
                 whose allocation cannot be established (possible only)
  valid-free     double free, free of nil, free of a pointer that may not
                 be allocated
  valid-memtrack a spatial part of the heap no program variable can reach

A definite incident on a state reached through a condition the integer
domain could not evaluate is downgraded to "possible", so it yields the
UNKNOWN verdict rather than FALSE.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, replace

from . import ast
from .ast import (
    CallRhs, CallStmt, Cond, DllKind, FieldLoadRhs, FieldStore, Free,
    FunDef, If, INT, IntAtom, IntConstRhs, IntOp, MallocRhs, NllKind,
    NondetRhs, NullAtom, NullRhs, PlainKind, Program, PtrType, Return,
    SllKind, VarAssign, VarAtom, VarRhs, While, classify_structs,
)
from .abstraction import FoldSpecs, widen_heap
from .cfg import AssumeLabel, AssumeNotLabel, CFG, StmtLabel, build_cfg
from .formula import (
    Contradiction, Dls, EMP, Eq, Freed, IntVal, Ls, NIL, Neq, Nls,
    PointsTo, SEGMENT_TYPES, SymbolicHeap, Var, alloc_count, atom_vars,
    fresh_existential, normalize, resolve_map, sorted_heaps, subst_atom,
    substitute,
)
from .solver import Solver

PROPERTIES = ("valid-deref", "valid-free", "valid-memtrack")

RET = Var("$ret")


def ghost(name: str) -> Var:
    """Immutable stand-in for a formal parameter's initial value."""
    return Var(f"{name}@in")


@dataclass
class AnalyzerConfig:
    int_range: int = 5
    length_limit: int = 2
    no_abstraction: bool = False
    loop_ceiling: int = 50


@dataclass(frozen=True)
class Verdict:
    property: str
    outcome: str  # TRUE | FALSE | UNKNOWN | ERROR
    trace: tuple = ()  # ((line, description), ...)
    message: str = ""


@dataclass(frozen=True)
class Summary:
    fname: str
    params: tuple  # formal names, in order
    pre: SymbolicHeap  # over ghost formals
    posts: tuple  # ((heap over ghosts + $ret, tainted), ...)


class AnalysisFailure(Exception):
    """Internal hard failure (e.g. no fixpoint within the ceiling)."""


class UnsupportedConstruct(Exception):
    """Analysis hit a construct outside the supported fragment."""

    def __init__(self, message, line=0):
        super().__init__(message)
        self.message = message
        self.line = line


@dataclass
class Incident:
    prop: str
    definite: bool
    line: int
    message: str
    trace: tuple


def fold_specs(kinds: dict) -> FoldSpecs:
    sll, dll, nll = set(), set(), set()
    for name, k in kinds.items():
        if isinstance(k, SllKind):
            sll.add(k.next)
        elif isinstance(k, DllKind):
            dll.add((k.next, k.prev))
        elif isinstance(k, NllKind):
            nll.add((k.next, k.nested, kinds[k.inner_struct].next))
    return FoldSpecs(tuple(sorted(sll)), tuple(sorted(dll)), tuple(sorted(nll)))


# ---------------------------------------------------------------------------
# Materialization
# ---------------------------------------------------------------------------


@dataclass
class Materialized:
    branches: list  # heaps in which the variable's cell is a points-to
    errors: list  # (definite: bool, message)


def _resolve(h: SymbolicHeap, x: Var):
    mapping, values = resolve_map(h)
    r = mapping.get(x, x)
    return r, values.get(r)


def materialize(h: SymbolicHeap, x: Var, solver: Solver, _depth=0) -> Materialized:
    """Case-split list predicates until x's cell is exposed as a points-to.

    Deref errors are definite when x is nil or freed (or provably nil on a
    reachable branch), possible when x's allocation status is unknown.
    """
    if _depth > len(h.spatial) + 2:
        return Materialized([], [(False, f"cannot expose the cell of {x.name}")])
    rep, _ = _resolve(h, x)
    if rep.is_nil:
        return Materialized([], [(True, f"{x.name} is nil")])
    for a in h.spatial:
        if isinstance(a, Freed) and a.src == rep:
            return Materialized([], [(True, f"{x.name} points to freed memory")])
        if isinstance(a, PointsTo) and a.src == rep:
            return Materialized([h], [])
    out = Materialized([], [])
    for i, a in enumerate(h.spatial):
        if isinstance(a, Ls) and a.src == rep:
            _split_ls(h, i, a, out, solver, _depth)
            return out
        if isinstance(a, Dls) and (a.first == rep or a.last == rep):
            _split_dls(h, i, a, out, solver, _depth, forward=a.first == rep)
            return out
        if isinstance(a, Nls) and a.src == rep:
            _split_nls(h, i, a, out, solver, _depth)
            return out
    return Materialized([], [(False, f"allocation of {x.name} cannot be established")])


def _without(h: SymbolicHeap, i: int, *new_atoms) -> SymbolicHeap:
    spatial = h.spatial[:i] + tuple(new_atoms) + h.spatial[i + 1:]
    return replace(h, spatial=spatial)


def _branch(out, h, exist=()):
    try:
        out.branches.append(normalize(h.with_existentials(*exist) if exist else h))
    except Contradiction:
        pass


def _empty_case(h, i, eqs, out, x, solver, depth):
    """The segment is empty: equate its ends, drop it, and retry."""
    try:
        h2 = normalize(_without(h, i).with_pure(*eqs))
    except Contradiction:
        return
    sub = materialize(h2, x, solver, depth + 1)
    out.branches.extend(sub.branches)
    out.errors.extend(sub.errors)


def _split_ls(h, i, a, out, solver, depth):
    if a.min == 0:
        _empty_case(h, i, [Eq(a.src, a.dst)], out, a.src, solver, depth)
    if a.min <= 1:
        _branch(out, _without(h, i, PointsTo(a.src, ((a.next_field, a.dst),))))
    y = fresh_existential("m")
    rest = Ls(max(a.min - 1, 0), y, a.dst, a.next_field)
    _branch(out, _without(h, i, PointsTo(a.src, ((a.next_field, y),)), rest), exist=[y])


def _split_dls(h, i, a, out, solver, depth, forward):
    nf, pf = a.next_field, a.prev_field
    anchor = a.first if forward else a.last
    if a.min == 0:
        _empty_case(h, i, [Eq(a.first, a.next_link), Eq(a.last, a.prev_link)],
                    out, anchor, solver, depth)
    if a.min <= 1:
        cell = PointsTo(anchor, ((nf, a.next_link), (pf, a.prev_link)))
        _branch(out, _without(h, i, cell).with_pure(Eq(a.first, a.last)))
    y = fresh_existential("m")
    m2 = max(a.min - 1, 0)
    if forward:
        cell = PointsTo(a.first, ((nf, y), (pf, a.prev_link)))
        rest = Dls(m2, y, a.last, a.first, a.next_link, nf, pf)
    else:
        cell = PointsTo(a.last, ((nf, a.next_link), (pf, y)))
        rest = Dls(m2, a.first, y, a.prev_link, a.last, nf, pf)
    _branch(out, _without(h, i, cell, rest), exist=[y])


def _split_nls(h, i, a, out, solver, depth):
    nf, nst, inf = a.next_field, a.nested_field, a.inner_next_field
    if a.min == 0:
        _empty_case(h, i, [Eq(a.src, a.dst)], out, a.src, solver, depth)
    if a.min <= 1:
        w = fresh_existential("w")
        cell = PointsTo(a.src, ((nf, a.dst), (nst, w)))
        _branch(out, _without(h, i, cell, Ls(0, w, a.sink, inf)), exist=[w])
    y, w = fresh_existential("m"), fresh_existential("w")
    cell = PointsTo(a.src, ((nf, y), (nst, w)))
    rest = Nls(max(a.min - 1, 0), y, a.dst, a.sink, nf, nst, inf)
    _branch(out, _without(h, i, cell, Ls(0, w, a.sink, inf), rest), exist=[y, w])


# ---------------------------------------------------------------------------
# Join and fixpoint detection
# ---------------------------------------------------------------------------


def _entails(solver: Solver, s: SymbolicHeap, t: SymbolicHeap) -> bool:
    """Entailment between program states: a variable t constrains but s
    does not mention is unconstrained in s, so the entailment cannot hold."""
    if not t.free_vars() <= s.free_vars():
        return False
    return solver.check_entail(s, t)


def join(current, incoming, solver: Solver):
    """Union, then drop any heap entailed by another retained heap.

    Candidate pairs respect the allocation-count heuristic: an entailment
    cannot hold when the right side requires more allocated cells than the
    left side provides.
    """
    pool = sorted_heaps(set(current) | set(incoming))
    removed = set()
    for s in sorted(pool, key=lambda h: (-alloc_count(h), h.sort_key())):
        acs = alloc_count(s)
        for t in sorted((t for t in pool if t is not s and t not in removed
                         and alloc_count(t) <= acs),
                        key=lambda t: (acs - alloc_count(t), t.sort_key())):
            if _entails(solver, s, t):
                removed.add(s)
                break
    return frozenset(h for h in pool if h not in removed)


def is_fixpoint(current, previous, solver: Solver) -> bool:
    """Every disjunct of the new loop-head state is entailed by some
    disjunct of the previous one."""
    prev = list(previous)
    for s in sorted_heaps(current):
        acs = alloc_count(s)
        if not any(_entails(solver, s, t)
                   for t in sorted((t for t in prev if alloc_count(t) <= acs),
                                   key=lambda t: (acs - alloc_count(t), t.sort_key()))):
            return False
    return True


# ---------------------------------------------------------------------------
# Summaries
# ---------------------------------------------------------------------------


def apply_summary_match(summary: Summary, arg_terms, h: SymbolicHeap):
    """Syntactic frame match of the summary against the (normalized) caller
    heap. Returns the frame's spatial atoms, or None.

    The matcher does not unfold predicates: a points-to in the heap never
    matches a segment in the precondition, so an inapplicable summary just
    triggers reanalysis of the callee.
    """
    inst = summary.pre
    try:
        for pname, t in zip(summary.params, arg_terms):
            g = ghost(pname)
            if g in inst.free_vars():
                inst = substitute(inst, g, t)
        inst = normalize(inst)
    except Contradiction:
        return None
    if not inst.pure <= h.pure:
        return None
    match = _match_atoms(list(inst.spatial), list(h.spatial), {}, inst.existentials)
    if match is None:
        return None
    used, _ = match
    return tuple(a for i, a in enumerate(h.spatial) if i not in used)


def _match_atoms(pre_atoms, h_atoms, asn, exist):
    """Backtracking sub-multiset matcher; returns (used indices, asn)."""
    if not pre_atoms:
        return set(), asn
    a, rest = pre_atoms[0], pre_atoms[1:]
    for i, b in enumerate(h_atoms):
        if b is None:
            continue
        asn2 = _match_atom(a, b, dict(asn), exist)
        if asn2 is None:
            continue
        saved, h_atoms[i] = h_atoms[i], None
        sub = _match_atoms([subst_atom(x, asn2) for x in rest], h_atoms, asn2, exist)
        h_atoms[i] = saved
        if sub is not None:
            used, final = sub
            return used | {i}, final
    return None


def _match_atom(a, b, asn, exist):
    from .formula import atom_terms
    if type(a) is not type(b):
        return None
    if isinstance(a, PointsTo) and a.field_names != b.field_names:
        return None
    if isinstance(a, Ls) and (a.min, a.next_field) != (b.min, b.next_field):
        return None
    if isinstance(a, Dls) and (a.min, a.next_field, a.prev_field) != \
            (b.min, b.next_field, b.prev_field):
        return None
    if isinstance(a, Nls) and (a.min, a.next_field, a.nested_field, a.inner_next_field) != \
            (b.min, b.next_field, b.nested_field, b.inner_next_field):
        return None
    for ta, tb in zip(atom_terms(a), atom_terms(b)):
        if isinstance(ta, Var):
            ta = asn.get(ta, ta)
        if isinstance(ta, Var) and ta in exist and ta not in asn:
            asn[ta] = tb
        elif ta != tb:
            return None
    return asn


# ---------------------------------------------------------------------------
# The analyzer
# ---------------------------------------------------------------------------


@dataclass
class _State:
    heap: SymbolicHeap
    tainted: bool
    sid: int


class Analyzer:
    def __init__(self, program: Program, config: AnalyzerConfig = None):
        self.program = program
        self.config = config or AnalyzerConfig()
        self.kinds = classify_structs(program)
        self.specs = fold_specs(self.kinds)
        self.solver = Solver(self.config.int_range)
        self.summaries = {}  # fname -> [Summary]
        self.incidents = []
        self.cfgs = {}
        self.analysis_runs = {}  # fname -> from-scratch analyses performed
        self.node_visits = 0
        self.call_stack = []
        self.state_parent = {}  # sid -> (parent sid, line, description)
        self.state_dumps = {}  # fname -> {location: [heap text]}
        self._sid = itertools.count()

    # ----- public entry point -----

    def analyze(self) -> list:
        """Analyze the entry function; returns one verdict per property."""
        try:
            self._check_recursion()
            entry = self.program.function(self.program.entry)
            self._analyze_function(entry, EMP, parent_sid=None)
        except UnsupportedConstruct as e:
            msg = f"unsupported construct: {e.message}"
            return [Verdict(p, "ERROR", message=msg) for p in PROPERTIES]
        return self._verdicts()

    def _verdicts(self):
        out = []
        for prop in PROPERTIES:
            mine = [i for i in self.incidents if i.prop == prop]
            definite = [i for i in mine if i.definite]
            if definite:
                first = definite[0]
                out.append(Verdict(prop, "FALSE", trace=first.trace, message=first.message))
            elif mine:
                out.append(Verdict(prop, "UNKNOWN", message=mine[0].message))
            else:
                out.append(Verdict(prop, "TRUE"))
        return out

    def _check_recursion(self):
        calls = {}
        for f in self.program.functions:
            out = set()

            def scan(stmts):
                for s in stmts:
                    if isinstance(s, CallStmt):
                        out.add(s.fn)
                    elif isinstance(s, (VarAssign, FieldStore)) and isinstance(s.rhs, CallRhs):
                        out.add(s.rhs.fn)
                    elif isinstance(s, If):
                        scan(s.then)
                        scan(s.els)
                    elif isinstance(s, While):
                        scan(s.body)

            scan(f.body)
            calls[f.name] = out
        color = {}

        def dfs(n):
            color[n] = 1
            for m in sorted(calls.get(n, ())):
                if color.get(m) == 1:
                    raise UnsupportedConstruct(f"recursion involving {m!r}")
                if m not in color:
                    dfs(m)
            color[n] = 2

        for f in self.program.functions:
            if f.name not in color:
                dfs(f.name)

    # ----- bookkeeping -----

    def _new_state(self, heap, tainted, parent_sid, line, desc) -> _State:
        sid = next(self._sid)
        self.state_parent[sid] = (parent_sid, line, desc)
        return _State(heap, tainted, sid)

    def _trace(self, sid, line, desc):
        steps = [(line, desc)]
        cur = sid
        while cur is not None:
            parent, ln, d = self.state_parent[cur]
            if ln:
                steps.append((ln, d))
            cur = parent
        steps.reverse()
        return tuple(s for i, s in enumerate(steps) if i == 0 or steps[i - 1] != s)

    def _report(self, prop, definite, state: _State, line, message):
        definite = definite and not state.tainted
        self.incidents.append(Incident(prop, definite, line, message,
                                       self._trace(state.sid, line, message)))

    # ----- function-level fixpoint -----

    def _analyze_function(self, f: FunDef, pre: SymbolicHeap, parent_sid) -> Summary:
        for s in self.summaries.get(f.name, []):
            if s.pre == pre:
                return s
        if f.name in self.call_stack:
            raise UnsupportedConstruct(f"recursion involving {f.name!r}")
        self.call_stack.append(f.name)
        try:
            summary = self._run_analysis(f, pre, parent_sid)
        finally:
            self.call_stack.pop()
        self.summaries.setdefault(f.name, []).append(summary)
        return summary

    def _run_analysis(self, f: FunDef, pre: SymbolicHeap, parent_sid) -> Summary:
        self.analysis_runs[f.name] = self.analysis_runs.get(f.name, 0) + 1
        cfg = self.cfgs.get(f.name)
        if cfg is None:
            cfg = self.cfgs[f.name] = build_cfg(f)

        entry_heap = normalize(pre)
        entry_state = self._new_state(entry_heap, False, parent_sid, f.line, f"enter {f.name}")
        store = {cfg.entry: {entry_heap: entry_state}}
        processed = {}
        iter_count = {}
        work = deque([cfg.entry])
        queued = {cfg.entry}

        while work:
            node = work.popleft()
            queued.discard(node)
            self.node_visits += 1
            todo = []
            for h, st in sorted(store.get(node, {}).items(), key=lambda p: p[0].sort_key()):
                key = (h, st.tainted)
                if key not in processed.setdefault(node, set()):
                    processed[node].add(key)
                    todo.append(st)
            if not todo:
                continue
            for _, label, dst in sorted(cfg.out_edges(node), key=lambda e: (e[2], str(e[1]))):
                results = []
                for st in todo:
                    results.extend(self._transfer(f, label, st))
                if results and self._flow_into(f, cfg, dst, results, store, iter_count):
                    if dst not in queued:
                        work.append(dst)
                        queued.add(dst)

        self.state_dumps[f.name] = {
            loc: [h.sort_key() for h in sorted_heaps(states)]
            for loc, states in sorted(store.items())}
        posts = self._exit_states(f, cfg, store)
        return Summary(f.name, tuple(n for n, _ in f.params), pre, posts)

    def _flow_into(self, f, cfg, dst, results, store, iter_count) -> bool:
        """Join new states into dst's store; returns True when dst changed."""
        cur = store.setdefault(dst, {})
        origin = dict(cur)
        incoming = {}
        for st in results:
            old = incoming.get(st.heap)
            if old is None or (old.tainted and not st.tainted):
                incoming[st.heap] = st
        for h, st in incoming.items():
            if h not in origin or (origin[h].tainted and not st.tainted):
                origin[h] = st

        existing = frozenset(cur.keys())
        joined = join(existing, incoming.keys(), self.solver)

        if dst in cfg.loop_heads:
            n = iter_count[dst] = iter_count.get(dst, 0) + 1
            if n > self.config.loop_ceiling:
                raise AnalysisFailure(
                    f"no fixpoint at a loop head of {f.name!r} within "
                    f"{self.config.loop_ceiling} iterations")
            if not self.config.no_abstraction and n >= 2:
                widened = {}
                for h in sorted_heaps(joined):
                    w = widen_heap(h, self._scope(f), self.solver, self.specs)
                    src = origin[h]
                    if w not in widened or (widened[w].tainted and not src.tainted):
                        widened[w] = (src if w == h else
                                      self._new_state(w, src.tainted, src.sid, 0, "widen"))
                joined = join(frozenset(), widened.keys(), self.solver)
                origin.update(widened)
            if existing and is_fixpoint(joined, existing, self.solver):
                return False

        if joined == existing:
            changed = False
            for h, st in incoming.items():
                old = cur.get(h)
                if old is not None and old.tainted and not st.tainted:
                    cur[h] = _State(h, False, old.sid)
                    changed = True
            return changed

        store[dst] = {h: origin[h] for h in joined}
        return True

    def _scope(self, f: FunDef) -> set:
        scope = {Var(n) for n, _ in f.params + f.locals}
        scope |= {ghost(n) for n, _ in f.params}
        scope.add(RET)
        return scope

    def _exit_states(self, f: FunDef, cfg: CFG, store):
        """Quantify locals and mutable formals away, keeping ghosts and the
        return value; cells that thereby become unreachable are leaks."""
        posts = {}
        for h, st in sorted(store.get(cfg.exit, {}).items(), key=lambda p: p[0].sort_key()):
            out = h
            for name, _ in f.params + f.locals:
                out = substitute(out, Var(name), fresh_existential(name))
            try:
                out = normalize(out)
            except Contradiction:
                continue
            keep = {ghost(n) for n, _ in f.params} | {RET, NIL}
            out = self._leak_check(out, keep, st, f.line, where=f"return from {f.name}")
            out = normalize(out)
            posts[out] = posts.get(out, True) and st.tainted
        return tuple(sorted(posts.items(), key=lambda p: p[0].sort_key()))

    # ----- leaks -----

    def _reachable(self, h: SymbolicHeap, roots):
        mapping, _ = resolve_map(h)
        reach = set(roots) | {mapping.get(v, v) for v in roots}
        changed = True
        while changed:
            changed = False
            for a in h.spatial:
                outs = ()
                if isinstance(a, PointsTo) and a.src in reach:
                    outs = [t for _, t in a.fields]
                elif isinstance(a, Ls) and a.src in reach:
                    outs = [a.dst]
                elif isinstance(a, Dls) and (a.first in reach or a.last in reach):
                    outs = [a.first, a.last, a.prev_link, a.next_link]
                elif isinstance(a, Nls) and a.src in reach:
                    outs = [a.dst, a.sink]
                for t in outs:
                    if isinstance(t, Var) and t not in reach:
                        reach.add(t)
                        changed = True
        return reach

    def _leak_check(self, h: SymbolicHeap, roots, state, line, where="") -> SymbolicHeap:
        reach = self._reachable(h, roots)
        kept, leaked = [], []
        for a in h.spatial:
            if isinstance(a, Freed) or _anchored(a, reach):
                kept.append(a)  # freed cells are never leaks
            else:
                leaked.append(a)
        if not leaked:
            return h
        for a in leaked:
            self._report("valid-memtrack", _min_cells(a) >= 1, state, line,
                         f"memory unreachable from program variables ({where or 'leak'})")
        return replace(h, spatial=tuple(kept))

    # ----- transfer functions -----

    def _transfer(self, f: FunDef, label, st: _State):
        if isinstance(label, (AssumeLabel, AssumeNotLabel)):
            cond = label.cond if isinstance(label, AssumeLabel) else label.negated
            return self._assume(f, cond, st, label.line)
        stmt = label.stmt
        results = self._stmt(f, stmt, st)
        out = []
        for h, taint_added, desc in results:
            try:
                h = normalize(h)
            except Contradiction:
                continue
            ns = self._new_state(h, st.tainted or taint_added, st.sid, stmt.line, desc)
            h2 = self._leak_check(h, self._live_roots(f), ns, stmt.line)
            if h2 is not h:
                ns = _State(normalize(h2), ns.tainted, ns.sid)
            out.append(ns)
        return out

    def _live_roots(self, f: FunDef) -> set:
        roots = {Var(n) for n, _ in f.params + f.locals}
        roots |= {ghost(n) for n, _ in f.params}
        roots.add(RET)
        roots.add(NIL)
        return roots

    def _stmt(self, f, stmt, st: _State):
        """Returns [(heap, taint_added, description)]."""
        if isinstance(stmt, VarAssign):
            x = Var(stmt.target)
            return [(self._strong_update(h, x, value), taint, f"{stmt.target} = {stmt.rhs}")
                    for h, value, taint in self._rhs_value(f, stmt.rhs, st, stmt.line)]
        if isinstance(stmt, FieldStore):
            return self._field_store(f, stmt, st)
        if isinstance(stmt, Free):
            return self._free(f, stmt, st)
        if isinstance(stmt, IntOp):
            return self._int_op(f, stmt, st)
        if isinstance(stmt, Return):
            if stmt.value is None:
                return [(st.heap, False, "return")]
            term = self._atom_term(stmt.value)
            return [(self._strong_update(st.heap, RET, term), False, f"return {stmt.value}")]
        if isinstance(stmt, CallStmt):
            return [(h, taint, f"{stmt.fn}(...)")
                    for h, _, taint in self._call_value(f, stmt.fn, stmt.args, st, stmt.line)]
        raise TypeError(f"cannot transfer {stmt!r}")

    def _atom_term(self, a):
        if isinstance(a, NullAtom):
            return NIL
        if isinstance(a, IntAtom):
            return a.value
        return Var(a.name)

    def _strong_update(self, h: SymbolicHeap, x: Var, value) -> SymbolicHeap:
        """x := value, with the old binding of x renamed out of the way."""
        old = fresh_existential(x.name)
        h2 = substitute(h, x, old)
        if value is None:
            return h2  # unconstrained
        if value == x:
            value = old
        if isinstance(value, int):
            if abs(value) <= self.config.int_range:
                return h2.with_pure(IntVal(x, value))
            return h2  # outside the tracked range
        return h2.with_pure(Eq(x, value))

    def _rhs_value(self, f, rhs, st: _State, line):
        """Evaluate a right-hand side; returns [(heap, value term, taint)]."""
        h = st.heap
        if isinstance(rhs, NullRhs):
            return [(h, NIL, False)]
        if isinstance(rhs, VarRhs):
            return [(h, Var(rhs.name), False)]
        if isinstance(rhs, IntConstRhs):
            return [(h, rhs.value, False)]
        if isinstance(rhs, NondetRhs):
            return [(h, None, False)]
        if isinstance(rhs, MallocRhs):
            return [self._malloc(h, rhs.struct)]
        if isinstance(rhs, FieldLoadRhs):
            out = []
            for h2 in self._materialized(f, rhs.var, st, line, f"read {rhs.var}->{rhs.field}"):
                rep, _ = _resolve(h2, Var(rhs.var))
                cell = next(a for a in h2.spatial
                            if isinstance(a, PointsTo) and a.src == rep)
                out.append((h2, cell.field_map[rhs.field], False))
            return out
        if isinstance(rhs, CallRhs):
            return self._call_value(f, rhs.fn, rhs.args, st, line)
        raise TypeError(f"cannot evaluate {rhs!r}")

    def _malloc(self, h: SymbolicHeap, struct_name):
        s = self.program.struct(struct_name)
        cell = fresh_existential("c")
        fields = tuple((fname, fresh_existential(fname)) for fname, _ in s.fields)
        pure = [Neq(cell, NIL)]
        for a in h.spatial:
            if isinstance(a, (PointsTo, Freed)):
                pure.append(Neq(cell, a.src))
            elif isinstance(a, Ls) and a.min >= 1:
                pure.append(Neq(cell, a.src))
            elif isinstance(a, Dls) and a.min >= 1:
                pure.extend([Neq(cell, a.first), Neq(cell, a.last)])
            elif isinstance(a, Nls) and a.min >= 1:
                pure.append(Neq(cell, a.src))
        h2 = (h.with_spatial(PointsTo(cell, fields))
              .with_pure(*pure)
              .with_existentials(cell, *(v for _, v in fields)))
        return (h2, cell, False)

    def _materialized(self, f, varname, st: _State, line, what):
        """Expose varname's cell, reporting deref incidents. Also enforces
        the unsupported rule for structs with 3+ self-referential fields."""
        t = f.var_type(varname)
        if isinstance(t, PtrType):
            kind = self.kinds.get(t.struct)
            if isinstance(kind, PlainKind) and kind.self_refs >= 3:
                raise UnsupportedConstruct(
                    f"dereference of struct {t.struct!r} with {kind.self_refs} "
                    "self-referential fields", line)
        m = materialize(st.heap, Var(varname), self.solver)
        for definite, msg in m.errors:
            self._report("valid-deref", definite, st, line,
                         f"invalid dereference: {msg} ({what})")
        return m.branches

    def _field_store(self, f, stmt: FieldStore, st: _State):
        out = []
        for h, value, taint in self._rhs_value(f, stmt.rhs, st, stmt.line):
            if value is None:
                value = fresh_existential("nd")
                h = h.with_existentials(value)
            st2 = _State(h, st.tainted or taint, st.sid)
            for h2 in self._materialized(f, stmt.target, st2, stmt.line,
                                         f"write {stmt.target}->{stmt.field}"):
                rep, _ = _resolve(h2, Var(stmt.target))
                spatial = list(h2.spatial)
                for i, a in enumerate(spatial):
                    if isinstance(a, PointsTo) and a.src == rep:
                        spatial[i] = PointsTo(a.src, tuple(
                            (fn, value if fn == stmt.field else fv) for fn, fv in a.fields))
                        break
                out.append((replace(h2, spatial=tuple(spatial)), taint,
                            f"{stmt.target}->{stmt.field} = {stmt.rhs}"))
        return out

    def _free(self, f, stmt: Free, st: _State):
        x = Var(stmt.var)
        rep, _ = _resolve(st.heap, x)
        if rep.is_nil:
            self._report("valid-free", True, st, stmt.line, f"free of nil pointer {stmt.var!r}")
            return []
        for a in st.heap.spatial:
            if isinstance(a, Freed) and a.src == rep:
                self._report("valid-free", True, st, stmt.line, f"double free of {stmt.var!r}")
                return []
        m = materialize(st.heap, x, self.solver)
        for definite, msg in m.errors:
            self._report("valid-free", definite, st, stmt.line, f"invalid free: {msg}")
        out = []
        for h2 in m.branches:
            rep2, _ = _resolve(h2, x)
            spatial = list(h2.spatial)
            for i, a in enumerate(spatial):
                if isinstance(a, PointsTo) and a.src == rep2:
                    spatial[i] = Freed(rep2)
                    break
            out.append((replace(h2, spatial=tuple(spatial)), False, f"free({stmt.var})"))
        return out

    def _int_value(self, h: SymbolicHeap, term):
        """Exact integer value of a term under h, or None."""
        if isinstance(term, int):
            return term
        _, val = _resolve(h, term)
        return val

    def _int_op(self, f, stmt: IntOp, st: _State):
        h = st.heap
        a = self._int_value(h, self._atom_term(stmt.a))
        b = self._int_value(h, self._atom_term(stmt.b))
        x = Var(stmt.target)
        desc = f"{stmt.target} = {stmt.a} {stmt.op} {stmt.b}"
        if a is None or b is None:
            return [(self._strong_update(h, x, None), False, desc)]
        r = a + b if stmt.op == "+" else a - b
        if abs(r) > self.config.int_range:
            return [(self._strong_update(h, x, None), False, desc)]
        return [(self._strong_update(h, x, r), False, desc)]

    # ----- conditions -----

    def _assume(self, f, cond: Cond, st: _State, line):
        if cond.op == "nondet":
            return [st]
        h = st.heap
        ta, tb = self._atom_term(cond.a), self._atom_term(cond.b)
        is_int = (isinstance(ta, int) or isinstance(tb, int)
                  or (isinstance(cond.a, VarAtom) and f.var_type(cond.a.name) == INT)
                  or (isinstance(cond.b, VarAtom) and f.var_type(cond.b.name) == INT))
        if cond.op in ("<", "<=") or is_int:
            va, vb = self._int_value(h, ta), self._int_value(h, tb)
            if va is None or vb is None:
                # unevaluable: keep the branch without the constraint,
                # marking every later finding as a possible one
                return [self._new_state(h, True, st.sid, line, f"assume({cond}) [imprecise]")]
            holds = {"==": va == vb, "!=": va != vb, "<": va < vb, "<=": va <= vb}[cond.op]
            if not holds:
                return []
            return [self._new_state(h, st.tainted, st.sid, line, f"assume({cond})")]
        atom = Eq(ta, tb) if cond.op == "==" else Neq(ta, tb)
        try:
            h2 = normalize(h.with_pure(atom))
        except Contradiction:
            return []
        if not self.solver.is_sat(h2):
            return []
        return [self._new_state(h2, st.tainted, st.sid, line, f"assume({cond})")]

    # ----- calls -----

    def _call_value(self, f, fname, args, st: _State, line):
        """Apply or compute a summary; returns [(heap, ret term, taint)]."""
        callee = self.program.function(fname)
        arg_terms = [self._atom_term(a) for a in args]
        summary = None
        frame = None
        for s in self.summaries.get(fname, []):
            frame = apply_summary_match(s, arg_terms, st.heap)
            if frame is not None:
                summary = s
                break
        if summary is None:
            pre = self._footprint_pre(callee, arg_terms, st.heap)
            summary = self._analyze_function(callee, pre, parent_sid=st.sid)
            frame = apply_summary_match(summary, arg_terms, st.heap)
            if frame is None:
                raise AnalysisFailure(
                    f"summary for {fname!r} does not match its own footprint")
        out = []
        for post, post_taint in summary.posts:
            inst, ret = self._instantiate_post(summary, post, arg_terms, st.heap, frame)
            try:
                inst = normalize(inst)
            except Contradiction:
                continue
            out.append((inst, ret, post_taint))
        return out

    def _footprint_pre(self, callee: FunDef, arg_terms, h: SymbolicHeap) -> SymbolicHeap:
        """The part of h the callee can reach, expressed over ghost formals."""
        roots = {t for t in arg_terms if isinstance(t, Var) and not t.is_nil}
        reach = self._reachable(h, roots)
        foot = [a for a in h.spatial
                if _anchored(a, reach) or (isinstance(a, Freed) and a.src in reach)]
        foot_vars = set(roots)
        for a in foot:
            foot_vars |= atom_vars(a)
        pure = [a for a in h.pure if atom_vars(a) <= foot_vars | {NIL}]
        exist = {v for v in foot_vars if v.is_existential}
        pre = SymbolicHeap(frozenset(exist), frozenset(pure), tuple(foot))

        sub = {}
        eqs = []
        for (pname, _), t in zip(callee.params, arg_terms):
            g = ghost(pname)
            if isinstance(t, Var) and not t.is_nil:
                if t in sub:
                    eqs.append(Eq(g, sub[t]))
                else:
                    sub[t] = g
            elif isinstance(t, int):
                if abs(t) <= self.config.int_range:
                    eqs.append(IntVal(g, t))
            else:
                eqs.append(Eq(g, NIL))
        for v, g in sub.items():
            pre = substitute(pre, v, g)
        # caller variables that remain are outside the callee's scope
        for v in sorted(pre.free_vars(), key=lambda v: v.name):
            if not v.name.endswith("@in"):
                pre = substitute(pre, v, fresh_existential(v.name))
        return normalize(pre.with_pure(*eqs))

    def _instantiate_post(self, summary: Summary, post: SymbolicHeap, arg_terms,
                          h: SymbolicHeap, frame):
        ren = {v: fresh_existential("p") for v in post.existentials}
        inst = SymbolicHeap(
            frozenset(ren.values()),
            frozenset(x for x in (subst_atom(a, ren) for a in post.pure) if x is not None),
            tuple(subst_atom(a, ren) for a in post.spatial))
        for pname, t in zip(summary.params, arg_terms):
            g = ghost(pname)
            if g in inst.free_vars():
                inst = substitute(inst, g, t)
        ret = fresh_existential("ret")
        if RET in inst.free_vars():
            inst = substitute(inst, RET, ret)
        combined = SymbolicHeap(inst.existentials | h.existentials | {ret},
                                inst.pure | h.pure,
                                frame + inst.spatial)
        return combined, ret


def _anchored(a, reach) -> bool:
    if isinstance(a, PointsTo):
        return a.src in reach
    if isinstance(a, Ls):
        return a.src in reach
    if isinstance(a, Dls):
        return a.first in reach or a.last in reach
    if isinstance(a, Nls):
        return a.src in reach
    return False  # Freed: decided by callers


def _min_cells(a) -> int:
    if isinstance(a, PointsTo):
        return 1
    if isinstance(a, SEGMENT_TYPES):
        return a.min
    return 0


def analyze_program(program: Program, config: AnalyzerConfig = None):
    """Run the analysis; returns (verdicts, analyzer)."""
    analyzer = Analyzer(program, config)
    verdicts = analyzer.analyze()
    return verdicts, analyzer
