"""Textual syntax for symbolic heaps.

    formula   = [ "E" IDENT+ "." ] atom { ("&" | "*") atom }
    atom      = "emp"
              | term "=" term | term "!=" term
              | IDENT "->" "(" IDENT ":" term { "," IDENT ":" term } ")"
              | "ls"  [fields] "(" INT "+" ";" term "," term ")"
              | "dls" [fields] "(" INT "+" ";" term "," term "," term "," term ")"
              | "nls" [fields] "(" INT "+" ";" term "," term "," term ")"
              | "freed" "(" term ")"
    fields    = "[" IDENT { "," IDENT } "]"
    term      = "nil" | IDENT | INT

"&" and "*" are interchangeable separators; by convention "&" joins pure
atoms and "*" spatial ones. Variables listed after "E" are existential,
all others are program variables. An equality between a variable and an
integer constant is an exact-value constraint. Segment predicates take
their linking field names in brackets when they differ from the defaults
(ls: next; dls: next, prev; nls: next, inner, next).

Entailment queries are written  lhs |- rhs  on a single input.
"""

from __future__ import annotations

import re

from .formula import (
    EXISTENTIAL, NIL, Dls, Eq, Freed, IntVal, Ls, Neq, Nls, PointsTo,
    SymbolicHeap, Var, term_key, _natural,
)


class FormulaParseError(ValueError):
    pass


_TOKEN = re.compile(r"""
    (?P<ws>\s+|//[^\n]*)
  | (?P<entail>\|-)
  | (?P<arrow>->)
  | (?P<neq>!=)
  | (?P<eq>==?)
  | (?P<int>-?\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[().,:;&*+\[\]])
""", re.VERBOSE)


def _tokenize(text: str):
    out, pos = [], 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise FormulaParseError(f"unexpected character {text[pos]!r} at offset {pos}")
        pos = m.end()
        if m.lastgroup != "ws":
            out.append((m.lastgroup, m.group()))
    out.append(("eof", ""))
    return out


class _Parser:
    def __init__(self, text: str, int_range: int = 5):
        self.toks = _tokenize(text)
        self.i = 0
        self.k = int_range
        self.existentials: set = set()

    def peek(self):
        return self.toks[self.i]

    def next(self):
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, kind=None, value=None):
        k, v = self.next()
        if (kind and k != kind) or (value and v != value):
            raise FormulaParseError(f"expected {value or kind}, got {v!r}")
        return v

    def at(self, value):
        return self.peek()[1] == value

    def eat(self, value):
        if self.at(value):
            self.next()
            return True
        return False

    # ----- grammar -----

    def formula(self) -> SymbolicHeap:
        self.existentials = set()
        if self.peek() == ("ident", "E"):
            self.next()
            names = []
            while self.peek()[0] == "ident":
                names.append(self.next()[1])
            self.expect(value=".")
            if not names:
                raise FormulaParseError("empty binder list")
            self.existentials = set(names)
        pure, spatial = [], []
        while True:
            self.atom(pure, spatial)
            if self.eat("&") or self.eat("*"):
                continue
            break
        return SymbolicHeap(
            frozenset(Var(n, EXISTENTIAL) for n in self.existentials if self._used(n, pure, spatial)),
            frozenset(pure), tuple(spatial))

    def _used(self, name, pure, spatial):
        from .formula import atom_vars
        import itertools
        for a in itertools.chain(pure, spatial):
            if any(v.name == name and v.is_existential for v in atom_vars(a)):
                return True
        return False

    def atom(self, pure, spatial):
        kind, v = self.peek()
        if v == "emp":
            self.next()
            return
        if v == "freed":
            self.next()
            self.expect(value="(")
            t = self.term()
            if not isinstance(t, Var) or t.is_nil:
                raise FormulaParseError("freed() takes a non-nil variable")
            self.expect(value=")")
            spatial.append(Freed(t))
            return
        if v in ("ls", "dls", "nls"):
            spatial.append(self.predicate(v))
            return
        # points-to or pure atom
        t = self.term()
        if self.eat("->"):
            if not isinstance(t, Var) or t.is_nil:
                raise FormulaParseError("points-to source must be a non-nil variable")
            self.expect(value="(")
            fields = []
            while True:
                f = self.expect("ident")
                self.expect(value=":")
                fields.append((f, self.term()))
                if not self.eat(","):
                    break
            self.expect(value=")")
            names = [f for f, _ in fields]
            if len(set(names)) != len(names):
                raise FormulaParseError("duplicate field name in points-to")
            spatial.append(PointsTo(t, tuple(fields)))
            return
        k, op = self.next()
        if k == "eq":
            u = self.term()
            pure.append(self._eq(t, u))
        elif k == "neq":
            u = self.term()
            pure.append(Neq(t, u))
        else:
            raise FormulaParseError(f"expected '=', '!=' or '->', got {op!r}")

    def _eq(self, a, b):
        if isinstance(b, int) and isinstance(a, Var) and not a.is_nil:
            return self._intval(a, b)
        if isinstance(a, int) and isinstance(b, Var) and not b.is_nil:
            return self._intval(b, a)
        return Eq(a, b)

    def _intval(self, v, n):
        if abs(n) > self.k:
            raise FormulaParseError(f"integer {n} outside tracked range [-{self.k}, {self.k}]")
        return IntVal(v, n)

    def predicate(self, name):
        self.next()
        fields = []
        if self.eat("["):
            fields.append(self.expect("ident"))
            while self.eat(","):
                fields.append(self.expect("ident"))
            self.expect(value="]")
        self.expect(value="(")
        n = int(self.expect("int"))
        self.expect(value="+")
        if n < 0:
            raise FormulaParseError("segment minimum must be non-negative")
        self.expect(value=";")
        args = [self.term()]
        while self.eat(","):
            args.append(self.term())
        self.expect(value=")")
        want = {"ls": 2, "dls": 4, "nls": 3}[name]
        if len(args) != want:
            raise FormulaParseError(f"{name} takes {want} arguments, got {len(args)}")
        if not all(isinstance(a, Var) for a in args):
            raise FormulaParseError(f"{name} arguments must be variables or nil")
        if name == "ls":
            return Ls(n, *args, *(fields or ["next"]))
        if name == "dls":
            if fields and len(fields) != 2:
                raise FormulaParseError("dls takes two field names")
            return Dls(n, *args, *(fields or ["next", "prev"]))
        if fields and len(fields) != 3:
            raise FormulaParseError("nls takes three field names")
        return Nls(n, *args, *(fields or ["next", "inner", "next"]))

    def term(self):
        kind, v = self.next()
        if kind == "int":
            return int(v)
        if kind != "ident":
            raise FormulaParseError(f"expected a term, got {v!r}")
        if v == "nil":
            return NIL
        if v in self.existentials:
            return Var(v, EXISTENTIAL)
        return Var(v)


def parse_heap(text: str, int_range: int = 5) -> SymbolicHeap:
    p = _Parser(text, int_range)
    h = p.formula()
    p.expect("eof")
    return h


def parse_query(text: str, int_range: int = 5):
    """Parse either a single formula or an entailment 'lhs |- rhs'.

    Returns ("sat", heap) or ("entail", lhs, rhs).
    """
    parts = text.split("|-")
    if len(parts) == 1:
        return ("sat", parse_heap(text, int_range))
    if len(parts) == 2:
        return ("entail", parse_heap(parts[0], int_range), parse_heap(parts[1], int_range))
    raise FormulaParseError("more than one '|-' in entailment query")


# ---------------------------------------------------------------------------
# Printing
# ---------------------------------------------------------------------------


def format_term(t) -> str:
    if isinstance(t, int):
        return str(t)
    return t.name


def format_atom(a) -> str:
    if isinstance(a, Eq):
        return f"{format_term(a.a)} = {format_term(a.b)}"
    if isinstance(a, Neq):
        return f"{format_term(a.a)} != {format_term(a.b)}"
    if isinstance(a, IntVal):
        return f"{a.var.name} = {a.value}"
    if isinstance(a, PointsTo):
        inner = ", ".join(f"{f}: {format_term(v)}" for f, v in a.fields)
        return f"{a.src.name} -> ({inner})"
    if isinstance(a, Ls):
        f = "" if a.next_field == "next" else f"[{a.next_field}]"
        return f"ls{f}({a.min}+; {a.src.name}, {a.dst.name})"
    if isinstance(a, Dls):
        f = "" if (a.next_field, a.prev_field) == ("next", "prev") else f"[{a.next_field},{a.prev_field}]"
        return (f"dls{f}({a.min}+; {a.first.name}, {a.last.name}, "
                f"{a.prev_link.name}, {a.next_link.name})")
    if isinstance(a, Nls):
        names = (a.next_field, a.nested_field, a.inner_next_field)
        f = "" if names == ("next", "inner", "next") else f"[{','.join(names)}]"
        return f"nls{f}({a.min}+; {a.src.name}, {a.dst.name}, {a.sink.name})"
    if isinstance(a, Freed):
        return f"freed({a.src.name})"
    raise TypeError(f"not an atom: {a!r}")


def _pure_sort_key(a):
    if isinstance(a, IntVal):
        return ("IntVal", term_key(a.var), a.value, ())
    return (type(a).__name__, term_key(a.a), term_key(a.b), ())


def format_heap(h: SymbolicHeap) -> str:
    parts = []
    if h.existentials:
        names = sorted((v.name for v in h.existentials), key=_natural)
        parts.append("E " + " ".join(names) + " .")
    pure = " & ".join(format_atom(a) for a in sorted(h.pure, key=_pure_sort_key))
    spatial = " * ".join(format_atom(a) for a in h.spatial) if h.spatial else "emp"
    body = f"{pure} & {spatial}" if pure else spatial
    parts.append(body)
    return " ".join(parts)
