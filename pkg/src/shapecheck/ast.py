"""AST for the mini pointer language (.mpl).

One translation unit holds struct declarations and function definitions.
Statements are the exact forms the transfer functions handle; the parser
desugars anything richer (multi-term integer expressions) into these.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


# ----- types -----


@dataclass(frozen=True)
class IntType:
    def __str__(self):
        return "int"


@dataclass(frozen=True)
class PtrType:
    struct: str

    def __str__(self):
        return f"struct {self.struct}*"


@dataclass(frozen=True)
class VoidType:
    def __str__(self):
        return "void"


INT = IntType()
VOID = VoidType()
Type = Union[IntType, PtrType, VoidType]


# ----- atoms (leaf operands) -----


@dataclass(frozen=True)
class VarAtom:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class IntAtom:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class NullAtom:
    def __str__(self):
        return "NULL"


Atom = Union[VarAtom, IntAtom, NullAtom]


# ----- right-hand sides -----


@dataclass(frozen=True)
class NullRhs:
    def __str__(self):
        return "NULL"


@dataclass(frozen=True)
class VarRhs:
    name: str

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class IntConstRhs:
    value: int

    def __str__(self):
        return str(self.value)


@dataclass(frozen=True)
class FieldLoadRhs:
    var: str
    field: str

    def __str__(self):
        return f"{self.var}->{self.field}"


@dataclass(frozen=True)
class MallocRhs:
    struct: str

    def __str__(self):
        return f"malloc(sizeof(struct {self.struct}))"


@dataclass(frozen=True)
class CallRhs:
    fn: str
    args: tuple

    def __str__(self):
        return f"{self.fn}({', '.join(map(str, self.args))})"


@dataclass(frozen=True)
class NondetRhs:
    def __str__(self):
        return "nondet()"


Rhs = Union[NullRhs, VarRhs, IntConstRhs, FieldLoadRhs, MallocRhs, CallRhs, NondetRhs]


# ----- conditions -----


@dataclass(frozen=True)
class Cond:
    op: str  # "==", "!=", "<", "<=", or "nondet"
    a: Optional[Atom] = None
    b: Optional[Atom] = None

    def __str__(self):
        if self.op == "nondet":
            return "nondet()"
        return f"{self.a} {self.op} {self.b}"


NEGATED = {"==": "!=", "!=": "=="}


def negate(c: Cond) -> Cond:
    """The condition holding exactly when c does not (nondet negates to itself)."""
    if c.op == "nondet":
        return c
    if c.op in NEGATED:
        return Cond(NEGATED[c.op], c.a, c.b)
    if c.op == "<":
        return Cond("<=", c.b, c.a)
    return Cond("<", c.b, c.a)


# ----- statements -----


@dataclass(frozen=True)
class VarAssign:
    target: str
    rhs: Rhs
    line: int = 0


@dataclass(frozen=True)
class FieldStore:
    target: str
    field: str
    rhs: Rhs
    line: int = 0


@dataclass(frozen=True)
class Free:
    var: str
    line: int = 0


@dataclass(frozen=True)
class If:
    cond: Cond
    then: tuple
    els: tuple = ()
    line: int = 0


@dataclass(frozen=True)
class While:
    cond: Cond
    body: tuple = ()
    line: int = 0


@dataclass(frozen=True)
class Return:
    value: Optional[Atom] = None
    line: int = 0


@dataclass(frozen=True)
class CallStmt:
    fn: str
    args: tuple = ()
    line: int = 0


@dataclass(frozen=True)
class IntOp:
    target: str
    op: str  # "+" or "-"
    a: Atom = None
    b: Atom = None
    line: int = 0


Stmt = Union[VarAssign, FieldStore, Free, If, While, Return, CallStmt, IntOp]


# ----- declarations -----


@dataclass(frozen=True)
class StructDef:
    name: str
    fields: tuple  # ((name, Type), ...) in declaration order
    line: int = 0

    def field_type(self, name):
        for f, t in self.fields:
            if f == name:
                return t
        return None


@dataclass(frozen=True)
class FunDef:
    name: str
    params: tuple  # ((name, Type), ...)
    locals: tuple
    body: tuple
    return_type: Type = VOID
    line: int = 0

    def var_type(self, name):
        for n, t in self.params + self.locals:
            if n == name:
                return t
        return None


@dataclass(frozen=True)
class Program:
    structs: tuple
    functions: tuple
    entry: str = "main"

    def struct(self, name) -> Optional[StructDef]:
        for s in self.structs:
            if s.name == name:
                return s
        return None

    def function(self, name) -> Optional[FunDef]:
        for f in self.functions:
            if f.name == name:
                return f
        return None


# ----- struct classification -----


@dataclass(frozen=True)
class SllKind:
    next: str


@dataclass(frozen=True)
class DllKind:
    next: str
    prev: str


@dataclass(frozen=True)
class NllKind:
    next: str
    nested: str
    inner_struct: str


@dataclass(frozen=True)
class PlainKind:
    self_refs: int = 0


StructKind = Union[SllKind, DllKind, NllKind, PlainKind]


def classify_structs(p: Program) -> dict:
    """Guess the inductive shape of every struct from its pointer fields.

    One self-referential pointer field and nothing else pointing anywhere:
    SLL. Exactly two self-referential fields: DLL (declaration order gives
    next then prev). One self-referential field plus one pointer into a
    struct already classified SLL: NLL. Anything else is a plain record.
    Deterministic and order-independent: NLL upgrades iterate to a fixpoint.
    """
    kinds = {}
    for s in p.structs:
        selfp = [f for f, t in s.fields if isinstance(t, PtrType) and t.struct == s.name]
        others = [(f, t.struct) for f, t in s.fields
                  if isinstance(t, PtrType) and t.struct != s.name]
        if len(selfp) == 1 and not others:
            kinds[s.name] = SllKind(selfp[0])
        elif len(selfp) == 2:
            kinds[s.name] = DllKind(selfp[0], selfp[1])
        else:
            kinds[s.name] = PlainKind(len(selfp))
    changed = True
    while changed:
        changed = False
        for s in p.structs:
            if not isinstance(kinds[s.name], PlainKind):
                continue
            selfp = [f for f, t in s.fields if isinstance(t, PtrType) and t.struct == s.name]
            others = [(f, t.struct) for f, t in s.fields
                      if isinstance(t, PtrType) and t.struct != s.name]
            if (len(selfp) == 1 and len(others) == 1
                    and isinstance(kinds.get(others[0][1]), SllKind)):
                kinds[s.name] = NllKind(selfp[0], others[0][0], others[0][1])
                changed = True
    return kinds


# ----- pretty printer -----


def _fmt_block(stmts, indent):
    pad = "    " * indent
    out = []
    for s in stmts:
        out.append(pad + format_stmt(s, indent))
    return "\n".join(out)


def format_stmt(s: Stmt, indent=0) -> str:
    if isinstance(s, VarAssign):
        return f"{s.target} = {s.rhs};"
    if isinstance(s, FieldStore):
        return f"{s.target}->{s.field} = {s.rhs};"
    if isinstance(s, Free):
        return f"free({s.var});"
    if isinstance(s, IntOp):
        return f"{s.target} = {s.a} {s.op} {s.b};"
    if isinstance(s, Return):
        return f"return {s.value};" if s.value is not None else "return;"
    if isinstance(s, CallStmt):
        return f"{s.fn}({', '.join(map(str, s.args))});"
    if isinstance(s, If):
        text = f"if ({s.cond}) {{\n{_fmt_block(s.then, indent + 1)}\n" + "    " * indent + "}"
        if s.els:
            text += f" else {{\n{_fmt_block(s.els, indent + 1)}\n" + "    " * indent + "}"
        return text
    if isinstance(s, While):
        return f"while ({s.cond}) {{\n{_fmt_block(s.body, indent + 1)}\n" + "    " * indent + "}"
    raise TypeError(f"not a statement: {s!r}")


def format_program(p: Program) -> str:
    parts = []
    for s in p.structs:
        fields = "\n".join(f"    {t} {f};" for f, t in s.fields)
        parts.append(f"struct {s.name} {{\n{fields}\n}};")
    for f in p.functions:
        params = ", ".join(f"{t} {n}" for n, t in f.params)
        decls = "\n".join(f"    {t} {n};" for n, t in f.locals)
        body = _fmt_block(f.body, 1)
        inner = "\n".join(x for x in (decls, body) if x)
        parts.append(f"{f.return_type} {f.name}({params}) {{\n{inner}\n}}")
    return "\n\n".join(parts) + "\n"
