"""Lexer, parser, and static checks for the mini pointer language.

The accepted grammar (see docs/language.md for the reference):

    program    = { structdef | fundef } ;
    structdef  = "struct" IDENT "{" { field } "}" ";" ;
    field      = ( "struct" IDENT "*" | "int" ) IDENT ";" ;
    fundef     = type IDENT "(" [ params ] ")" "{" { decl } { stmt } "}" ;
    type       = "void" | "int" | "struct" IDENT "*" ;
    params     = type IDENT { "," type IDENT } ;
    decl       = type IDENT ";" ;
    stmt       = lval "=" rhs ";" | "free" "(" IDENT ")" ";"
               | "if" "(" cond ")" block [ "else" block ]
               | "while" "(" cond ")" block
               | "return" [ expr ] ";" | IDENT "(" [ args ] ")" ";" ;
    lval       = IDENT | IDENT "->" IDENT ;
    rhs        = "NULL" | INT | lval | "malloc" "(" "sizeof" "(" "struct" IDENT ")" ")"
               | IDENT "(" [ args ] ")" | expr ;
    expr       = atom { ("+"|"-") atom } ;   atom = IDENT | INT ;
    cond       = atom2 ("=="|"!="|"<"|"<=") atom2 | "nondet" "(" ")" ;
    atom2      = IDENT | "NULL" | INT ;

`nondet()` in rhs position is the reserved unconstrained-value builtin.
Comments run from // to end of line. malloc always succeeds. Recognized
C syntax outside this subset (arrays, address-of, pointer dereference via
*, chained field access) raises UnsupportedFeature; plain syntax or type
errors raise ParseError. Multi-term integer expressions are desugared into
binary operations through fresh int temporaries (_t0, _t1, ...).
"""

from __future__ import annotations

import re

from . import ast
from .ast import (
    Atom, CallRhs, CallStmt, Cond, FieldLoadRhs, FieldStore, Free, FunDef,
    If, INT, IntAtom, IntConstRhs, IntOp, MallocRhs, NondetRhs, NullAtom,
    NullRhs, Program, PtrType, Return, SllKind, StructDef, VarAssign,
    VarAtom, VarRhs, VOID, While, classify_structs,
)


class FrontendError(Exception):
    def __init__(self, message, line=0, col=0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


class ParseError(FrontendError):
    pass


class UnsupportedFeature(FrontendError):
    pass


KEYWORDS = {"struct", "int", "void", "if", "else", "while", "return",
            "free", "malloc", "sizeof", "NULL", "nondet"}

_TOKEN = re.compile(r"""
    (?P<comment>//[^\n]*)
  | (?P<nl>\n)
  | (?P<ws>[ \t\r]+)
  | (?P<arrow>->)
  | (?P<op>==|!=|<=|[<{}();,=*+\-\[\]&!.])
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
""", re.VERBOSE)


class Token:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind = kind
        self.text = text
        self.line = line
        self.col = col

    def __repr__(self):
        return f"{self.text!r}@{self.line}:{self.col}"


def tokenize(source: str):
    toks, pos, line, bol = [], 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if not m:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - bol + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            bol = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(Token(kind, m.group(), line, m.start() - bol + 1))
        pos = m.end()
    toks.append(Token("eof", "", line, pos - bol + 1))
    return toks


class Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0
        # fresh temporaries must not collide with identifiers in the source
        used = [int(t.text[2:]) for t in self.toks
                if t.kind == "ident" and re.fullmatch(r"_t\d+", t.text)]
        self.temp_counter = max(used, default=-1) + 1
        self.extra_locals = []

    def peek(self, ahead=0) -> Token:
        return self.toks[min(self.i + ahead, len(self.toks) - 1)]

    def next(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None, cls=ParseError):
        tok = tok or self.peek()
        raise cls(msg, tok.line, tok.col)

    def expect(self, text) -> Token:
        t = self.next()
        if t.text != text:
            self.error(f"expected {text!r}, got {t.text!r}", t)
        return t

    def at(self, text) -> bool:
        return self.peek().text == text

    def eat(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def ident(self) -> Token:
        t = self.next()
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error(f"expected identifier, got {t.text!r}", t)
        return t

    # ----- declarations -----

    def program(self) -> Program:
        structs, functions = [], []
        while not self.at(""):
            if self.at("struct") and self.peek(2).text == "{":
                structs.append(self.structdef())
            else:
                functions.append(self.fundef())
        return Program(tuple(structs), tuple(functions))

    def structdef(self) -> StructDef:
        start = self.expect("struct")
        name = self.ident().text
        self.expect("{")
        fields = []
        while not self.at("}"):
            t = self.type_spec()
            f = self.ident()
            self.check_not_array(f)
            self.expect(";")
            fields.append((f.text, t))
        self.expect("}")
        self.expect(";")
        return StructDef(name, tuple(fields), start.line)

    def type_spec(self):
        t = self.next()
        if t.text == "int":
            return INT
        if t.text == "void":
            return VOID
        if t.text == "struct":
            name = self.ident().text
            self.expect("*")
            if self.at("*"):
                self.error("pointers to pointers are not supported", cls=UnsupportedFeature)
            return PtrType(name)
        self.error(f"expected a type, got {t.text!r}", t)

    def check_not_array(self, tok):
        if self.at("["):
            self.error("arrays are not supported", cls=UnsupportedFeature)

    def fundef(self) -> FunDef:
        start = self.peek()
        rtype = self.type_spec()
        name = self.ident().text
        self.expect("(")
        params = []
        if not self.at(")"):
            while True:
                t = self.type_spec()
                p = self.ident()
                params.append((p.text, t))
                if not self.eat(","):
                    break
        self.expect(")")
        self.expect("{")
        locals_ = []
        while self.peek().text in ("int", "struct") and not (
                self.peek().text == "struct" and self.peek(2).text in ("{",)):
            # a decl: type IDENT ; (struct IDENT * IDENT ;)
            save = self.i
            try:
                t = self.type_spec()
            except UnsupportedFeature:
                raise
            except FrontendError:
                self.i = save
                break
            v = self.ident()
            self.check_not_array(v)
            self.expect(";")
            locals_.append((v.text, t))
        self.extra_locals = []
        body = self.block_stmts(stop="}")
        self.expect("}")
        return FunDef(name, tuple(params), tuple(locals_) + tuple(self.extra_locals),
                      tuple(body), rtype, start.line)

    # ----- statements -----

    def block_stmts(self, stop):
        out = []
        while not self.at(stop):
            if self.at(""):
                self.error("unexpected end of input")
            out.extend(self.stmt())
        return out

    def block(self):
        self.expect("{")
        out = self.block_stmts("}")
        self.expect("}")
        return tuple(out)

    def fresh_temp(self):
        name = f"_t{self.temp_counter}"
        self.temp_counter += 1
        self.extra_locals.append((name, INT))
        return name

    def stmt(self):
        t = self.peek()
        if t.text in ("int", "struct", "void"):
            self.error("declarations must precede statements", t)
        if t.text == "free":
            self.next()
            self.expect("(")
            v = self.ident().text
            self.expect(")")
            self.expect(";")
            return [Free(v, t.line)]
        if t.text == "if":
            self.next()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            then = self.block()
            els = self.block() if self.eat("else") else ()
            return [If(cond, then, els, t.line)]
        if t.text == "while":
            self.next()
            self.expect("(")
            cond = self.cond()
            self.expect(")")
            return [While(cond, self.block(), t.line)]
        if t.text == "return":
            self.next()
            if self.eat(";"):
                return [Return(None, t.line)]
            pre, atom = self.expr_atom(t.line)
            self.expect(";")
            return pre + [Return(atom, t.line)]
        if t.text in ("*", "&"):
            self.error(f"{'pointer dereference' if t.text == '*' else 'address-of'} "
                       "is not supported", t, cls=UnsupportedFeature)
        if t.kind != "ident":
            self.error(f"expected a statement, got {t.text!r}", t)
        if t.text in KEYWORDS:
            self.error(f"unexpected keyword {t.text!r}", t)
        # call statement / assignment
        if self.peek(1).text == "(":
            name = self.next().text
            args = self.call_args()
            self.expect(";")
            return [CallStmt(name, tuple(args), t.line)]
        return self.assignment()

    def assignment(self):
        t = self.ident()
        field = None
        if self.eat("->"):
            field = self.ident().text
            if self.at("->"):
                self.error("chained field access is not supported", cls=UnsupportedFeature)
        self.check_not_array(t)
        self.expect("=")
        pre, rhs = self.rhs(t.line)
        self.expect(";")
        if field is None:
            if isinstance(rhs, tuple):  # binary integer operation
                op, a, b = rhs
                return pre + [IntOp(t.text, op, a, b, t.line)]
            return pre + [VarAssign(t.text, rhs, t.line)]
        if isinstance(rhs, tuple):
            op, a, b = rhs
            tmp = self.fresh_temp()
            return pre + [IntOp(tmp, op, a, b, t.line),
                          FieldStore(t.text, field, VarRhs(tmp), t.line)]
        return pre + [FieldStore(t.text, field, rhs, t.line)]

    def rhs(self, line):
        """Returns (prefix statements, Rhs or (op, a, b) for a binary IntOp)."""
        t = self.peek()
        if t.text == "NULL":
            self.next()
            return [], NullRhs()
        if t.text == "malloc":
            self.next()
            self.expect("(")
            self.expect("sizeof")
            self.expect("(")
            self.expect("struct")
            name = self.ident().text
            self.expect(")")
            self.expect(")")
            return [], MallocRhs(name)
        if t.text == "nondet" and self.peek(1).text == "(":
            self.next()
            self.expect("(")
            self.expect(")")
            return [], NondetRhs()
        if t.kind == "ident" and t.text not in KEYWORDS and self.peek(1).text == "(":
            name = self.next().text
            return [], CallRhs(name, tuple(self.call_args()))
        if t.kind == "ident" and self.peek(1).kind == "arrow":
            v = self.ident().text
            self.next()
            f = self.ident().text
            if self.at("->"):
                self.error("chained field access is not supported", cls=UnsupportedFeature)
            return [], FieldLoadRhs(v, f)
        if t.text == "&":
            self.error("address-of is not supported", t, cls=UnsupportedFeature)
        # expr = atom { (+|-) atom }
        pre, terms = self.expr_terms(line)
        if len(terms) == 1:
            a = terms[0][1]
            if isinstance(a, IntAtom):
                return pre, IntConstRhs(a.value)
            return pre, VarRhs(a.name)
        return pre, (terms[1][0], terms[0][1], terms[1][1])

    def expr_terms(self, line):
        """Parse an expr, folding all but the last operation through
        temporaries so at most two terms remain."""
        pre = []
        terms = [("+", self.atom())]
        while self.peek().text in ("+", "-"):
            op = self.next().text
            terms.append((op, self.atom()))
        while len(terms) > 2:
            (_, a), (op1, b) = terms[0], terms[1]
            tmp = self.fresh_temp()
            pre.append(IntOp(tmp, op1, a, b, line))
            terms = [("+", VarAtom(tmp))] + terms[2:]
        return pre, terms

    def expr_atom(self, line):
        """Parse an expr down to a single atom (for return values)."""
        pre, terms = self.expr_terms(line)
        if len(terms) == 1:
            return pre, terms[0][1]
        op, a, b = terms[1][0], terms[0][1], terms[1][1]
        tmp = self.fresh_temp()
        return pre + [IntOp(tmp, op, a, b, line)], VarAtom(tmp)

    def atom(self) -> Atom:
        t = self.next()
        if t.kind == "int":
            return IntAtom(int(t.text))
        if t.text == "-" and self.peek().kind == "int":
            return IntAtom(-int(self.next().text))
        if t.kind == "ident" and t.text not in KEYWORDS:
            if self.at("["):
                self.error("arrays are not supported", t, cls=UnsupportedFeature)
            return VarAtom(t.text)
        self.error(f"expected a variable or integer, got {t.text!r}", t)

    def atom2(self) -> Atom:
        if self.at("NULL"):
            self.next()
            return NullAtom()
        return self.atom()

    def cond(self) -> Cond:
        if self.at("nondet"):
            self.next()
            self.expect("(")
            self.expect(")")
            return Cond("nondet")
        a = self.atom2()
        op = self.next()
        if op.text not in ("==", "!=", "<", "<="):
            self.error(f"expected a comparison, got {op.text!r}", op)
        b = self.atom2()
        return Cond(op.text, a, b)

    def call_args(self):
        self.expect("(")
        args = []
        if not self.at(")"):
            while True:
                args.append(self.atom2())
                if not self.eat(","):
                    break
        self.expect(")")
        return args


# ---------------------------------------------------------------------------
# Static checks
# ---------------------------------------------------------------------------


def _check_program(p: Program):
    seen = set()
    for s in p.structs:
        if s.name in seen:
            raise ParseError(f"duplicate struct {s.name!r}", s.line)
        seen.add(s.name)
        fnames = [f for f, _ in s.fields]
        if len(set(fnames)) != len(fnames):
            raise ParseError(f"duplicate field name in struct {s.name!r}", s.line)
        for f, t in s.fields:
            if isinstance(t, PtrType) and p.struct(t.struct) is None:
                raise ParseError(f"field {f!r} references undeclared struct {t.struct!r}", s.line)
            if t == VOID:
                raise ParseError(f"field {f!r} cannot be void", s.line)
    fseen = set()
    for f in p.functions:
        if f.name in fseen or p.struct(f.name):
            raise ParseError(f"duplicate function {f.name!r}", f.line)
        fseen.add(f.name)
    entry = p.function(p.entry)
    if entry is None:
        raise ParseError(f"no entry function {p.entry!r}")
    if entry.params:
        raise ParseError(f"entry function {p.entry!r} must take no parameters", entry.line)

    kinds = classify_structs(p)
    for s in p.structs:
        if not isinstance(kinds[s.name], ast.PlainKind):
            for fname, t in s.fields:
                if t == INT:
                    raise UnsupportedFeature(
                        f"integer field {fname!r} in list struct {s.name!r} is not supported",
                        s.line)

    for f in p.functions:
        _check_function(p, f)


def _check_function(p: Program, f: FunDef):
    names = [n for n, _ in f.params + f.locals]
    if len(set(names)) != len(names):
        raise ParseError(f"duplicate variable in function {f.name!r}", f.line)
    for n, t in f.params + f.locals:
        if isinstance(t, PtrType) and p.struct(t.struct) is None:
            raise ParseError(f"variable {n!r} references undeclared struct {t.struct!r}", f.line)
        if t == VOID:
            raise ParseError(f"variable {n!r} cannot be void", f.line)

    def vtype(name, line):
        t = f.var_type(name)
        if t is None:
            raise ParseError(f"undeclared variable {name!r}", line)
        return t

    def atom_type(a: Atom, line):
        if isinstance(a, IntAtom):
            return INT
        if isinstance(a, NullAtom):
            return None  # any pointer
        return vtype(a.name, line)

    def rhs_type(r, line):
        if isinstance(r, NullRhs):
            return None
        if isinstance(r, IntConstRhs) or isinstance(r, NondetRhs):
            return INT
        if isinstance(r, VarRhs):
            return vtype(r.name, line)
        if isinstance(r, MallocRhs):
            if p.struct(r.struct) is None:
                raise ParseError(f"malloc of undeclared struct {r.struct!r}", line)
            return PtrType(r.struct)
        if isinstance(r, FieldLoadRhs):
            return field_type(r.var, r.field, line)
        if isinstance(r, CallRhs):
            return call_type(r.fn, r.args, line)
        raise TypeError(r)

    def field_type(var, fieldname, line):
        t = vtype(var, line)
        if not isinstance(t, PtrType):
            raise ParseError(f"{var!r} is not a pointer", line)
        ft = p.struct(t.struct).field_type(fieldname)
        if ft is None:
            raise ParseError(f"struct {t.struct!r} has no field {fieldname!r}", line)
        return ft

    def call_type(fn, args, line):
        g = p.function(fn)
        if g is None:
            raise ParseError(f"call to undeclared function {fn!r}", line)
        if len(args) != len(g.params):
            raise ParseError(f"{fn!r} takes {len(g.params)} arguments, got {len(args)}", line)
        for a, (_, pt) in zip(args, g.params):
            at = atom_type(a, line)
            if at is not None and at != pt:
                raise ParseError(f"argument type mismatch in call to {fn!r}", line)
            if at is None and not isinstance(pt, PtrType):
                raise ParseError(f"NULL passed for non-pointer parameter of {fn!r}", line)
        return g.return_type

    def compatible(target, value):
        if value is None:
            return isinstance(target, PtrType)
        return target == value

    def check_block(stmts):
        for s in stmts:
            if isinstance(s, VarAssign):
                if not compatible(vtype(s.target, s.line), rhs_type(s.rhs, s.line)):
                    raise ParseError(f"type mismatch assigning to {s.target!r}", s.line)
            elif isinstance(s, FieldStore):
                ft = field_type(s.target, s.field, s.line)
                if not compatible(ft, rhs_type(s.rhs, s.line)):
                    raise ParseError(f"type mismatch storing to {s.target}->{s.field}", s.line)
            elif isinstance(s, IntOp):
                if vtype(s.target, s.line) != INT:
                    raise ParseError(f"{s.target!r} is not an integer", s.line)
                for a in (s.a, s.b):
                    if atom_type(a, s.line) != INT:
                        raise ParseError("arithmetic on non-integer operand", s.line)
            elif isinstance(s, Free):
                if not isinstance(vtype(s.var, s.line), PtrType):
                    raise ParseError(f"free of non-pointer {s.var!r}", s.line)
            elif isinstance(s, (If, While)):
                check_cond(s.cond, s.line)
                check_block(s.then if isinstance(s, If) else s.body)
                if isinstance(s, If):
                    check_block(s.els)
            elif isinstance(s, Return):
                if s.value is None:
                    if f.return_type != VOID:
                        raise ParseError(f"{f.name!r} must return a value", s.line)
                else:
                    if f.return_type == VOID:
                        raise ParseError(f"void function {f.name!r} returns a value", s.line)
                    at = atom_type(s.value, s.line)
                    if not compatible(f.return_type, at):
                        raise ParseError("return type mismatch", s.line)
            elif isinstance(s, CallStmt):
                call_type(s.fn, s.args, s.line)

    def check_cond(c: Cond, line):
        if c.op == "nondet":
            return
        ta, tb = atom_type(c.a, line), atom_type(c.b, line)
        if c.op in ("<", "<="):
            if ta != INT or tb != INT:
                raise ParseError("ordered comparison needs integer operands", line)
        else:
            if ta is None and tb is None:
                return
            if ta is None or tb is None:
                other = ta if tb is None else tb
                if not isinstance(other, PtrType):
                    raise ParseError("NULL compared with a non-pointer", line)
            elif ta != tb:
                raise ParseError("comparison between incompatible types", line)

    check_block(f.body)


def parse_program(source: str) -> Program:
    """Parse and statically check one translation unit.

    Raises ParseError (syntax or type errors) or UnsupportedFeature
    (recognized constructs outside the subset).
    """
    p = Parser(source).program()
    _check_program(p)
    return p
