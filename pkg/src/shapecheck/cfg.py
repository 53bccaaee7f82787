"""Control-flow graphs: one statement or branch guard per edge.

Nodes are integer locations. A while loop contributes a head node with an
Assume out-edge into the body and an AssumeNot out-edge past the loop; an
if statement forms a diamond. Return statements jump straight to the
function's exit node. Unreachable nodes (code after returns) are pruned.
Loop heads are the targets of back edges under a depth-first ordering from
the entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .ast import Cond, FunDef, Return, Stmt, If, While, negate


@dataclass(frozen=True)
class StmtLabel:
    stmt: Stmt

    def __str__(self):
        from .ast import format_stmt
        return format_stmt(self.stmt).split("\n")[0]

    @property
    def line(self):
        return self.stmt.line


@dataclass(frozen=True)
class AssumeLabel:
    cond: Cond
    line: int = 0

    def __str__(self):
        return f"assume({self.cond})"


@dataclass(frozen=True)
class AssumeNotLabel:
    cond: Cond
    line: int = 0

    def __str__(self):
        return f"assume(!({self.cond}))"

    @property
    def negated(self) -> Cond:
        return negate(self.cond)


@dataclass(frozen=True)
class CFG:
    nodes: frozenset
    edges: tuple  # (src, label, dst)
    entry: int
    exit: int
    loop_heads: frozenset

    def out_edges(self, node):
        return [e for e in self.edges if e[0] == node]

    def in_edges(self, node):
        return [e for e in self.edges if e[2] == node]


def build_cfg(f: FunDef) -> CFG:
    edges = []
    counter = [0]

    def fresh():
        counter[0] += 1
        return counter[0] - 1

    entry = fresh()
    exit_node = fresh()

    def lower_block(stmts, cur: Optional[int]) -> Optional[int]:
        """Wire stmts starting at cur; returns the fall-through node or
        None when every path returned."""
        for s in stmts:
            if cur is None:
                return None  # unreachable code after a return
            if isinstance(s, Return):
                edges.append((cur, StmtLabel(s), exit_node))
                cur = None
            elif isinstance(s, If):
                then_in, else_in = fresh(), fresh()
                edges.append((cur, AssumeLabel(s.cond, s.line), then_in))
                edges.append((cur, AssumeNotLabel(s.cond, s.line), else_in))
                then_out = lower_block(s.then, then_in)
                else_out = lower_block(s.els, else_in)
                if then_out is None and else_out is None:
                    cur = None
                else:
                    cur = fresh()
                    if then_out is not None:
                        _link(edges, then_out, cur)
                    if else_out is not None:
                        _link(edges, else_out, cur)
            elif isinstance(s, While):
                head = cur
                body_in, after = fresh(), fresh()
                edges.append((head, AssumeLabel(s.cond, s.line), body_in))
                edges.append((head, AssumeNotLabel(s.cond, s.line), after))
                body_out = lower_block(s.body, body_in)
                if body_out is not None:
                    _link(edges, body_out, head)
                cur = after
            else:
                nxt = fresh()
                edges.append((cur, StmtLabel(s), nxt))
                cur = nxt
        return cur

    last = lower_block(f.body, entry)
    if last is not None and last != exit_node:
        _merge(edges, last, exit_node)
        if last == entry:
            entry = exit_node  # empty body: single-node graph

    nodes, edges = _prune(edges, entry, exit_node)
    return CFG(frozenset(nodes), tuple(edges), entry, exit_node,
               frozenset(_loop_heads(nodes, edges, entry)))


def _link(edges, src, dst):
    """Merge src into dst by redirecting src's incoming edges."""
    _merge(edges, src, dst)


def _merge(edges, old, new):
    for i, (s, l, d) in enumerate(edges):
        if d == old:
            edges[i] = (s, l, new)
        if s == old:
            edges[i] = (new, l, edges[i][2])


def _prune(edges, entry, exit_node):
    succ = {}
    for s, _, d in edges:
        succ.setdefault(s, []).append(d)
    reach = {entry}
    stack = [entry]
    while stack:
        n = stack.pop()
        for d in succ.get(n, ()):
            if d not in reach:
                reach.add(d)
                stack.append(d)
    reach.add(exit_node)
    kept = [e for e in edges if e[0] in reach]
    nodes = {entry, exit_node}
    for s, _, d in kept:
        nodes.add(s)
        nodes.add(d)
    return nodes, kept


def _loop_heads(nodes, edges, entry):
    succ = {}
    for s, _, d in edges:
        succ.setdefault(s, []).append(d)
    heads = set()
    color = {}  # 1 = on stack, 2 = done

    def dfs(n):
        color[n] = 1
        for d in succ.get(n, ()):
            if color.get(d) == 1:
                heads.add(d)
            elif d not in color:
                dfs(d)
        color[n] = 2

    dfs(entry)
    return heads


def to_dot(cfg: CFG, name="cfg") -> str:
    lines = [f"digraph {name} {{"]
    for n in sorted(cfg.nodes):
        shape = "doublecircle" if n in (cfg.entry, cfg.exit) else "circle"
        peri = ", peripheries=2" if n in cfg.loop_heads else ""
        lines.append(f'  n{n} [label="{n}", shape={shape}{peri}];')
    for s, label, d in cfg.edges:
        text = str(label).replace('"', r'\"')
        lines.append(f'  n{s} -> n{d} [label="{text}"];')
    lines.append("}")
    return "\n".join(lines)
