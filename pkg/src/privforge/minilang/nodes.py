"""Syntax-tree node model and structural spans."""

from __future__ import annotations

from dataclasses import dataclass, field

KINDS = frozenset(
    {
        "Module",
        "FunctionDef",
        "If",
        "For",
        "While",
        "Return",
        "Assign",
        "ExprStmt",
        "Call",
        "BinOp",
        "Name",
        "Literal",
        "Print",
    }
)

# Block-introducing and flow-control kinds; the targets of the structural
# KL regularizer.
STRUCTURAL_KINDS = ("FunctionDef", "If", "For", "While", "Return")


@dataclass
class SyntaxNode:
    """One node of the parse tree.

    `span` is a byte range [start, end) into the source. Which optional
    fields are populated depends on `kind`:

    - Module:       body
    - FunctionDef:  name, params, body
    - If:           test, body, orelse
    - For:          name (loop target), test (range bound expression), body
    - While:        test, body
    - Return:       args (empty for a bare return)
    - Assign:       name, args[0] (value)
    - ExprStmt:     args[0]
    - Print:        args[0]
    - Call:         name, args
    - BinOp:        op, args=[lhs, rhs]
    - Name:         name
    - Literal:      value (int or str)
    """

    kind: str
    span: tuple[int, int]
    name: str = ""
    params: tuple[str, ...] = ()
    op: str = ""
    value: object = None
    test: "SyntaxNode | None" = None
    body: list["SyntaxNode"] = field(default_factory=list)
    orelse: list["SyntaxNode"] = field(default_factory=list)
    args: list["SyntaxNode"] = field(default_factory=list)

    @property
    def children(self) -> list["SyntaxNode"]:
        """Direct children in source order."""
        out: list[SyntaxNode] = []
        if self.test is not None:
            out.append(self.test)
        out.extend(self.args)
        out.extend(self.body)
        out.extend(self.orelse)
        return out

    def walk(self):
        """Pre-order traversal; parents before children, source order."""
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class StructuralSpan:
    """A structural node's kind, byte range, and the exact source slice."""

    node_kind: str
    span: tuple[int, int]
    tokens: str
