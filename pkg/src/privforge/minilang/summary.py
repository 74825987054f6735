"""Structural-span extraction and the deterministic template summarizer."""

from __future__ import annotations

from .nodes import STRUCTURAL_KINDS, StructuralSpan, SyntaxNode
from .parser import parse


def extract_structural_tokens(source: str) -> list[StructuralSpan]:
    """One span per structural node (function defs, conditionals, loops,
    returns), in source order; each slice reproduces the original bytes."""
    module = parse(source)
    spans: list[StructuralSpan] = []
    for node in module.walk():
        if node.kind in STRUCTURAL_KINDS:
            start, end = node.span
            spans.append(StructuralSpan(node.kind, (start, end), source[start:end]))
    return spans


def _plural(count: int, noun: str) -> str:
    return f"{count} {noun}" if count == 1 else f"{count} {noun}s"


def _free_names(module: SyntaxNode) -> list[str]:
    bound: set[str] = set()
    read: set[str] = set()
    for node in module.walk():
        if node.kind in ("Assign", "For"):
            bound.add(node.name)
        elif node.kind == "FunctionDef":
            bound.add(node.name)
            bound.update(node.params)
        elif node.kind == "Name":
            read.add(node.name)
        elif node.kind == "Call":
            read.add(node.name)
    read.discard("require")
    return sorted(read - bound)


def summarize_ast(source: str) -> str:
    """Fixed English template over the parse tree; identical sources yield
    identical summaries. Raises ParseFailure if the source does not parse."""
    module = parse(source)
    functions: list[tuple[str, int]] = []
    assigns: set[str] = set()
    loops = 0
    conditionals = 0
    returns_value = False
    prints = False
    for node in module.walk():
        kind = node.kind
        if kind == "FunctionDef":
            functions.append((node.name, len(node.params)))
        elif kind == "Assign":
            assigns.add(node.name)
        elif kind in ("For", "While"):
            loops += 1
        elif kind == "If":
            conditionals += 1
        elif kind == "Return" and node.args:
            returns_value = True
        elif kind == "Print":
            prints = True

    clauses: list[str] = []
    for name, arity in functions:
        clauses.append(f"defines function {name} with {_plural(arity, 'parameter')}")
    if assigns:
        clauses.append(f"assigns {_plural(len(assigns), 'variable')}")
    if loops:
        clauses.append(f"contains {_plural(loops, 'loop')}")
    if conditionals:
        clauses.append(f"contains {_plural(conditionals, 'conditional')}")
    if returns_value:
        clauses.append("returns an expression")
    if prints:
        clauses.append("prints output")
    free = _free_names(module)
    if free:
        clauses.append(f"reads {', '.join(free)} from the environment")
    if not clauses:
        clauses.append("performs basic operations")
    return "; ".join(clauses)
