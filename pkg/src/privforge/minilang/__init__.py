"""A small, fully specified Python-like language.

Recursive-descent parser over an indentation-based grammar (see grammar.ebnf
at the repository root), structural-span extraction, a step-counted sandboxed
interpreter, and a deterministic template summarizer.
"""

from .nodes import STRUCTURAL_KINDS, StructuralSpan, SyntaxNode
from .parser import ParseFailure, parse
from .interp import (
    ALLOWED_CAPABILITIES,
    ExecBudget,
    ExecResult,
    detect_foreign_syntax,
    interpret,
)
from .summary import extract_structural_tokens, summarize_ast

__all__ = [
    "ALLOWED_CAPABILITIES",
    "ExecBudget",
    "ExecResult",
    "ParseFailure",
    "STRUCTURAL_KINDS",
    "StructuralSpan",
    "SyntaxNode",
    "detect_foreign_syntax",
    "extract_structural_tokens",
    "interpret",
    "parse",
    "summarize_ast",
]
