"""Lexer and recursive-descent parser for the mini-language.

Indentation is exactly four spaces per level. Sources must be ASCII so that
character offsets and byte offsets coincide; every span a node carries is a
byte range into the original source.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import SyntaxNode


class ParseFailure(Exception):
    """Parsing failed; carries the byte offset and what was expected."""

    def __init__(self, offset: int, expected: str):
        super().__init__(f"at byte {offset}: expected {expected}")
        self.offset = offset
        self.expected = expected


KEYWORDS = frozenset(
    {"def", "if", "else", "for", "while", "return", "print", "in", "range", "and", "or"}
)

_TWO_CHAR_OPS = ("==", "!=")
_ONE_CHAR_OPS = "<>+-*/%(),:="


@dataclass(frozen=True)
class Token:
    type: str  # NAME INT STRING OP NEWLINE INDENT DEDENT EOF
    value: str
    start: int
    end: int


def _lex(source: str) -> list[Token]:
    if not source.isascii():
        bad = next(i for i, ch in enumerate(source) if not ch.isascii())
        raise ParseFailure(len(source[:bad].encode()), "ASCII source text")
    tokens: list[Token] = []
    depth = 0
    pos = 0
    for raw_line in source.split("\n"):
        line_start = pos
        pos += len(raw_line) + 1
        if raw_line.strip() == "":
            continue
        if "\t" in raw_line:
            raise ParseFailure(line_start + raw_line.index("\t"), "spaces, not tabs")
        indent = len(raw_line) - len(raw_line.lstrip(" "))
        if indent % 4 != 0:
            raise ParseFailure(line_start, "indentation in steps of 4 spaces")
        level = indent // 4
        if level > depth + 1:
            raise ParseFailure(line_start, "at most one additional indent level")
        if level == depth + 1:
            tokens.append(Token("INDENT", "", line_start, line_start + indent))
            depth = level
        while level < depth:
            tokens.append(Token("DEDENT", "", line_start, line_start))
            depth -= 1
        i = indent
        n = len(raw_line)
        while i < n:
            ch = raw_line[i]
            at = line_start + i
            if ch == " ":
                i += 1
                continue
            if ch.isalpha() or ch == "_":
                j = i + 1
                while j < n and (raw_line[j].isalnum() or raw_line[j] == "_"):
                    j += 1
                tokens.append(Token("NAME", raw_line[i:j], at, line_start + j))
                i = j
                continue
            if ch.isdigit():
                j = i + 1
                while j < n and raw_line[j].isdigit():
                    j += 1
                tokens.append(Token("INT", raw_line[i:j], at, line_start + j))
                i = j
                continue
            if ch == '"':
                j = i + 1
                while j < n and raw_line[j] != '"':
                    j += 1
                if j >= n:
                    raise ParseFailure(line_start + n, "closing '\"' before end of line")
                tokens.append(Token("STRING", raw_line[i + 1 : j], at, line_start + j + 1))
                i = j + 1
                continue
            two = raw_line[i : i + 2]
            if two in _TWO_CHAR_OPS:
                tokens.append(Token("OP", two, at, at + 2))
                i += 2
                continue
            if ch in _ONE_CHAR_OPS:
                tokens.append(Token("OP", ch, at, at + 1))
                i += 1
                continue
            raise ParseFailure(at, "a mini-language token")
        line_end = line_start + n
        tokens.append(Token("NEWLINE", "", line_end, line_end))
    end = len(source)
    while depth > 0:
        tokens.append(Token("DEDENT", "", end, end))
        depth -= 1
    tokens.append(Token("EOF", "", end, end))
    return tokens


class _Parser:
    def __init__(self, source: str, tokens: list[Token]):
        self.source = source
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        k = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[k]

    def advance(self) -> Token:
        tok = self.tokens[self.i]
        if tok.type != "EOF":
            self.i += 1
        return tok

    def expect(self, type_: str, value: str | None = None) -> Token:
        tok = self.peek()
        if tok.type != type_ or (value is not None and tok.value != value):
            want = value if value is not None else type_
            raise ParseFailure(tok.start, f"{want!r}")
        return self.advance()

    # --- statements ---

    def parse_module(self) -> SyntaxNode:
        body = []
        while self.peek().type != "EOF":
            body.append(self.parse_statement())
        return SyntaxNode("Module", (0, len(self.source)), body=body)

    def parse_statement(self) -> SyntaxNode:
        tok = self.peek()
        if tok.type == "NAME":
            if tok.value == "def":
                return self.parse_funcdef()
            if tok.value == "if":
                return self.parse_if()
            if tok.value == "for":
                return self.parse_for()
            if tok.value == "while":
                return self.parse_while()
            if tok.value == "return":
                return self.parse_return()
            if tok.value == "print":
                return self.parse_print()
        if (
            tok.type == "NAME"
            and tok.value not in KEYWORDS
            and self.peek(1).type == "OP"
            and self.peek(1).value == "="
        ):
            name_tok = self.advance()
            self.advance()  # '='
            value = self.parse_expr()
            self.expect("NEWLINE")
            return SyntaxNode(
                "Assign", (name_tok.start, value.span[1]), name=name_tok.value, args=[value]
            )
        expr = self.parse_expr()
        self.expect("NEWLINE")
        return SyntaxNode("ExprStmt", expr.span, args=[expr])

    def parse_block(self) -> list[SyntaxNode]:
        self.expect("NEWLINE")
        self.expect("INDENT")
        body = [self.parse_statement()]
        while self.peek().type not in ("DEDENT", "EOF"):
            body.append(self.parse_statement())
        self.expect("DEDENT")
        return body

    def parse_funcdef(self) -> SyntaxNode:
        start = self.expect("NAME", "def").start
        name_tok = self.expect("NAME")
        if name_tok.value in KEYWORDS:
            raise ParseFailure(name_tok.start, "a function name")
        self.expect("OP", "(")
        params: list[str] = []
        if not (self.peek().type == "OP" and self.peek().value == ")"):
            while True:
                p = self.expect("NAME")
                if p.value in KEYWORDS:
                    raise ParseFailure(p.start, "a parameter name")
                if p.value in params:
                    raise ParseFailure(p.start, "a distinct parameter name")
                params.append(p.value)
                if self.peek().type == "OP" and self.peek().value == ",":
                    self.advance()
                    continue
                break
        self.expect("OP", ")")
        self.expect("OP", ":")
        body = self.parse_block()
        return SyntaxNode(
            "FunctionDef",
            (start, body[-1].span[1]),
            name=name_tok.value,
            params=tuple(params),
            body=body,
        )

    def parse_if(self) -> SyntaxNode:
        start = self.expect("NAME", "if").start
        test = self.parse_expr()
        self.expect("OP", ":")
        body = self.parse_block()
        orelse: list[SyntaxNode] = []
        if self.peek().type == "NAME" and self.peek().value == "else":
            self.advance()
            self.expect("OP", ":")
            orelse = self.parse_block()
        end = (orelse[-1] if orelse else body[-1]).span[1]
        return SyntaxNode("If", (start, end), test=test, body=body, orelse=orelse)

    def parse_for(self) -> SyntaxNode:
        start = self.expect("NAME", "for").start
        target = self.expect("NAME")
        if target.value in KEYWORDS:
            raise ParseFailure(target.start, "a loop variable name")
        self.expect("NAME", "in")
        self.expect("NAME", "range")
        self.expect("OP", "(")
        bound = self.parse_expr()
        self.expect("OP", ")")
        self.expect("OP", ":")
        body = self.parse_block()
        return SyntaxNode(
            "For", (start, body[-1].span[1]), name=target.value, test=bound, body=body
        )

    def parse_while(self) -> SyntaxNode:
        start = self.expect("NAME", "while").start
        test = self.parse_expr()
        self.expect("OP", ":")
        body = self.parse_block()
        return SyntaxNode("While", (start, body[-1].span[1]), test=test, body=body)

    def parse_return(self) -> SyntaxNode:
        tok = self.expect("NAME", "return")
        if self.peek().type == "NEWLINE":
            self.advance()
            return SyntaxNode("Return", (tok.start, tok.end))
        value = self.parse_expr()
        self.expect("NEWLINE")
        return SyntaxNode("Return", (tok.start, value.span[1]), args=[value])

    def parse_print(self) -> SyntaxNode:
        tok = self.expect("NAME", "print")
        self.expect("OP", "(")
        value = self.parse_expr()
        close = self.expect("OP", ")")
        self.expect("NEWLINE")
        return SyntaxNode("Print", (tok.start, close.end), args=[value])

    # --- expressions, lowest to highest precedence ---

    def parse_expr(self) -> SyntaxNode:
        return self.parse_or()

    def _left_assoc(self, sub, names: tuple[str, ...]) -> SyntaxNode:
        node = sub()
        while self.peek().type == "NAME" and self.peek().value in names:
            op = self.advance().value
            rhs = sub()
            node = SyntaxNode("BinOp", (node.span[0], rhs.span[1]), op=op, args=[node, rhs])
        return node

    def parse_or(self) -> SyntaxNode:
        return self._left_assoc(self.parse_and, ("or",))

    def parse_and(self) -> SyntaxNode:
        return self._left_assoc(self.parse_cmp, ("and",))

    def parse_cmp(self) -> SyntaxNode:
        node = self.parse_add()
        tok = self.peek()
        if tok.type == "OP" and tok.value in ("==", "!=", "<", ">"):
            op = self.advance().value
            rhs = self.parse_add()
            node = SyntaxNode("BinOp", (node.span[0], rhs.span[1]), op=op, args=[node, rhs])
        return node

    def parse_add(self) -> SyntaxNode:
        node = self.parse_mul()
        while self.peek().type == "OP" and self.peek().value in ("+", "-"):
            op = self.advance().value
            rhs = self.parse_mul()
            node = SyntaxNode("BinOp", (node.span[0], rhs.span[1]), op=op, args=[node, rhs])
        return node

    def parse_mul(self) -> SyntaxNode:
        node = self.parse_atom()
        while self.peek().type == "OP" and self.peek().value in ("*", "/", "%"):
            op = self.advance().value
            rhs = self.parse_atom()
            node = SyntaxNode("BinOp", (node.span[0], rhs.span[1]), op=op, args=[node, rhs])
        return node

    def parse_atom(self) -> SyntaxNode:
        tok = self.peek()
        if tok.type == "INT":
            self.advance()
            return SyntaxNode("Literal", (tok.start, tok.end), value=int(tok.value))
        if tok.type == "STRING":
            self.advance()
            return SyntaxNode("Literal", (tok.start, tok.end), value=tok.value)
        if tok.type == "OP" and tok.value == "(":
            open_tok = self.advance()
            inner = self.parse_expr()
            close = self.expect("OP", ")")
            inner.span = (open_tok.start, close.end)
            return inner
        if tok.type == "NAME" and tok.value not in KEYWORDS:
            self.advance()
            if self.peek().type == "OP" and self.peek().value == "(":
                self.advance()
                args: list[SyntaxNode] = []
                if not (self.peek().type == "OP" and self.peek().value == ")"):
                    while True:
                        args.append(self.parse_expr())
                        if self.peek().type == "OP" and self.peek().value == ",":
                            self.advance()
                            continue
                        break
                close = self.expect("OP", ")")
                return SyntaxNode("Call", (tok.start, close.end), name=tok.value, args=args)
            return SyntaxNode("Name", (tok.start, tok.end), name=tok.value)
        raise ParseFailure(tok.start, "an expression")


def parse(source: str) -> SyntaxNode:
    """Parse source into a Module tree; raises ParseFailure on any error."""
    if source.strip() == "":
        raise ParseFailure(0, "non-empty source")
    tokens = _lex(source)
    parser = _Parser(source, tokens)
    return parser.parse_module()
