"""Step-counted sandboxed interpreter for the mini-language.

The language has no host I/O primitives at all; the only observable effect is
simulated print output, captured into the result. Every statement and
expression evaluation costs one step against the budget, which makes
termination deterministic and wall-clock independent.
"""

from __future__ import annotations

from dataclasses import dataclass

from .nodes import SyntaxNode
from .parser import ParseFailure, parse

# Capabilities the `require(name)` builtin accepts; anything else fails the
# environment check.
ALLOWED_CAPABILITIES = frozenset({"math", "text", "util"})

_FOREIGN_MARKERS = ("{", "}", ";", "public static")

_CALL_DEPTH_LIMIT = 100


@dataclass(frozen=True)
class ExecBudget:
    max_steps: int = 10_000
    max_output_bytes: int = 65_536


@dataclass(frozen=True)
class ExecResult:
    status: str  # Ok ParseFailure UndefinedName TypeFault DivisionByZero
    # StepLimitExceeded EmptySource ForeignSyntax RequireFailed HostFault
    stdout: str
    steps_used: int
    detail: str = ""


def detect_foreign_syntax(source: str) -> bool:
    """Heuristic markers of a non-mini-language source (braces, ';', Java-isms)."""
    return any(marker in source for marker in _FOREIGN_MARKERS)


class _Fault(Exception):
    def __init__(self, status: str, detail: str = ""):
        self.status = status
        self.detail = detail


class _ReturnSignal(Exception):
    def __init__(self, value):
        self.value = value


class _Evaluator:
    def __init__(self, budget: ExecBudget):
        self.budget = budget
        self.steps = 0
        self.out_parts: list[str] = []
        self.out_len = 0
        self.globals: dict[str, object] = {}
        self.funcs: dict[str, SyntaxNode] = {}
        self.depth = 0

    def tick(self) -> None:
        if self.steps >= self.budget.max_steps:
            raise _Fault("StepLimitExceeded")
        self.steps += 1

    def emit(self, text: str) -> None:
        room = self.budget.max_output_bytes - self.out_len
        if room <= 0:
            return
        clipped = text[:room]
        self.out_parts.append(clipped)
        self.out_len += len(clipped)

    def run_module(self, module: SyntaxNode) -> None:
        for stmt in module.body:
            self.exec_stmt(stmt, self.globals)

    def exec_block(self, stmts: list[SyntaxNode], env: dict) -> None:
        for stmt in stmts:
            self.exec_stmt(stmt, env)

    def exec_stmt(self, node: SyntaxNode, env: dict) -> None:
        self.tick()
        kind = node.kind
        if kind == "Assign":
            env[node.name] = self.eval_expr(node.args[0], env)
        elif kind == "Print":
            value = self.eval_expr(node.args[0], env)
            self.emit(self.render(value) + "\n")
        elif kind == "ExprStmt":
            self.eval_expr(node.args[0], env)
        elif kind == "FunctionDef":
            self.funcs[node.name] = node
        elif kind == "If":
            if self.truthy(self.eval_expr(node.test, env)):
                self.exec_block(node.body, env)
            elif node.orelse:
                self.exec_block(node.orelse, env)
        elif kind == "While":
            while self.truthy(self.eval_expr(node.test, env)):
                self.exec_block(node.body, env)
                self.tick()
        elif kind == "For":
            bound = self.eval_expr(node.test, env)
            if not isinstance(bound, int):
                raise _Fault("TypeFault", "range bound must be an integer")
            for i in range(bound):
                env[node.name] = i
                self.exec_block(node.body, env)
                self.tick()
        elif kind == "Return":
            value = self.eval_expr(node.args[0], env) if node.args else 0
            raise _ReturnSignal(value)
        else:
            raise _Fault("HostFault", f"unexpected statement kind {kind}")

    def eval_expr(self, node: SyntaxNode, env: dict):
        self.tick()
        kind = node.kind
        if kind == "Literal":
            return node.value
        if kind == "Name":
            if node.name in env:
                return env[node.name]
            if node.name in self.globals:
                return self.globals[node.name]
            raise _Fault("UndefinedName", node.name)
        if kind == "BinOp":
            return self.eval_binop(node, env)
        if kind == "Call":
            return self.eval_call(node, env)
        raise _Fault("HostFault", f"unexpected expression kind {kind}")

    def eval_binop(self, node: SyntaxNode, env: dict):
        op = node.op
        if op == "and":
            lhs = self.eval_expr(node.args[0], env)
            return self.eval_expr(node.args[1], env) if self.truthy(lhs) else lhs
        if op == "or":
            lhs = self.eval_expr(node.args[0], env)
            return lhs if self.truthy(lhs) else self.eval_expr(node.args[1], env)
        lhs = self.eval_expr(node.args[0], env)
        rhs = self.eval_expr(node.args[1], env)
        if op == "==":
            return 1 if (type(lhs) is type(rhs) and lhs == rhs) else 0
        if op == "!=":
            return 0 if (type(lhs) is type(rhs) and lhs == rhs) else 1
        if op == "+":
            if isinstance(lhs, int) and isinstance(rhs, int):
                return lhs + rhs
            if isinstance(lhs, str) and isinstance(rhs, str):
                return lhs + rhs
            raise _Fault("TypeFault", "'+' needs two integers or two strings")
        if op in ("-", "*"):
            if isinstance(lhs, int) and isinstance(rhs, int):
                return lhs - rhs if op == "-" else lhs * rhs
            raise _Fault("TypeFault", f"{op!r} needs two integers")
        if op in ("/", "%"):
            if not (isinstance(lhs, int) and isinstance(rhs, int)):
                raise _Fault("TypeFault", f"{op!r} needs two integers")
            if rhs == 0:
                raise _Fault("DivisionByZero")
            return lhs // rhs if op == "/" else lhs % rhs
        if op in ("<", ">"):
            if isinstance(lhs, int) and isinstance(rhs, int) or (
                isinstance(lhs, str) and isinstance(rhs, str)
            ):
                return 1 if (lhs < rhs if op == "<" else lhs > rhs) else 0
            raise _Fault("TypeFault", f"{op!r} needs operands of one type")
        raise _Fault("HostFault", f"unexpected operator {op}")

    def eval_call(self, node: SyntaxNode, env: dict):
        args = [self.eval_expr(a, env) for a in node.args]
        fn = self.funcs.get(node.name)
        if fn is None:
            if node.name == "require":
                return self.builtin_require(args)
            raise _Fault("UndefinedName", node.name)
        if len(args) != len(fn.params):
            raise _Fault(
                "TypeFault",
                f"{node.name} expects {len(fn.params)} arguments, got {len(args)}",
            )
        if self.depth >= _CALL_DEPTH_LIMIT:
            raise _Fault("StepLimitExceeded", "call depth limit")
        frame = dict(zip(fn.params, args))
        self.depth += 1
        try:
            self.exec_block(fn.body, frame)
        except _ReturnSignal as sig:
            return sig.value
        finally:
            self.depth -= 1
        return 0

    def builtin_require(self, args: list):
        if len(args) != 1 or not isinstance(args[0], str):
            raise _Fault("TypeFault", "require expects one capability string")
        if args[0] in ALLOWED_CAPABILITIES:
            return 1
        raise _Fault("RequireFailed", args[0])

    @staticmethod
    def truthy(value) -> bool:
        return value != 0 if isinstance(value, int) else value != ""

    @staticmethod
    def render(value) -> str:
        return value if isinstance(value, str) else str(value)


def interpret(source: str, budget: ExecBudget = ExecBudget()) -> ExecResult:
    """Run source under the budget; all failures are statuses, never raises."""
    if source.strip() == "":
        return ExecResult("EmptySource", "", 0)
    if detect_foreign_syntax(source):
        return ExecResult("ForeignSyntax", "", 0)
    try:
        module = parse(source)
    except ParseFailure as e:
        return ExecResult("ParseFailure", "", 0, detail=str(e))
    ev = _Evaluator(budget)
    try:
        ev.run_module(module)
        status, detail = "Ok", ""
    except _Fault as f:
        status, detail = f.status, f.detail
    except _ReturnSignal:
        status, detail = "TypeFault", "return outside function"
    except RecursionError:
        status, detail = "StepLimitExceeded", "host recursion limit"
    except Exception as e:  # pragma: no cover - internal bug guard
        status, detail = "HostFault", repr(e)
    return ExecResult(status, "".join(ev.out_parts), ev.steps, detail=detail)
