"""SkillScript: the straight-line command language the model is asked to emit.

One statement per line::

    takeoff()
    let pos = get_drone_position()   # `let` is optional
    fly_to(pos.x, pos.y, pos.z + 5)

Expressions support numbers, variables, ``name.x/.y/.z`` on position
values, unary minus, ``+ - * /``, the constant ``pi`` and a fixed set of
math functions. There are no loops, conditionals or user functions.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from gsce.dronesim import Simulator, SimulatorError, Vec3

SKILLS = frozenset({"takeoff", "land", "get_yaw", "set_yaw", "fly_to", "get_drone_position"})
MATH_FUNCTIONS = frozenset(
    {"sin", "cos", "tan", "atan2", "sqrt", "abs", "min", "max", "radians", "degrees"}
)
CONSTANTS = {"pi": math.pi}
AXES = ("x", "y", "z")
DEFAULT_STEP_LIMIT = 1000

ERROR_CATEGORIES = ("ParseError", "UnknownFunction", "RuntimeError", "StepLimitExceeded")


# -- errors -----------------------------------------------------------------


class SkillScriptError(Exception):
    """Base class; ``category`` is one of :data:`ERROR_CATEGORIES`."""

    category = "RuntimeError"

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


class ParseError(SkillScriptError):
    category = "ParseError"


class UnknownFunction(SkillScriptError):
    category = "UnknownFunction"


class ScriptRuntimeError(SkillScriptError):
    category = "RuntimeError"


class StepLimitExceeded(SkillScriptError):
    category = "StepLimitExceeded"


# -- syntax tree ------------------------------------------------------------
# Source positions are excluded from equality so that structurally identical
# programs compare equal regardless of layout.


@dataclass(frozen=True)
class Number:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Constant:
    name: str


@dataclass(frozen=True)
class FieldAccess:
    base: str
    axis: str


@dataclass(frozen=True)
class Neg:
    operand: Expr


@dataclass(frozen=True)
class BinOp:
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple[Expr, ...]
    line: int | None = field(default=None, compare=False)
    column: int | None = field(default=None, compare=False)


Expr = Union[Number, Var, Constant, FieldAccess, Neg, BinOp, Call]


@dataclass(frozen=True)
class Assignment:
    name: str
    value: Expr
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class SkillCall:
    name: str
    args: tuple[Expr, ...]
    line: int | None = field(default=None, compare=False)


Statement = Union[Assignment, SkillCall]


@dataclass(frozen=True)
class SkillProgram:
    statements: tuple[Statement, ...] = ()


# -- lexer ------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\f\v]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/=(),.])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # "number", "name", "op", "eol"
    text: str
    line: int
    column: int


def tokenize_line(text: str, line: int) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos + 1)
        kind = m.lastgroup
        if kind == "number":
            # a trailing name right after a number (``5m``) is not a valid token boundary
            if m.end() < len(text) and (text[m.end()].isalpha() or text[m.end()] == "_"):
                raise ParseError(f"malformed number near {text[pos:m.end() + 1]!r}", line, pos + 1)
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, m.group(), line, pos + 1))
        pos = m.end()
    tokens.append(Token("eol", "", line, len(text) + 1))
    return tokens


# -- parser -----------------------------------------------------------------


class _LineParser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def error(self, msg: str) -> ParseError:
        t = self.tok
        found = "end of line" if t.kind == "eol" else repr(t.text)
        return ParseError(f"{msg}, found {found}", t.line, t.column)

    def expect_op(self, text: str) -> Token:
        if self.tok.kind == "op" and self.tok.text == text:
            return self.advance()
        raise self.error(f"expected {text!r}")

    def at_op(self, *texts: str) -> bool:
        return self.tok.kind == "op" and self.tok.text in texts

    def statement(self) -> Statement:
        start = self.tok
        if start.kind != "name":
            raise self.error("expected a statement")
        if start.text == "let":
            self.advance()
            if self.tok.kind != "name":
                raise self.error("expected a variable name after 'let'")
            return self._assignment(self.advance())
        name = self.advance()
        if self.at_op("="):
            return self._assignment(name)
        if self.at_op("("):
            args = self._arguments()
            self._end()
            return SkillCall(name.text, args, line=name.line)
        raise self.error("expected '=' or '('")

    def _assignment(self, name: Token) -> Assignment:
        if name.text == "let" or name.text in CONSTANTS:
            raise ParseError(f"cannot assign to {name.text!r}", name.line, name.column)
        self.expect_op("=")
        value = self.expr()
        self._end()
        return Assignment(name.text, value, line=name.line)

    def _end(self) -> None:
        if self.tok.kind != "eol":
            raise self.error("expected end of statement")

    def _arguments(self) -> tuple[Expr, ...]:
        self.expect_op("(")
        args: list[Expr] = []
        if not self.at_op(")"):
            args.append(self.expr())
            while self.at_op(","):
                self.advance()
                args.append(self.expr())
        self.expect_op(")")
        return tuple(args)

    def expr(self) -> Expr:
        left = self.term()
        while self.at_op("+", "-"):
            op = self.advance().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.at_op("*", "/"):
            op = self.advance().text
            left = BinOp(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.at_op("-"):
            self.advance()
            return Neg(self.unary())
        return self.atom()

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "number":
            self.advance()
            value = float(t.text)
            if not math.isfinite(value):
                raise ParseError(f"number literal {t.text} is out of range", t.line, t.column)
            return Number(value)
        if t.kind == "name":
            if t.text == "let":
                raise self.error("unexpected keyword")
            self.advance()
            if self.at_op("("):
                return Call(t.text, self._arguments(), line=t.line, column=t.column)
            if self.at_op("."):
                self.advance()
                axis = self.tok
                if axis.kind != "name" or axis.text not in AXES:
                    raise self.error("expected field x, y or z")
                self.advance()
                return FieldAccess(t.text, axis.text)
            if t.text in CONSTANTS:
                return Constant(t.text)
            return Var(t.text)
        if self.at_op("("):
            self.advance()
            inner = self.expr()
            self.expect_op(")")
            return inner
        raise self.error("expected an expression")


def parse(source: str) -> SkillProgram:
    """Parse SkillScript text. Raises :class:`ParseError`."""
    statements: list[Statement] = []
    for lineno, raw in enumerate(source.replace("\r\n", "\n").split("\n"), start=1):
        tokens = tokenize_line(raw, lineno)
        if tokens[0].kind == "eol":
            continue
        statements.append(_LineParser(tokens).statement())
    return SkillProgram(tuple(statements))


# -- pretty printer ---------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return 3
    return 4


def format_number(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") and "e" not in text else text


def format_expr(e: Expr) -> str:
    if isinstance(e, Number):
        text = format_number(e.value)
        return f"({text})" if e.value < 0 or text.startswith("-") else text
    if isinstance(e, (Var, Constant)):
        return e.name
    if isinstance(e, FieldAccess):
        return f"{e.base}.{e.axis}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(format_expr(a) for a in e.args)})"
    if isinstance(e, Neg):
        inner = format_expr(e.operand)
        return f"-({inner})" if _prec(e.operand) < 3 else f"-{inner}"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left = format_expr(e.left)
        right = format_expr(e.right)
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


def pretty_print(program: SkillProgram) -> str:
    lines = []
    for st in program.statements:
        if isinstance(st, Assignment):
            lines.append(f"let {st.name} = {format_expr(st.value)}")
        else:
            lines.append(f"{st.name}({', '.join(format_expr(a) for a in st.args)})")
    return "\n".join(lines)


# -- interpreter ------------------------------------------------------------


class Unit:
    """Result of a skill that returns nothing."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "Unit"


UNIT = Unit()
Value = Union[float, Vec3, Unit]


@dataclass
class ExecutionOutcome:
    ok: bool
    error: SkillScriptError | None = None
    steps: int = 0

    @property
    def category(self) -> str | None:
        return None if self.error is None else self.error.category


def _describe(v: Value) -> str:
    if isinstance(v, Vec3):
        return "a position"
    if isinstance(v, Unit):
        return "nothing (the result of a void skill)"
    return "a number"


def _number(v: Value, what: str, line: int | None) -> float:
    if isinstance(v, float):
        return v
    raise ScriptRuntimeError(f"{what} expects a number, got {_describe(v)}", line)


def _finite(v: float, line: int | None) -> float:
    if not math.isfinite(v):
        raise ScriptRuntimeError(f"expression produced a non-finite value ({v!r})", line)
    return v


_ONE_ARG = {
    "sin": math.sin,
    "cos": math.cos,
    "tan": math.tan,
    "sqrt": math.sqrt,
    "abs": abs,
    "radians": math.radians,
    "degrees": math.degrees,
}


def _call_math(name: str, args: list[float], line: int | None) -> float:
    try:
        if name in _ONE_ARG:
            if len(args) != 1:
                raise ScriptRuntimeError(f"{name}() takes 1 argument, got {len(args)}", line)
            return float(_ONE_ARG[name](args[0]))
        if name == "atan2":
            if len(args) != 2:
                raise ScriptRuntimeError(f"atan2() takes 2 arguments, got {len(args)}", line)
            return math.atan2(args[0], args[1])
        if not args:
            raise ScriptRuntimeError(f"{name}() needs at least 1 argument", line)
        return float(min(args) if name == "min" else max(args))
    except (ValueError, OverflowError) as exc:
        raise ScriptRuntimeError(f"{name}(): {exc}", line) from None


_SKILL_ARITY = {
    "takeoff": (0, 0),
    "land": (0, 0),
    "get_yaw": (0, 0),
    "get_drone_position": (0, 0),
    "set_yaw": (1, 1),
    "fly_to": (3, 4),
}


class Interpreter:
    """Evaluates a program against one simulator. The environment is a flat scope."""

    def __init__(self, sim: Simulator, step_limit: int = DEFAULT_STEP_LIMIT):
        self.sim = sim
        self.step_limit = step_limit
        self.env: dict[str, Value] = {}

    def run(self, program: SkillProgram) -> ExecutionOutcome:
        steps = 0
        try:
            for st in program.statements:
                if steps >= self.step_limit:
                    raise StepLimitExceeded(
                        f"program exceeds the step limit of {self.step_limit} statements", st.line
                    )
                steps += 1
                self.execute(st)
        except SkillScriptError as exc:
            return ExecutionOutcome(False, exc, steps)
        return ExecutionOutcome(True, None, steps)

    def execute(self, st: Statement) -> None:
        if isinstance(st, Assignment):
            self.env[st.name] = self.evaluate(st.value, st.line)
        else:
            if st.name not in SKILLS:
                raise UnknownFunction(f"unknown skill {st.name!r}", st.line)
            self.call_skill(st.name, [self.evaluate(a, st.line) for a in st.args], st.line)

    def call_skill(self, name: str, args: list[Value], line: int | None) -> Value:
        lo, hi = _SKILL_ARITY[name]
        if not lo <= len(args) <= hi:
            expected = str(lo) if lo == hi else f"{lo} to {hi}"
            raise ScriptRuntimeError(f"{name}() takes {expected} arguments, got {len(args)}", line)
        nums = [_number(a, f"{name}()", line) for a in args]
        try:
            result = getattr(self.sim, name)(*nums)
        except SimulatorError as exc:
            raise ScriptRuntimeError(str(exc), line) from None
        if result is None:
            return UNIT
        return result if isinstance(result, Vec3) else float(result)

    def evaluate(self, e: Expr, line: int | None = None) -> Value:
        if isinstance(e, Number):
            return e.value
        if isinstance(e, Constant):
            return CONSTANTS[e.name]
        if isinstance(e, Var):
            try:
                return self.env[e.name]
            except KeyError:
                raise ScriptRuntimeError(f"undefined variable {e.name!r}", line) from None
        if isinstance(e, FieldAccess):
            base = self.env.get(e.base)
            if base is None:
                raise ScriptRuntimeError(f"undefined variable {e.base!r}", line)
            if not isinstance(base, Vec3):
                raise ScriptRuntimeError(
                    f"field access .{e.axis} on {_describe(base)} ({e.base!r})", line
                )
            return getattr(base, e.axis)
        if isinstance(e, Neg):
            return -_number(self.evaluate(e.operand, line), "unary '-'", line)
        if isinstance(e, BinOp):
            a = _number(self.evaluate(e.left, line), f"operator {e.op!r}", line)
            b = _number(self.evaluate(e.right, line), f"operator {e.op!r}", line)
            if e.op == "+":
                r = a + b
            elif e.op == "-":
                r = a - b
            elif e.op == "*":
                r = a * b
            else:
                if b == 0.0:
                    raise ScriptRuntimeError("division by zero", line)
                r = a / b
            return _finite(r, line)
        if isinstance(e, Call):
            line = e.line if e.line is not None else line
            if e.name in MATH_FUNCTIONS:
                args = [_number(self.evaluate(a, line), f"{e.name}()", line) for a in e.args]
                return _finite(_call_math(e.name, args, line), line)
            if e.name in SKILLS:
                return self.call_skill(e.name, [self.evaluate(a, line) for a in e.args], line)
            raise UnknownFunction(f"unknown function {e.name!r}", line, e.column)
        raise TypeError(f"not an expression node: {e!r}")


def interpret(
    program: SkillProgram, sim: Simulator, step_limit: int = DEFAULT_STEP_LIMIT
) -> ExecutionOutcome:
    """Run ``program`` on ``sim``; stops at the first error, which is reported in the outcome."""
    return Interpreter(sim, step_limit).run(program)
