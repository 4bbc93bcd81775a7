"""Core Datalog syntax objects.

Constants are plain Python values: ``int`` for numbers and ``str`` for
symbols.  Variables are :class:`Var` instances.  Everything here is frozen so
programs can be shared between threads once built.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SourceError

INT_MIN = -(2**63)
INT_MAX = 2**63 - 1

NUMBER = "number"
SYMBOL = "symbol"
TYPES = (NUMBER, SYMBOL)

COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")
ARITH_OPS = ("+", "-", "*")


class DatalogError(SourceError):
    """Base class for Datalog front-end and evaluation errors."""


class DatalogSyntaxError(DatalogError):
    pass


class SchemaError(DatalogError):
    """Undeclared relation, arity mismatch or type mismatch."""


class SafetyError(DatalogError):
    """A rule is not range restricted."""


class StratificationError(DatalogError):
    """Negation occurs inside a recursive cycle."""

    def __init__(self, message, cycle=(), **kw):
        self.cycle = tuple(cycle)
        super().__init__(message, **kw)


class EvaluationError(DatalogError):
    pass


@dataclass(frozen=True, order=True)
class Var:
    name: str

    @property
    def anonymous(self) -> bool:
        return self.name.startswith("_")

    def __str__(self):
        return "_" if self.anonymous else self.name


def is_var(term) -> bool:
    return isinstance(term, Var)


def term_type(value) -> str:
    if isinstance(value, bool):
        raise TypeError("booleans are not Datalog constants")
    if isinstance(value, int):
        return NUMBER
    if isinstance(value, str):
        return SYMBOL
    raise TypeError(f"not a Datalog constant: {value!r}")


def format_const(value) -> str:
    if isinstance(value, int):
        return str(value)
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'


def format_term(term) -> str:
    return str(term) if is_var(term) else format_const(term)


@dataclass(frozen=True)
class Atom:
    relation: str
    args: tuple

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self):
        return {a for a in self.args if is_var(a)}

    def is_ground(self) -> bool:
        return not any(is_var(a) for a in self.args)

    def __str__(self):
        return f"{self.relation}({', '.join(format_term(a) for a in self.args)})"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def variables(self):
        return _expr_vars(self.left) | _expr_vars(self.right)

    def __str__(self):
        return f"({_format_expr(self.left)} {self.op} {_format_expr(self.right)})"


def _expr_vars(expr):
    if is_var(expr):
        return {expr}
    if isinstance(expr, BinOp):
        return expr.variables()
    return set()


def _format_expr(expr):
    if isinstance(expr, BinOp):
        return str(expr)
    return format_term(expr)


@dataclass(frozen=True)
class Constraint:
    op: str
    left: object
    right: object

    def variables(self):
        return _expr_vars(self.left) | _expr_vars(self.right)

    def __str__(self):
        return f"{_format_expr(self.left)} {self.op} {_format_expr(self.right)}"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __str__(self):
        return ("!" if self.negated else "") + str(self.atom)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple  # of Literal | Constraint
    line: int | None = field(default=None, compare=False)

    @property
    def positive(self):
        return [b for b in self.body if isinstance(b, Literal) and not b.negated]

    @property
    def negative(self):
        return [b for b in self.body if isinstance(b, Literal) and b.negated]

    @property
    def constraints(self):
        return [b for b in self.body if isinstance(b, Constraint)]

    def __str__(self):
        return f"{self.head} :- {', '.join(str(b) for b in self.body)}."


@dataclass(frozen=True)
class Declaration:
    name: str
    columns: tuple  # of (column name, type)
    line: int | None = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.columns)

    @property
    def types(self) -> tuple:
        return tuple(t for _, t in self.columns)

    def __str__(self):
        cols = ", ".join(f"{n}:{t}" for n, t in self.columns)
        return f".decl {self.name}({cols})"


def check_int_range(value: int):
    if not INT_MIN <= value <= INT_MAX:
        raise EvaluationError(f"integer {value} outside signed 64-bit range")
    return value


def eval_expr(expr, env):
    """Evaluate a constraint-side expression with ``env`` binding variables."""
    if is_var(expr):
        return env[expr]
    if isinstance(expr, BinOp):
        left = eval_expr(expr.left, env)
        right = eval_expr(expr.right, env)
        if expr.op == "+":
            return check_int_range(left + right)
        if expr.op == "-":
            return check_int_range(left - right)
        return check_int_range(left * right)
    return expr


def compare(op: str, left, right) -> bool:
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    raise ValueError(op)
