"""A small Datalog engine: Soufflé-like syntax, stratified negation, semi-naive evaluation."""

from .engine import evaluate, query
from .parser import parse_atom, parse_program
from .program import Program, make_program
from .store import FactStore, merge_stores, read_facts, write_facts
from .stratify import StratifiedProgram, stratify
from .terms import (
    NUMBER,
    SYMBOL,
    Atom,
    BinOp,
    Constraint,
    DatalogError,
    DatalogSyntaxError,
    Declaration,
    EvaluationError,
    Literal,
    Rule,
    SafetyError,
    SchemaError,
    StratificationError,
    Var,
)

__all__ = [
    "NUMBER",
    "SYMBOL",
    "Atom",
    "BinOp",
    "Constraint",
    "DatalogError",
    "DatalogSyntaxError",
    "Declaration",
    "EvaluationError",
    "FactStore",
    "Literal",
    "Program",
    "Rule",
    "SafetyError",
    "SchemaError",
    "StratificationError",
    "StratifiedProgram",
    "Var",
    "evaluate",
    "make_program",
    "merge_stores",
    "parse_atom",
    "parse_program",
    "query",
    "read_facts",
    "stratify",
    "write_facts",
]
