"""The four usage-violation checkers, compiled to Datalog."""

from .core import (
    CATEGORIES,
    Violation,
    check_argument,
    check_causality,
    check_deprecated,
    check_return,
    fact_text,
    finalize,
    run_all,
)
from .rules import (
    CheckerConfig,
    agreeing_predicates,
    checker_rules_text,
    compile_checker_rules,
    equivalent_predicates,
)

__all__ = [
    "CATEGORIES",
    "CheckerConfig",
    "Violation",
    "agreeing_predicates",
    "check_argument",
    "check_causality",
    "check_deprecated",
    "check_return",
    "checker_rules_text",
    "compile_checker_rules",
    "equivalent_predicates",
    "fact_text",
    "finalize",
    "run_all",
]
