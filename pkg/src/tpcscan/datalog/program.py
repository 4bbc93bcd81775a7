"""Validated Datalog programs."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType

from .terms import (
    INT_MAX,
    INT_MIN,
    NUMBER,
    SYMBOL,
    Atom,
    BinOp,
    Constraint,
    Declaration,
    Literal,
    Rule,
    SafetyError,
    SchemaError,
    format_const,
    is_var,
    term_type,
)

INPUT = "input"
OUTPUT = "output"
INTERMEDIATE = "intermediate"


@dataclass(frozen=True)
class Program:
    """Declarations, rules and inline facts.

    Build through :func:`make_program` (or the parser) so the schema, type and
    safety checks run.
    """

    declarations: MappingProxyType
    inputs: frozenset
    outputs: frozenset
    rules: tuple
    facts: MappingProxyType = field(default_factory=lambda: MappingProxyType({}))

    def role(self, relation: str) -> str:
        if relation in self.inputs:
            return INPUT
        if relation in self.outputs:
            return OUTPUT
        return INTERMEDIATE

    def types(self, relation: str) -> tuple:
        return self.declarations[relation].types

    @property
    def schema(self) -> dict:
        return {name: d.types for name, d in self.declarations.items()}

    def defined_relations(self) -> set:
        return {r.head.relation for r in self.rules}

    def accepts_input(self, relation: str) -> bool:
        """Input relations are the ``.input`` ones plus any relation no rule defines."""
        if relation not in self.declarations:
            return False
        return relation in self.inputs or relation not in self.defined_relations()

    def to_text(self) -> str:
        lines = [str(d) for d in self.declarations.values()]
        for name in sorted(self.inputs):
            lines.append(f".input {name}")
        for name in sorted(self.outputs):
            lines.append(f".output {name}")
        for name in sorted(self.facts):
            for tup in sorted(self.facts[name]):
                lines.append(f"{name}({', '.join(format_const(v) for v in tup)}).")
        lines.extend(str(r) for r in self.rules)
        return "\n".join(lines) + "\n"


def _check_atom(atom: Atom, decls, var_types, line, positive: bool):
    decl = decls.get(atom.relation)
    if decl is None:
        raise SchemaError(f"undeclared relation '{atom.relation}'", line=line)
    if decl.arity != atom.arity:
        raise SchemaError(
            f"arity mismatch for '{atom.relation}': declared {decl.arity}, used with {atom.arity}",
            line=line,
        )
    for arg, typ in zip(atom.args, decl.types):
        if is_var(arg):
            if arg.anonymous:
                continue
            prev = var_types.get(arg)
            if prev is None:
                if positive:
                    var_types[arg] = typ
            elif prev != typ:
                raise SchemaError(
                    f"variable {arg} used as both {prev} and {typ}", line=line
                )
        elif term_type(arg) != typ:
            raise SchemaError(
                f"constant {format_const(arg)} does not match {typ} column of '{atom.relation}'",
                line=line,
            )


def _expr_type(expr, var_types, line):
    if isinstance(expr, BinOp):
        for side in (expr.left, expr.right):
            if _expr_type(side, var_types, line) != NUMBER:
                raise SchemaError(f"arithmetic on non-number in {expr}", line=line)
        return NUMBER
    if is_var(expr):
        return var_types.get(expr)
    return term_type(expr)


def check_rule(rule: Rule, decls):
    """Schema, type and range-restriction checks for one rule."""
    line = rule.line
    var_types = {}
    for lit in rule.positive:
        _check_atom(lit.atom, decls, var_types, line, positive=True)
    bound = set(var_types)
    for lit in rule.negative:
        _check_atom(lit.atom, decls, var_types, line, positive=False)
        unbound = {v for v in lit.atom.variables() if not v.anonymous} - bound
        if unbound:
            names = ", ".join(sorted(v.name for v in unbound))
            raise SafetyError(
                f"unsafe rule: variable(s) {names} in negated '{lit.atom.relation}' "
                "not bound by a positive literal",
                line=line,
            )
    for con in rule.constraints:
        cvars = con.variables()
        if any(v.anonymous for v in cvars):
            raise SafetyError("anonymous variable in constraint", line=line)
        unbound = cvars - bound
        if unbound:
            names = ", ".join(sorted(v.name for v in unbound))
            raise SafetyError(
                f"unsafe rule: variable(s) {names} in constraint '{con}' not bound "
                "by a positive literal",
                line=line,
            )
        lt = _expr_type(con.left, var_types, line)
        rt = _expr_type(con.right, var_types, line)
        if lt != rt:
            raise SchemaError(f"type mismatch in constraint '{con}'", line=line)
        if con.op not in ("=", "!=") and lt != NUMBER:
            raise SchemaError(f"ordering comparison on symbols in '{con}'", line=line)
    if any(is_var(a) and a.anonymous for a in rule.head.args):
        raise SafetyError("anonymous variable in rule head", line=line)
    _check_atom(rule.head, decls, dict(var_types), line, positive=False)
    unbound = rule.head.variables() - bound
    if unbound:
        names = ", ".join(sorted(v.name for v in unbound))
        raise SafetyError(
            f"unsafe rule: head variable(s) {names} not bound by a positive literal",
            line=line,
        )


def check_fact_tuple(relation: str, tup: tuple, types: tuple, line=None):
    if len(tup) != len(types):
        raise SchemaError(
            f"arity mismatch for '{relation}': declared {len(types)}, got {len(tup)}",
            line=line,
        )
    for value, typ in zip(tup, types):
        if term_type(value) != typ:
            raise SchemaError(
                f"value {value!r} does not match {typ} column of '{relation}'", line=line
            )
        if typ == NUMBER:
            if not INT_MIN <= value <= INT_MAX:
                raise SchemaError(f"integer {value} outside signed 64-bit range", line=line)


def make_program(declarations, rules=(), inputs=(), outputs=(), facts=None) -> Program:
    decls = {}
    for d in declarations:
        if d.name in decls:
            raise SchemaError(f"relation '{d.name}' declared twice", line=d.line)
        for _, typ in d.columns:
            if typ not in (NUMBER, SYMBOL):
                raise SchemaError(f"unknown column type '{typ}'", line=d.line)
        decls[d.name] = d
    for name in list(inputs) + list(outputs):
        if name not in decls:
            raise SchemaError(f"undeclared relation '{name}' in directive")
    rules = tuple(rules)
    for rule in rules:
        if not isinstance(rule, Rule) or not all(
            isinstance(b, (Literal, Constraint)) for b in rule.body
        ):
            raise TypeError("rules must be Rule objects with Literal/Constraint bodies")
        check_rule(rule, decls)
    fact_map = {}
    for name, tuples in (facts or {}).items():
        if name not in decls:
            raise SchemaError(f"undeclared relation '{name}'")
        checked = set()
        for tup in tuples:
            tup = tuple(tup)
            check_fact_tuple(name, tup, decls[name].types)
            checked.add(tup)
        fact_map[name] = frozenset(checked)
    return Program(
        declarations=MappingProxyType(decls),
        inputs=frozenset(inputs),
        outputs=frozenset(outputs),
        rules=rules,
        facts=MappingProxyType(fact_map),
    )
