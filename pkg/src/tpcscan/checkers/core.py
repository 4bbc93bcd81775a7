"""Running the generated checkers and turning derived tuples into Violations."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..datalog import FactStore, evaluate
from ..specs import CHECKER_OF, ProgrammingExpression, SpecSet
from .rules import CheckerConfig, compile_checker_rules

CATEGORIES = ("deprecated", "return_value", "argument", "causality")
_CATEGORY_OF = {
    "viol_ret": "return_value",
    "viol_arg": "argument",
    "unverif_arg": "argument",
    "viol_causality": "causality",
}

# usage relations whose first column is a call site
_SITE_RELATIONS = (
    "ret_reg_checked",
    "ret_reg_forwarded",
    "arg_def",
    "arg_imm",
    "arg_live_after",
    "arg_freed_after",
    "arg_checked_after",
    "nearest_call_before",
    "nearest_call_after",
    "op_on_ret",
)


@dataclass(frozen=True)
class Violation:
    category: str  # deprecated | return_value | argument | causality
    api: str
    tpc: str
    site: int
    caller: str
    kind: str
    expression: ProgrammingExpression | None = None
    evidence: tuple = field(default=(), compare=False)
    severity: str = "violation"  # or "unverifiable"

    @property
    def key(self):
        return (self.category, self.api, self.site, self.expression)

    def sort_key(self):
        expr = self.expression.text() if self.expression else ""
        return (self.site, CATEGORIES.index(self.category), self.api, self.kind, expr)

    def expression_text(self):
        if self.expression is None:
            return f"deprecated: {self.api}"
        return self.expression.short()


def fact_text(relation, tup):
    """``rel(0x1004, main, free)``: sites in hex, other values as written."""
    parts = []
    for i, v in enumerate(tup):
        if isinstance(v, int) and i == 0 and relation != "param_passed_to":
            parts.append(f"0x{v:x}")
        else:
            parts.append(str(v))
    return f"{relation}({', '.join(parts)})"


class _Evidence:
    def __init__(self, store: FactStore, cfg: CheckerConfig):
        self.store = store
        self.cfg = cfg
        self.by_site = {}
        for rel in _SITE_RELATIONS:
            for tup in store.get(rel):
                self.by_site.setdefault(tup[0], []).append((rel, tup))
        self.callers = {}
        for tup in store.get("call_site"):
            self.callers.setdefault(tup[2], []).append(tup)

    def at(self, site, relations, index=None):
        out = []
        for rel, tup in sorted(self.by_site.get(site, ())):
            if rel not in relations:
                continue
            if index is not None and rel.startswith("arg_") and tup[1] != index:
                continue
            if rel.startswith("nearest_call") and tup[1] > self.cfg.window:
                continue
            out.append(fact_text(rel, tup))
        return out

    def collect(self, site, caller, api, expr: ProgrammingExpression | None):
        facts = [fact_text("call_site", (site, caller, api))]
        if expr is None:
            facts += self.at(site, ("arg_def", "arg_imm"))
            return tuple(facts)
        op = expr.operation
        if op == "CHECK_RET":
            facts += self.at(site, ("ret_reg_checked", "ret_reg_forwarded"))
            if self.cfg.depth and (site,) in self.store.get("ret_reg_forwarded"):
                facts += sorted(fact_text("call_site", t) for t in self.callers.get(caller, ()))
        elif op == "CALL_BEFORE":
            facts += self.at(site, ("nearest_call_before",))
        elif op == "CALL_AFTER":
            facts += self.at(site, ("nearest_call_after",))
        elif op == "OP_ON_RET":
            facts += self.at(site, ("ret_reg_checked", "op_on_ret"))
        else:
            facts += self.at(
                site,
                ("arg_def", "arg_imm", "arg_live_after", "arg_freed_after", "arg_checked_after"),
                index=expr.args[0],
            )
        return tuple(facts)


def _collect(store, derived, specs: SpecSet, cfg, categories, include_unverifiable):
    ev = _Evidence(store, cfg)
    out = []
    for rel, category in _CATEGORY_OF.items():
        if category not in categories:
            continue
        severity = "unverifiable" if rel.startswith("unverif") else "violation"
        if severity == "unverifiable" and not include_unverifiable:
            continue
        for site, caller, api, kind, n in derived.get(rel):
            expr = specs.expressions[n]
            out.append(
                Violation(
                    category, api, expr.tpc, site, caller, kind, expr,
                    ev.collect(site, caller, api, expr), severity,
                )
            )
    if "deprecated" in categories:
        tpc_of = {}
        for dl in specs.deprecated:
            for entry in dl.entries:
                tpc_of.setdefault(entry.api, dl.tpc)
        for site, caller, api in derived.get("viol_deprecated"):
            out.append(
                Violation(
                    "deprecated", api, tpc_of[api], site, caller, "deprecated_call", None,
                    ev.collect(site, caller, api, None),
                )
            )
    return finalize(out)


def finalize(violations):
    """Drop duplicates on (category, api, site, expression) and order by site, then category."""
    seen = {}
    for v in sorted(violations, key=Violation.sort_key):
        seen.setdefault((v.severity,) + v.key, v)
    return sorted(seen.values(), key=Violation.sort_key)


def _subset(specs: SpecSet, category):
    exprs = tuple(e for e in specs.expressions if CHECKER_OF[e.operation] == category)
    return SpecSet(exprs, ())


def _run(store, specs, cfg, categories, include_unverifiable=True):
    cfg = cfg or CheckerConfig()
    derived = evaluate(compile_checker_rules(specs, cfg), store)
    return _collect(store, derived, specs, cfg, categories, include_unverifiable)


def check_deprecated(store: FactStore, lists, cfg: CheckerConfig | None = None):
    """Calls to listed deprecated APIs whose argument setup matches the listed arity."""
    return _run(store, SpecSet((), tuple(lists)), cfg, ("deprecated",))


def check_return(store: FactStore, specs: SpecSet, cfg: CheckerConfig | None = None):
    """Missing or inconsistent checks of API return values."""
    return _run(store, _subset(specs, "return_value"), cfg, ("return_value",))


def check_argument(store: FactStore, specs: SpecSet, cfg: CheckerConfig | None = None):
    """Argument constraints before and after calls; includes unverifiable findings."""
    return _run(store, _subset(specs, "argument"), cfg, ("argument",))


def check_causality(store: FactStore, specs: SpecSet, cfg: CheckerConfig | None = None):
    """Missing companion calls and missing or wrong operations under return-value guards.

    Needs the whole SpecSet: a missing guard is left to the return checker when a
    CHECK_RET expression for the same API fires at the site.
    """
    keep = tuple(e for e in specs.expressions if e.operation in ("CHECK_RET",) or CHECKER_OF[e.operation] == "causality")
    return _run(store, SpecSet(keep, ()), cfg, ("causality",))


def run_all(store: FactStore, specs: SpecSet, cfg: CheckerConfig | None = None):
    """Violations and unverifiable findings of all four checkers, in report order."""
    return _run(store, specs, cfg, CATEGORIES)
