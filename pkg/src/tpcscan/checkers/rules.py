"""Generation of the Datalog checker program from a SpecSet."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

from ..datalog import Program, parse_program
from ..facts.schema import SCHEMA, declarations
from ..specs import ANY_CHECK, CHECKER_OF, SpecSet

NEGATE = {"eq": "ne", "ne": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}
_CMP = {"eq": "=", "ne": "!=", "lt": "<", "le": "<=", "gt": ">", "ge": ">="}

OUTPUTS = {
    "viol_ret": "s:number, caller:symbol, api:symbol, kind:symbol, expr:number",
    "viol_arg": "s:number, caller:symbol, api:symbol, kind:symbol, expr:number",
    "unverif_arg": "s:number, caller:symbol, api:symbol, kind:symbol, expr:number",
    "viol_causality": "s:number, caller:symbol, api:symbol, kind:symbol, expr:number",
    "viol_deprecated": "s:number, caller:symbol, api:symbol",
}


@dataclass(frozen=True)
class CheckerConfig:
    window: int = 5  # nearest calls inspected on each side
    depth: int = 1  # caller levels a return check or free may be deferred to
    arg_registers: int = 4  # argument registers of the scanned ISA

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be at least 1")
        if self.depth not in (0, 1):
            raise ValueError("depth must be 0 or 1")
        if self.arg_registers < 1:
            raise ValueError("arg_registers must be at least 1")


def equivalent_predicates(op, value):
    """All (op, constant) pairs that hold on exactly the same integers as ``x op value``."""
    out = {(op, value)}
    if op == "gt":
        out.add(("ge", value + 1))
    elif op == "ge":
        out.add(("gt", value - 1))
    elif op == "lt":
        out.add(("le", value - 1))
    elif op == "le":
        out.add(("lt", value + 1))
    return out


def agreeing_predicates(op, value):
    """Observed branch predicates that are consistent with a required ``x op value``.

    A branch may test the requirement or its failure, so the negation counts too.
    """
    return equivalent_predicates(op, value) | equivalent_predicates(NEGATE[op], value)


def _q(name):
    return '"' + name.replace("\\", "\\\\").replace('"', '\\"') + '"'


class _Writer:
    def __init__(self, cfg: CheckerConfig):
        self.cfg = cfg
        self.lines = []
        self.helpers = set()

    def emit(self, *lines):
        self.lines.extend(lines)

    def decl(self, name, cols):
        self.emit(f".decl {name}({cols})")

    def facts(self, name, pairs):
        self.decl(name, "op:symbol, v:number")
        for o, v in sorted(pairs):
            self.emit(f"{name}({_q(o)}, {v}).")

    def need(self, helper):
        self.helpers.add(helper)


_HELPERS = {
    "checked": [
        "// a compare or test of the result register was seen at the site",
        ".decl checked(s:number)",
        "checked(S) :- ret_reg_checked(S, _, _).",
    ],
    "checked_any": [
        ".decl checked_any(s:number)",
        'checked_any(S) :- ret_reg_checked(S, "any", _).',
    ],
    "fwd_checked": [
        "// depth 1: the caller returns the result and every call of the caller checks it",
        ".decl caller_unchecked(f:symbol)",
        "caller_unchecked(F) :- call_site(S, _, F), !checked(S).",
        ".decl has_callers(f:symbol)",
        "has_callers(F) :- call_site(_, _, F).",
        ".decl fwd_checked(s:number)",
        "fwd_checked(S) :- ret_reg_forwarded(S), call_site(S, W, _), has_callers(W), !caller_unchecked(W).",
    ],
    "arg_defined": [
        ".decl arg_defined(s:number, i:number)",
        "arg_defined(S, I) :- arg_def(S, I, _, _).",
    ],
}
_HELPER_ORDER = ("checked", "checked_any", "fwd_checked", "arg_defined")


def _check_ret(w: _Writer, n, api, args):
    op, value = args
    a = _q(api)
    w.need("checked")
    unchecked = f"call_site(S, W, {a}), !checked(S)"
    if w.cfg.depth >= 1:
        w.need("fwd_checked")
        unchecked += ", !fwd_checked(S)"
    w.emit(f'viol_ret(S, W, {a}, "missing_check", {n}) :- {unchecked}.')
    if op == ANY_CHECK:
        return
    w.need("checked_any")
    w.facts(f"ret_agree_{n}", agreeing_predicates(op, value))
    w.decl(f"ret_ok_{n}", "s:number")
    w.emit(
        f"ret_ok_{n}(S) :- call_site(S, _, {a}), ret_reg_checked(S, O, V), ret_agree_{n}(O, V).",
        f'viol_ret(S, W, {a}, "incorrect_check", {n}) :- '
        f"call_site(S, W, {a}), checked(S), !checked_any(S), !ret_ok_{n}(S).",
    )


def _call_side(w: _Writer, n, api, callee, side):
    a, f = _q(api), _q(callee)
    rel = f"{side}_ok_{n}"
    w.decl(rel, "s:number")
    w.emit(
        f"{rel}(S) :- call_site(S, _, {a}), nearest_call_{side}(S, K, {f}), K <= {w.cfg.window}.",
        f'viol_causality(S, W, {a}, "missing_{side}", {n}) :- call_site(S, W, {a}), !{rel}(S).',
    )


def _op_on_ret(w: _Writer, n, api, args, ret_ids):
    op, value, callee = args
    a, f = _q(api), _q(callee)
    w.facts(f"guard_agree_{n}", agreeing_predicates(op, value))
    w.facts(f"path_holds_{n}", equivalent_predicates(op, value))
    w.decl(f"guard_{n}", "s:number")
    w.decl(f"op_ok_{n}", "s:number")
    w.decl(f"op_other_{n}", "s:number")
    w.emit(
        f"guard_{n}(S) :- call_site(S, _, {a}), ret_reg_checked(S, O, V), guard_agree_{n}(O, V).",
        f"op_ok_{n}(S) :- call_site(S, _, {a}), op_on_ret(S, O, V, {f}), path_holds_{n}(O, V).",
        f"op_other_{n}(S) :- call_site(S, _, {a}), op_on_ret(S, O, V, G), path_holds_{n}(O, V), G != {f}.",
        f'viol_causality(S, W, {a}, "wrong_op", {n}) :- '
        f"call_site(S, W, {a}), guard_{n}(S), !op_ok_{n}(S), op_other_{n}(S).",
        f'viol_causality(S, W, {a}, "missing_op", {n}) :- '
        f"call_site(S, W, {a}), guard_{n}(S), !op_ok_{n}(S), !op_other_{n}(S).",
    )
    no_guard = f"call_site(S, W, {a}), !guard_{n}(S)"
    if ret_ids:
        # a CHECK_RET violation at the same site already covers the missing guard
        w.decl(f"ret_fired_{n}", "s:number")
        for r in ret_ids:
            w.emit(f"ret_fired_{n}(S) :- viol_ret(S, _, {a}, _, {r}).")
        no_guard += f", !ret_fired_{n}(S)"
    w.emit(f'viol_causality(S, W, {a}, "no_guard", {n}) :- {no_guard}.')


def _not_tracked(w: _Writer, n, api):
    a = _q(api)
    w.emit(f'unverif_arg(S, W, {a}, "not_tracked", {n}) :- call_site(S, W, {a}).')


def _arg_pre(w: _Writer, n, api, args):
    index, op, value = args
    if index > w.cfg.arg_registers:
        return _not_tracked(w, n, api)
    a = _q(api)
    w.need("arg_defined")
    w.emit(
        f'viol_arg(S, W, {a}, "bad_value", {n}) :- '
        f"call_site(S, W, {a}), arg_imm(S, {index}, C), C {_CMP[NEGATE[op]]} {value}.",
        f'unverif_arg(S, W, {a}, "not_constant", {n}) :- '
        f'call_site(S, W, {a}), arg_def(S, {index}, K, _), K != "imm".',
        f'unverif_arg(S, W, {a}, "not_defined", {n}) :- '
        f"call_site(S, W, {a}), !arg_defined(S, {index}).",
    )


def _arg_post(w: _Writer, n, api, args):
    index, op, value = args
    if index > w.cfg.arg_registers:
        return _not_tracked(w, n, api)
    a = _q(api)
    w.facts(f"post_agree_{n}", agreeing_predicates(op, value))
    w.decl(f"post_ok_{n}", "s:number")
    w.emit(
        f"post_ok_{n}(S) :- call_site(S, _, {a}), arg_checked_after(S, {index}, O, V), post_agree_{n}(O, V).",
        f'viol_arg(S, W, {a}, "unchecked_after", {n}) :- '
        f"call_site(S, W, {a}), !post_ok_{n}(S), arg_live_after(S, {index}).",
        f'unverif_arg(S, W, {a}, "not_tracked", {n}) :- '
        f"call_site(S, W, {a}), !post_ok_{n}(S), !arg_live_after(S, {index}).",
    )


def _free_arg(w: _Writer, n, api, args):
    index, callee = args
    if index > w.cfg.arg_registers:
        return _not_tracked(w, n, api)
    a, f = _q(api), _q(callee)
    w.decl(f"freed_{n}", "s:number")
    w.emit(f"freed_{n}(S) :- call_site(S, _, {a}), arg_freed_after(S, {index}, {f}, _).")
    if w.cfg.depth >= 1:
        w.emit(
            f"freed_{n}(S) :- call_site(S, _, {a}), arg_freed_after(S, {index}, G, J), "
            f"param_passed_to(G, J, {f})."
        )
    w.emit(
        f'viol_arg(S, W, {a}, "not_freed", {n}) :- '
        f"call_site(S, W, {a}), !freed_{n}(S), arg_live_after(S, {index}).",
        f'unverif_arg(S, W, {a}, "not_tracked", {n}) :- '
        f"call_site(S, W, {a}), !freed_{n}(S), !arg_live_after(S, {index}).",
    )


def _deprecated(w: _Writer, k, entry):
    a = _q(entry.api)
    body = [f"call_site(S, W, {a})"]
    counted = min(entry.arity, w.cfg.arg_registers)
    if counted:
        w.need("arg_defined")
    body += [f"arg_defined(S, {i})" for i in range(1, counted + 1)]
    ptrs = [i for i, t in enumerate(entry.types, 1) if t == "ptr" and i <= counted]
    if ptrs:
        # a pointer argument built from a nonzero constant: probably a different function
        w.decl(f"badtype_{k}", "s:number")
        for i in ptrs:
            w.emit(f"badtype_{k}(S) :- call_site(S, _, {a}), arg_imm(S, {i}, C), C != 0.")
        body.append(f"!badtype_{k}(S)")
    w.emit(f"viol_deprecated(S, W, {a}) :- {', '.join(body)}.")


def _rule_text(specs: SpecSet, cfg: CheckerConfig) -> str:
    w = _Writer(cfg)
    ret_ids = {}
    for n, e in enumerate(specs.expressions):
        if e.operation == "CHECK_RET":
            ret_ids.setdefault(e.api, []).append(n)
    for n, e in enumerate(specs.expressions):
        if e.operation not in CHECKER_OF:
            raise ValueError(f"no checker for operation {e.operation}")
        w.emit("", f"// [{n}] {e.text()}")
        if e.operation == "CHECK_RET":
            _check_ret(w, n, e.api, e.args)
        elif e.operation == "CALL_BEFORE":
            _call_side(w, n, e.api, e.args[0], "before")
        elif e.operation == "CALL_AFTER":
            _call_side(w, n, e.api, e.args[0], "after")
        elif e.operation == "OP_ON_RET":
            _op_on_ret(w, n, e.api, e.args, ret_ids.get(e.api, ()))
        elif e.operation == "ARG_PRE":
            _arg_pre(w, n, e.api, e.args)
        elif e.operation == "ARG_POST":
            _arg_post(w, n, e.api, e.args)
        else:
            _free_arg(w, n, e.api, e.args)
    k = 0
    for dl in specs.deprecated:
        for entry in dl.entries:
            w.emit("", f"// [d{k}] {dl.tpc} deprecated: {entry.api}/{entry.arity}")
            _deprecated(w, k, entry)
            k += 1

    head = ["// facts", declarations().rstrip("\n")]
    head += [f".input {name}" for name in SCHEMA]
    head += ["", "// checker outputs"]
    head += [f".decl {name}({cols})" for name, cols in OUTPUTS.items()]
    head += [f".output {name}" for name in OUTPUTS]
    helpers = []
    for h in _HELPER_ORDER:
        if h in w.helpers:
            helpers += [""] + _HELPERS[h]
    return "\n".join(head + helpers + w.lines) + "\n"


@lru_cache(maxsize=64)
def _compile(specs: SpecSet, cfg: CheckerConfig):
    text = _rule_text(specs, cfg)
    return text, parse_program(text, source="<checkers>")


def compile_checker_rules(specs: SpecSet, cfg: CheckerConfig | None = None) -> Program:
    """Stratified-ready Datalog program deriving the ``viol_*`` relations for ``specs``."""
    return _compile(specs, cfg or CheckerConfig())[1]


def checker_rules_text(specs: SpecSet, cfg: CheckerConfig | None = None) -> str:
    """The generated program as rule text, for ``--emit-rules``."""
    return _compile(specs, cfg or CheckerConfig())[0]
