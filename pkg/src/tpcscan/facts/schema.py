"""Column types of every relation the extractor emits."""

from ..datalog import NUMBER as N
from ..datalog import SYMBOL as S

INITIAL = {
    "instruction": (N, N, S, N, N, N, N),  # addr, size, opcode, op1..op4
    "op_regdirect": (N, S),  # code, register
    "op_immediate": (N, N),  # code, value
    "op_indirect": (N, S, S, N, N),  # code, base, index, scale, disp
    "op_symbol": (N, S),  # code, symbol
    "in_function": (N, S),  # addr, function
    "next": (N, N),  # addr, following addr
    "function_entry": (S, N),  # function, entry addr
}

USAGE = {
    "call_site": (N, S, S),  # site, caller, callee
    "ret_reg_checked": (N, S, N),  # site, cmp_op (or "any" if not a constant compare), value
    "ret_reg_forwarded": (N,),  # site whose result the caller returns unmodified
    "arg_def": (N, N, S, S),  # site, index, kind (imm|reg|unknown), value text
    "arg_imm": (N, N, N),  # site, index, value
    "arg_live_after": (N, N),  # site, index: the passed value survives the call
    "arg_freed_after": (N, N, S, N),  # site, index, later callee, its argument index
    "arg_checked_after": (N, N, S, N),  # site, index, cmp_op, value
    "param_passed_to": (S, N, S),  # function, its parameter index, callee
    "nearest_call_before": (N, N, S),  # site, k, callee
    "nearest_call_after": (N, N, S),  # site, k, callee
    "op_on_ret": (N, S, N, S),  # site, path predicate op, value, first callee on the path
}

SCHEMA = {**INITIAL, **USAGE}


def declarations(names=None) -> str:
    """Datalog ``.decl`` lines for the given relations (all by default)."""
    lines = []
    for name in names or SCHEMA:
        cols = ", ".join(f"c{i}:{t}" for i, t in enumerate(SCHEMA[name]))
        lines.append(f".decl {name}({cols})")
    return "\n".join(lines) + "\n"
