"""Instruction-level facts: one tuple per instruction plus operand tables."""

from __future__ import annotations

from ..datalog import FactStore
from .listing import ListingModel
from .schema import INITIAL


def emit_initial_facts(model: ListingModel) -> FactStore:
    """Encode every instruction and its operands.

    Operand codes are dense integers assigned in listing order; identical
    operands share a code and 0 stands for an absent operand.
    """
    codes = {}
    rels = {name: set() for name in INITIAL}

    def code_of(op):
        if op in codes:
            return codes[op]
        code = len(codes) + 1
        codes[op] = code
        if op.kind == "reg":
            rels["op_regdirect"].add((code, op.reg))
        elif op.kind == "imm":
            rels["op_immediate"].add((code, op.value))
        elif op.kind == "mem":
            rels["op_indirect"].add(
                (code, op.base or "none", op.index or "none", op.scale, op.disp)
            )
        else:
            rels["op_symbol"].add((code, op.symbol))
        return code

    for func in model.functions:
        rels["function_entry"].add((func.name, func.entry))
        prev = None
        for ins in func.instructions:
            ops = [code_of(op) for op in ins.operands]
            ops += [0] * (4 - len(ops))
            rels["instruction"].add((ins.address, ins.size, ins.mnemonic, *ops))
            rels["in_function"].add((ins.address, func.name))
            if prev is not None:
                rels["next"].add((prev, ins.address))
            prev = ins.address
    return FactStore(rels, INITIAL)
