"""API-usage facts from a linear abstract interpretation of each function.

Every register and frame slot holds an abstract value: a known integer, the
function's own parameter, the result of a particular call site, an opaque
token for anything else, or (MIPS ``slt``) a comparison outcome.  The
interpreter walks instructions in address order without merging paths, which
keeps the analysis a linear def-use scan.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, replace

from ..datalog import FactStore
from .isa import NEGATE, SWAP
from .listing import ListingModel, Operand
from .schema import USAGE

DEFAULT_WINDOW = 5
MAX_MOVE_DEPTH = 1  # register moves followed when tracking a call result


@dataclass(frozen=True)
class Val:
    kind: str  # imm | param | ret | tok | flag | clob
    ident: object
    depth: int = 0

    @property
    def key(self):
        return (self.kind, self.ident)

    @property
    def tracked(self):
        return self.kind in ("param", "ret", "tok")

    def moved(self):
        return self if self.kind == "imm" else replace(self, depth=self.depth + 1)


def _imm(v):
    return Val("imm", v)


@dataclass
class _Pending:
    subject: Val
    origin: int
    consumed: bool = False


def _to_signed32(v):
    v &= 0xFFFFFFFF
    return v - (1 << 32) if v & 0x80000000 else v


_FOLD = {
    "add": lambda a, b: a + b,
    "sub": lambda a, b: a - b,
    "or": lambda a, b: a | b,
    "xor": lambda a, b: a ^ b,
    "and": lambda a, b: a & b,
}
_ARITH3_BASE = {
    "addiu": "add", "addu": "add", "add": "add", "addi": "add", "adds": "add",
    "subu": "sub", "sub": "sub", "subs": "sub",
    "or": "or", "ori": "or", "orr": "or",
    "xor": "xor", "xori": "xor", "eor": "xor",
    "and": "and", "andi": "and",
}


class _FunctionScan:
    def __init__(self, model, func, out, window):
        self.model = model
        self.isa = model.isa
        self.func = func
        self.out = out
        self.window = window
        self.regs = {}
        self.slots = {}
        self.defs = {}
        self.flags = None
        self.pending = []
        self.passed = defaultdict(list)  # value key -> [(site, index)]
        self.calls = []  # (site, callee)
        for i, reg in enumerate(self.isa.argument_registers, 1):
            self.regs[reg] = Val("param", i)

    # -- values --------------------------------------------------------------

    def read_reg(self, reg):
        if reg == self.isa.zero_register:
            return _imm(0)
        if reg not in self.regs:
            self.regs[reg] = Val("tok", ("entry", self.func.name, reg))
        return self.regs[reg]

    def slot_key(self, op: Operand):
        if op.kind == "mem" and op.base in self.isa.frame_registers and op.index is None:
            return (op.base, op.disp)
        return None

    def read(self, op: Operand, addr):
        if op.kind == "reg":
            return self.read_reg(op.reg)
        if op.kind == "imm":
            return _imm(op.value)
        if op.kind == "mem":
            key = self.slot_key(op)
            if key is not None:
                if key not in self.slots:
                    self.slots[key] = Val("tok", ("slot", self.func.name, key))
                return self.slots[key]
            return Val("tok", ("load", addr))
        return Val("tok", ("sym", op.symbol))

    def write_reg(self, reg, val, kind, text):
        if reg == self.isa.zero_register or reg is None:
            return
        self.regs[reg] = val
        self.defs[reg] = ("imm", str(val.ident)) if val.kind == "imm" else (kind, text)

    def copy(self, dst: Operand, src: Operand, addr):
        """dst <- src for a register-to-register or memory move."""
        if dst.kind == "reg" and src.kind == "reg" and dst.reg == src.reg:
            return
        val = self.read(src, addr)
        if src.kind in ("reg", "mem"):
            if dst.kind == "reg" and dst.reg == self.isa.return_register and val.kind == "ret":
                pass  # restoring a saved result does not add a hop
            else:
                val = val.moved()
        if dst.kind == "reg":
            kind = "reg" if src.kind == "reg" else "unknown"
            self.write_reg(dst.reg, val, kind, src.text())
        else:
            self.store(dst, val)

    def store(self, mem: Operand, val):
        key = self.slot_key(mem)
        if key is not None:
            self.slots[key] = val

    def clobber(self, op: Operand, addr, text):
        if op.kind == "reg":
            self.write_reg(op.reg, Val("tok", (addr, op.reg)), "unknown", text)
        elif op.kind == "mem":
            self.store(op, Val("tok", (addr, "mem")))

    # -- checks ----------------------------------------------------------------

    def compare(self, a, b, origin):
        """Record a pending comparison; returns the flags tuple."""
        for subject in (a, b):
            if subject.kind == "ret":
                self.pending.append(_Pending(subject, origin))
        return (a, b, origin)

    def consume(self, a, op, b, origin, branch=None):
        for p in self.pending:
            if p.origin == origin:
                p.consumed = True
        for subject, sop, other in ((a, op, b), (b, SWAP[op], a)):
            const = other.ident if other.kind == "imm" else None
            if subject.kind == "ret" and subject.depth <= MAX_MOVE_DEPTH:
                site = subject.ident
                if const is None:
                    self.out["ret_reg_checked"].add((site, "any", 0))
                    continue
                self.out["ret_reg_checked"].add((site, sop, const))
                if branch is not None:
                    self.guarded_paths(site, sop, const, branch)
            if subject.tracked and const is not None:
                for site, index in self.passed.get(subject.key, ()):
                    self.out["arg_checked_after"].add((site, index, sop, const))

    def guarded_paths(self, site, op, value, branch):
        insns = self.func.instructions
        target = self.resolve_local(branch.operands[-1]) if branch.operands else None
        if target is not None:
            callee = self.first_call(target)
            if callee is not None:
                self.out["op_on_ret"].add((site, op, value, callee))
        callee = self.first_call(branch.index + 1)
        if callee is not None:
            self.out["op_on_ret"].add((site, NEGATE[op], value, callee))

    def first_call(self, start):
        for ins in self.func.instructions[start:]:
            klass = self.isa.classify(ins.mnemonic)[0]
            if klass == "call":
                return self.callee_of(ins)
            if klass in ("jump", "ret") or self.is_return(ins):
                return None
        return None

    def resolve_local(self, op: Operand):
        if op.kind != "sym":
            return None
        if op.symbol in self.func.labels:
            addr = self.func.labels[op.symbol]
        elif op.symbol.startswith("0x"):
            addr = int(op.symbol, 16)
        else:
            return None
        return self.func.index_of(addr)

    def callee_of(self, ins):
        target = ins.operands[0] if ins.operands else None
        if target is None or target.kind != "sym":
            return "?indirect"
        name = target.symbol
        if name.startswith("0x"):
            addr = int(name, 16)
            for fname, entry in sorted(self.model.symbols.items()):
                if entry == addr:
                    return fname
        return name

    def is_return(self, ins):
        klass = self.isa.classify(ins.mnemonic)[0]
        if klass == "ret":
            if ins.mnemonic in ("ret", "retq"):
                return True
            return bool(ins.operands) and ins.operands[0].kind == "reg" and ins.operands[0].reg == self.isa.link_register
        if klass == "pop":
            return any(o.kind == "reg" and o.reg == self.isa.pc_register for o in ins.operands)
        return False

    # -- main loop -------------------------------------------------------------

    def run(self):
        for ins in self.func.instructions:
            self.step(ins)
        for p in self.pending:
            if not p.consumed and p.subject.depth <= MAX_MOVE_DEPTH:
                self.out["ret_reg_checked"].add((p.subject.ident, "any", 0))
        self.emit_windows()

    def step(self, ins):
        klass, extra = self.isa.classify(ins.mnemonic)
        ops = ins.operands
        addr = ins.address
        handler = getattr(self, f"op_{klass}")
        handler(ins, ops, addr, extra)

    def op_nop(self, ins, ops, addr, extra):
        pass

    op_keep = op_nop

    def op_move(self, ins, ops, addr, extra):
        if len(ops) >= 2:
            self.copy(ops[0], ops[1], addr)

    def op_load(self, ins, ops, addr, extra):
        if len(ops) >= 2 and ops[0].kind == "reg":
            self.copy(ops[0], ops[1], addr)

    def op_store(self, ins, ops, addr, extra):
        if len(ops) >= 2 and ops[1].kind == "mem":
            self.copy(ops[1], ops[0], addr)

    def op_lea(self, ins, ops, addr, extra):
        if ops:
            self.clobber(ops[0], addr, ins.mnemonic)

    def op_li(self, ins, ops, addr, extra):
        if len(ops) >= 2 and ops[0].kind == "reg":
            if ops[1].kind == "imm":
                self.write_reg(ops[0].reg, _imm(ops[1].value), "imm", "")
            else:
                self.clobber(ops[0], addr, ins.mnemonic)

    def op_lui(self, ins, ops, addr, extra):
        if len(ops) >= 2 and ops[0].kind == "reg" and ops[1].kind == "imm":
            self.write_reg(ops[0].reg, _imm(_to_signed32(ops[1].value << 16)), "imm", "")
        elif ops:
            self.clobber(ops[0], addr, ins.mnemonic)

    def op_mvn(self, ins, ops, addr, extra):
        if len(ops) >= 2 and ops[0].kind == "reg" and ops[1].kind == "imm":
            self.write_reg(ops[0].reg, _imm(~ops[1].value), "imm", "")
        elif ops:
            self.clobber(ops[0], addr, ins.mnemonic)

    def op_def(self, ins, ops, addr, extra):
        if not ops:
            return
        m = ins.mnemonic
        if m in ("xor", "sub") and len(ops) == 2 and ops[0] == ops[1] and ops[0].kind == "reg":
            self.write_reg(ops[0].reg, _imm(0), "imm", "")
            return
        if m in ("mul", "div", "idiv") and len(ops) == 1 and self.isa.isa == "x86_64":
            for reg in ("rax", "rdx"):
                self.write_reg(reg, Val("tok", (addr, reg)), "unknown", m)
            return
        self.clobber(ops[0], addr, m)

    def op_arith3(self, ins, ops, addr, extra):
        if not ops or ops[0].kind != "reg":
            return
        base = _ARITH3_BASE[ins.mnemonic]
        if len(ops) == 2:
            srcs = (ops[0], ops[1])
        elif len(ops) >= 3:
            srcs = (ops[1], ops[2])
        else:
            self.clobber(ops[0], addr, ins.mnemonic)
            return
        a, b = (self.read(s, addr) for s in srcs)
        if base in ("xor", "sub") and srcs[0] == srcs[1] and srcs[0].kind == "reg":
            self.write_reg(ops[0].reg, _imm(0), "imm", "")
            return
        if a.kind == "imm" and b.kind == "imm":
            self.write_reg(ops[0].reg, _imm(_FOLD[base](a.ident, b.ident)), "imm", "")
            return
        identity = 0 if base in ("add", "sub", "or", "xor") else None
        if identity is not None and b.kind == "imm" and b.ident == identity and len(ops) >= 3:
            self.copy(ops[0], srcs[0], addr)
            return
        if base in ("add", "or", "xor") and a.kind == "imm" and a.ident == 0 and len(ops) >= 3:
            self.copy(ops[0], srcs[1], addr)
            return
        self.clobber(ops[0], addr, ins.mnemonic)

    def op_pop(self, ins, ops, addr, extra):
        for op in ops:
            if op.kind == "reg" and op.reg != self.isa.pc_register:
                self.clobber(op, addr, "pop")
        if self.is_return(ins):
            self.on_return()

    def op_cmp(self, ins, ops, addr, extra):
        if len(ops) >= 2:
            self.flags = self.compare(self.read(ops[0], addr), self.read(ops[1], addr), addr)

    def op_cmn(self, ins, ops, addr, extra):
        if len(ops) >= 2:
            b = self.read(ops[1], addr)
            b = _imm(-b.ident) if b.kind == "imm" else Val("tok", ("cmn", addr))
            self.flags = self.compare(self.read(ops[0], addr), b, addr)

    def op_test(self, ins, ops, addr, extra):
        if len(ops) >= 2:
            a = self.read(ops[0], addr)
            b = _imm(0) if ops[0] == ops[1] else Val("tok", ("mask", addr))
            self.flags = self.compare(a, b, addr)

    def op_slt(self, ins, ops, addr, extra):
        if len(ops) < 3 or ops[0].kind != "reg":
            return
        a, b = self.read(ops[1], addr), self.read(ops[2], addr)
        self.compare(a, b, addr)
        self.write_reg(ops[0].reg, Val("flag", (a, "lt", b, addr)), "unknown", ins.mnemonic)

    def op_cbranch(self, ins, ops, addr, extra):
        if self.flags is not None:
            a, b, origin = self.flags
            self.consume(a, extra, b, origin, branch=ins)

    def op_setcc(self, ins, ops, addr, extra):
        if self.flags is not None:
            a, b, origin = self.flags
            self.consume(a, extra, b, origin)
        if ops:
            self.clobber(ops[0], addr, ins.mnemonic)

    def branch_on(self, val, op, other, ins):
        if val.kind == "flag" and other.kind == "imm" and other.ident == 0 and op in ("eq", "ne"):
            a, fop, b, origin = val.ident
            self.consume(a, fop if op == "ne" else NEGATE[fop], b, origin, branch=ins)
        else:
            self.consume(val, op, other, ins.address, branch=ins)

    def op_rbranch(self, ins, ops, addr, extra):
        if ops:
            op, const = extra
            self.branch_on(self.read(ops[0], addr), op, _imm(const), ins)

    def op_rbranch2(self, ins, ops, addr, extra):
        if len(ops) >= 2:
            a, b = self.read(ops[0], addr), self.read(ops[1], addr)
            if a.kind == "imm" and b.kind == "flag":
                a, b = b, a
            self.branch_on(a, extra, b, ins)

    def op_jump(self, ins, ops, addr, extra):
        pass

    def op_ret(self, ins, ops, addr, extra):
        if self.is_return(ins):
            self.on_return()

    def on_return(self):
        val = self.regs.get(self.isa.return_register)
        if val is not None and val.kind == "ret" and val.depth <= MAX_MOVE_DEPTH:
            self.out["ret_reg_forwarded"].add((val.ident,))

    def op_call(self, ins, ops, addr, extra):
        callee = self.callee_of(ins)
        self.out["call_site"].add((addr, self.func.name, callee))
        self.calls.append((addr, callee))
        passed_now = []
        for index, reg in enumerate(self.isa.argument_registers, 1):
            val = self.regs.get(reg)
            if reg in self.defs:
                kind, text = self.defs[reg]
                self.out["arg_def"].add((addr, index, kind, text))
                if val.kind == "imm":
                    self.out["arg_imm"].add((addr, index, val.ident))
            if val is None or not val.tracked:
                continue
            for site, i in self.passed.get(val.key, ()):
                if site != addr:
                    self.out["arg_freed_after"].add((site, i, callee, index))
            if val.kind == "param":
                self.out["param_passed_to"].add((self.func.name, val.ident, callee))
            passed_now.append((val.key, index))
        for key, index in passed_now:
            self.passed[key].append((addr, index))

        self.flags = None
        for reg in self.isa.call_clobbers():
            self.regs[reg] = Val("clob", (addr, reg))
            self.defs.pop(reg, None)
        self.regs[self.isa.return_register] = Val("ret", addr)

        live = {v.key for v in self.regs.values()} | {v.key for v in self.slots.values()}
        for key, index in passed_now:
            if key in live:
                self.out["arg_live_after"].add((addr, index))

    def emit_windows(self):
        calls = self.calls
        for pos, (site, _) in enumerate(calls):
            for k in range(1, self.window + 1):
                if pos - k >= 0:
                    self.out["nearest_call_before"].add((site, k, calls[pos - k][1]))
                if pos + k < len(calls):
                    self.out["nearest_call_after"].add((site, k, calls[pos + k][1]))


def emit_usage_facts(model: ListingModel, window: int = DEFAULT_WINDOW) -> FactStore:
    """Derive call, check, argument and adjacency facts for every call site."""
    if window < 1:
        raise ValueError("window must be at least 1")
    out = {name: set() for name in USAGE}
    for func in model.functions:
        _FunctionScan(model, func, out, window).run()
    return FactStore(out, USAGE)
