"""A tiny ISA-neutral program notation, rendered into x86_64, arm32 and mips32 listings.

One scenario per ``scenario`` header::

    scenario ret_missing
    # BN_CTX_get result never looked at
    func main
      call BN_CTX_get @s
      return
    expect viol return_value BN_CTX_get @s

Statements: ``func NAME``, ``arg I VALUE``, ``arg I slot K``, ``save K``,
``call NAME [@tag]``, ``check OP VALUE LABEL`` (branch to LABEL when the
result register satisfies OP VALUE), ``label NAME``, ``jump LABEL``,
``return`` and ``nop``.  ``expect viol CATEGORY API @tag`` and
``expect clean CATEGORY API @tag`` annotate tagged call sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import SourceError
from ..specs import CMP_OPS

ISAS = ("x86_64", "arm32", "mips32")
CATEGORIES = ("deprecated", "return_value", "argument", "causality")


class ScenarioError(SourceError):
    pass


@dataclass(frozen=True)
class Step:
    op: str
    args: tuple
    tag: str | None = None
    line: int = 0


@dataclass
class Scenario:
    name: str
    functions: list = field(default_factory=list)  # [(name, [Step])]
    expects: list = field(default_factory=list)  # (viol|clean, category, api, tag)
    notes: list = field(default_factory=list)

    def tags(self):
        return {s.tag for _, steps in self.functions for s in steps if s.tag}


_ARITY = {
    "arg": (2, 3), "save": (1, 1), "call": (1, 1), "check": (3, 3),
    "label": (1, 1), "jump": (1, 1), "return": (0, 0), "nop": (0, 0),
}


def parse_scenarios(text: str, source=None) -> list:
    out = []
    cur = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if cur is not None:
                cur.notes.append(line.lstrip("# "))
            continue
        words = line.split()
        head = words[0]

        def fail(msg):
            return ScenarioError(msg, line=lineno, source=source)

        if head == "scenario":
            if len(words) != 2:
                raise fail("expected 'scenario NAME'")
            cur = Scenario(words[1])
            out.append(cur)
            continue
        if cur is None:
            raise fail("statement before the first 'scenario'")
        if head == "func":
            cur.functions.append((words[1], []))
            continue
        if head == "expect":
            if len(words) != 5 or words[1] not in ("viol", "clean") or not words[4].startswith("@"):
                raise fail("expected 'expect viol|clean CATEGORY API @tag'")
            if words[2] not in CATEGORIES:
                raise fail(f"unknown category '{words[2]}'")
            cur.expects.append((words[1], words[2], words[3], words[4][1:]))
            continue
        if head not in _ARITY:
            raise fail(f"unknown statement '{head}'")
        if not cur.functions:
            raise fail("statement outside a function")
        tag = None
        if words[-1].startswith("@"):
            tag = words.pop()[1:]
        lo, hi = _ARITY[head]
        if not lo <= len(words) - 1 <= hi:
            raise fail(f"wrong number of operands for '{head}'")
        args = []
        for w in words[1:]:
            try:
                args.append(int(w, 0))
            except ValueError:
                args.append(w)
        if head == "check" and args[0] not in CMP_OPS:
            raise fail(f"bad comparison '{args[0]}'")
        cur.functions[-1][1].append(Step(head, tuple(args), tag, lineno))
    for sc in out:
        missing = {t for *_, t in sc.expects} - sc.tags()
        if missing:
            raise ScenarioError(f"scenario {sc.name}: unknown tag(s) {', '.join(sorted(missing))}", source=source)
    return out


# ---- rendering -----------------------------------------------------------------

_X86_ARGS = ("edi", "esi", "edx", "ecx", "r8d", "r9d")
_X86_JCC = {"eq": "je", "ne": "jne", "lt": "jl", "le": "jle", "gt": "jg", "ge": "jge"}
_ARM_BCC = {"eq": "beq", "ne": "bne", "lt": "blt", "le": "ble", "gt": "bgt", "ge": "bge"}
_MIPS_ZERO = {"eq": "beqz", "ne": "bnez", "lt": "bltz", "le": "blez", "gt": "bgtz", "ge": "bgez"}


class _Emitter:
    def __init__(self, isa):
        if isa not in ISAS:
            raise ValueError(f"unknown ISA '{isa}'")
        self.isa = isa

    def prologue(self):
        if self.isa == "x86_64":
            return [("push", "rbp"), ("mov", "rbp, rsp")]
        if self.isa == "mips32":
            return [("addiu", "sp, sp, -64")]
        return []

    def arg(self, index, value, slot=None):
        if self.isa == "x86_64":
            if index > len(_X86_ARGS):
                raise ValueError(f"argument {index} is not a register argument on x86_64")
            reg = _X86_ARGS[index - 1]
            if slot is not None:
                full = ("rdi", "rsi", "rdx", "rcx", "r8", "r9")[index - 1]
                return [("mov", f"{full}, [rbp-{8 * slot}]")]
            if value == 0:
                return [("xor", f"{reg}, {reg}")]
            return [("mov", f"{reg}, {value}")]
        if index > 4:
            # fifth and later arguments travel on the stack on arm32 and mips32
            off = 4 * (index - 5) + (16 if self.isa == "mips32" else 0)
            if self.isa == "arm32":
                if slot is not None:
                    return [("ldr", f"r12, [sp, #{16 + 4 * slot}]"), ("str", f"r12, [sp, #{off}]")]
                return [("mov", f"r12, #{value}"), ("str", f"r12, [sp, #{off}]")]
            if slot is not None:
                return [("lw", f"t1, {48 + 4 * slot}(sp)"), ("sw", f"t1, {off}(sp)")]
            if value == 0:
                return [("sw", f"zero, {off}(sp)")]
            return [("li", f"t1, {value}"), ("sw", f"t1, {off}(sp)")]
        if self.isa == "arm32":
            reg = f"r{index - 1}"
            if slot is not None:
                return [("ldr", f"{reg}, [sp, #{16 + 4 * slot}]")]
            if value < 0:
                return [("mvn", f"{reg}, #{-value - 1}")]
            return [("mov", f"{reg}, #{value}")]
        reg = f"a{index - 1}"
        if slot is not None:
            return [("lw", f"{reg}, {48 + 4 * slot}(sp)")]
        if value == 0:
            return [("move", f"{reg}, zero")]
        return [("li", f"{reg}, {value}")]

    def save(self, slot):
        if self.isa == "x86_64":
            return [("mov", f"[rbp-{8 * slot}], rax")]
        if self.isa == "arm32":
            return [("str", f"r0, [sp, #{16 + 4 * slot}]")]
        return [("sw", f"v0, {48 + 4 * slot}(sp)")]

    def call(self, name):
        return [({"x86_64": "call", "arm32": "bl", "mips32": "jal"}[self.isa], name)]

    def check(self, op, value, label):
        target = f".{label}"
        if self.isa == "x86_64":
            cmp = ("test", "eax, eax") if value == 0 else ("cmp", f"eax, {value}")
            return [cmp, (_X86_JCC[op], target)]
        if self.isa == "arm32":
            cmp = ("cmp", f"r0, #{value}") if value >= 0 else ("cmn", f"r0, #{-value}")
            return [cmp, (_ARM_BCC[op], target)]
        if value == 0:
            return [(_MIPS_ZERO[op], f"v0, {target}")]
        if op in ("eq", "ne"):
            return [("li", f"t0, {value}"), ("beq" if op == "eq" else "bne", f"v0, t0, {target}")]
        # slti t0, v0, c sets t0 when v0 < c
        bound = value if op in ("lt", "ge") else value + 1
        branch = "bnez" if op in ("lt", "le") else "beqz"
        return [("slti", f"t0, v0, {bound}"), (branch, f"t0, {target}")]

    def jump(self, label):
        return [({"x86_64": "jmp", "arm32": "b", "mips32": "b"}[self.isa], f".{label}")]

    def ret(self):
        if self.isa == "x86_64":
            return [("leave", ""), ("ret", "")]
        if self.isa == "arm32":
            return [("bx", "lr")]
        return [("addiu", "sp, sp, 64"), ("jr", "ra")]

    def nop(self):
        return [("nop", "")]


@dataclass
class Rendered:
    text: str
    sites: dict  # tag -> address


def render(scenario: Scenario, isa: str, base=0x1000) -> Rendered:
    """Listing text for one ISA plus the address of every tagged call."""
    em = _Emitter(isa)
    lines = [f"# scenario {scenario.name} ({isa})"]
    lines += [f"# {n}" for n in scenario.notes]
    sites = {}
    addr = base
    for fname, steps in scenario.functions:
        lines.append(f"FUNC {fname} @ {addr:x}")
        body = [(None, ins) for ins in em.prologue()]
        for st in steps:
            if st.op == "label":
                body.append((f".{st.args[0]}:", None))
                continue
            if st.op == "arg":
                if len(st.args) == 3:
                    if st.args[1] != "slot":
                        raise ScenarioError("expected 'arg I slot K'", line=st.line)
                    ins = em.arg(st.args[0], None, slot=st.args[2])
                else:
                    ins = em.arg(st.args[0], st.args[1])
            elif st.op == "save":
                ins = em.save(st.args[0])
            elif st.op == "call":
                ins = em.call(st.args[0])
            elif st.op == "check":
                ins = em.check(*st.args)
            elif st.op == "jump":
                ins = em.jump(st.args[0])
            elif st.op == "return":
                ins = em.ret()
            else:
                ins = em.nop()
            for i, one in enumerate(ins):
                body.append((st.tag if st.op == "call" and i == 0 else None, one))
        for tag, ins in body:
            if ins is None:
                lines.append(tag)
                continue
            if tag:
                sites[tag] = addr
            mnem, ops = ins
            lines.append(f"{addr:x}  {mnem:<6} {ops}".rstrip())
            addr += 4
        addr = (addr + 0xFF) // 0x100 * 0x100
    return Rendered("\n".join(lines) + "\n", sites)
