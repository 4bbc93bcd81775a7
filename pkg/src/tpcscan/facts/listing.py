"""Normalized disassembly listings: data model and parser.

Canonical form::

    # comment
    FUNC main @ 1000
    1000  mov   %rdi, $0
    1004  call  pcap_close
    1008  mov   %rax, [%rbp+%rcx*8-16]

A looser form is accepted as well, which is closer to what disassemblers
print: ``name:`` opens a function, ``.label:`` marks a local branch target,
registers and numbers may be written bare, ARM immediates may carry ``#``
and MIPS memory operands may be written ``disp(reg)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import SourceError
from .isa import IsaProfile, get_profile


class ListingError(SourceError):
    pass


@dataclass(frozen=True)
class Operand:
    kind: str  # reg | imm | mem | sym
    reg: str | None = None
    value: int | None = None
    base: str | None = None
    index: str | None = None
    scale: int = 1
    disp: int = 0
    symbol: str | None = None

    def text(self):
        if self.kind == "reg":
            return f"%{self.reg}"
        if self.kind == "imm":
            return f"${self.value}"
        if self.kind == "sym":
            return self.symbol
        parts = []
        if self.base:
            parts.append(f"%{self.base}")
        if self.index:
            parts.append(f"%{self.index}*{self.scale}")
        inner = "+".join(parts)
        if self.disp or not parts:
            inner += f"{self.disp:+d}" if parts else str(self.disp)
        return f"[{inner}]"


@dataclass(frozen=True)
class Instruction:
    address: int
    size: int
    mnemonic: str
    operands: tuple
    function: str
    index: int
    line: int = 0

    def text(self):
        ops = ", ".join(op.text() for op in self.operands)
        return f"{self.address:x}  {self.mnemonic}  {ops}".rstrip()


@dataclass(frozen=True)
class Function:
    name: str
    entry: int
    instructions: tuple
    labels: dict = field(default_factory=dict, compare=False)

    def index_of(self, address):
        for i, ins in enumerate(self.instructions):
            if ins.address >= address:
                return i if ins.address == address else None
        return None


@dataclass(frozen=True)
class ListingModel:
    isa: IsaProfile
    functions: tuple
    symbols: dict = field(default_factory=dict, compare=False)

    def function(self, name):
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def instructions(self):
        for f in self.functions:
            yield from f.instructions

    def to_text(self):
        lines = []
        for f in self.functions:
            lines.append(f"FUNC {f.name} @ {f.entry:x}")
            for ins in f.instructions:
                lines.append(ins.text())
        return "".join(line + "\n" for line in lines)


_NUM = r"[-+]?(?:0[xX][0-9a-fA-F]+|\d+)"
_FUNC_RE = re.compile(r"^FUNC\s+(\S+)\s*@\s*(?:0[xX])?([0-9a-fA-F]+)$")
_LABEL_RE = re.compile(r"^([A-Za-z_.$][\w.$@]*):$")
_INSN_RE = re.compile(r"^(?:0[xX])?([0-9a-fA-F]+):?\s+([A-Za-z][\w.]*)(?:\s+(.*))?$")
_MEM_RE = re.compile(r"^\[(.*)\]$")
_PAREN_MEM_RE = re.compile(rf"^({_NUM})?\(\s*\$?(\w+)\s*\)$")
_SYMBOL_RE = re.compile(r"^[A-Za-z_.?$][\w.@$?]*$")
_NUM_RE = re.compile(rf"^{_NUM}$")


def _split_operands(text):
    ops, depth, cur = [], 0, []
    for ch in text:
        if ch in "[(":
            depth += 1
        elif ch in "])":
            depth -= 1
        if ch == "," and depth == 0:
            ops.append("".join(cur).strip())
            cur = []
        else:
            cur.append(ch)
    tail = "".join(cur).strip()
    if tail or ops:
        ops.append(tail)
    return ops


class _Parser:
    def __init__(self, profile: IsaProfile, source):
        self.profile = profile
        self.source = source

    def error(self, msg, line):
        return ListingError(msg, line=line, source=self.source)

    def register(self, name, line):
        reg = self.profile.canonical(name.lstrip("$"))
        if reg not in self.profile.registers:
            raise self.error(f"unknown register '{name}' for {self.profile.isa}", line)
        return reg

    def memory(self, inner, line):
        # ARM writes [base, #disp] and [base, index]
        inner = inner.replace(" ", "").replace("#", "").replace(",", "+").replace("+-", "-")
        if not inner:
            raise self.error("empty memory operand", line)
        base = index = None
        scale, disp = 1, 0
        for sign, term in re.findall(r"([+-]?)([^+-]+)", inner):
            if "*" in term:
                reg, _, sc = term.partition("*")
                if index is not None or sign == "-" or not _NUM_RE.match(sc):
                    raise self.error(f"bad index term '{term}'", line)
                index, scale = self.register(reg.lstrip("%"), line), int(sc, 0)
            elif _NUM_RE.match(term.lstrip("#$")):
                disp += int(sign + term.lstrip("#$"), 0)
            else:
                if sign == "-":
                    raise self.error(f"cannot subtract register '{term}'", line)
                reg = self.register(term.lstrip("%"), line)
                if base is None:
                    base = reg
                elif index is None:
                    index = reg
                else:
                    raise self.error("too many registers in memory operand", line)
        return Operand("mem", base=base, index=index, scale=scale, disp=disp)

    def operand(self, text, line, branchy):
        if not text:
            raise self.error("empty operand", line)
        if text.startswith("%"):
            return Operand("reg", reg=self.register(text[1:], line))
        m = _MEM_RE.match(text)
        if m:
            return self.memory(m.group(1), line)
        m = _PAREN_MEM_RE.match(text)
        if m:
            return Operand(
                "mem", base=self.register(m.group(2), line), disp=int(m.group(1) or "0", 0)
            )
        if text.startswith("$") or text.startswith("#"):
            body = text[1:]
            if _NUM_RE.match(body):
                return Operand("imm", value=int(body, 0))
            if text.startswith("$") and self.profile.is_register(body):
                return Operand("reg", reg=self.register(body, line))
            raise self.error(f"bad immediate '{text}'", line)
        if _NUM_RE.match(text):
            if branchy:
                # targets are addresses, written in hex like the address column
                if text.startswith(("-", "+")):
                    raise self.error(f"bad branch target '{text}'", line)
                return Operand("sym", symbol=f"0x{int(text, 16):x}")
            return Operand("imm", value=int(text, 0))
        if self.profile.is_register(text):
            return Operand("reg", reg=self.register(text, line))
        if _SYMBOL_RE.match(text):
            return Operand("sym", symbol=text)
        raise self.error(f"malformed operand '{text}'", line)

    def parse(self, text):
        functions = []  # [name, entry, [(addr, mnemonic, operands, line)], labels, line]
        seen_names = {}
        pending_labels = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = _strip_comment(raw).strip()
            if not line:
                continue
            m = _FUNC_RE.match(line)
            if m:
                self._open(functions, seen_names, m.group(1), int(m.group(2), 16), lineno)
                continue
            m = _LABEL_RE.match(line)
            if m:
                name = m.group(1)
                if name.startswith("."):
                    if not functions:
                        raise self.error(f"local label '{name}' outside a function", lineno)
                    pending_labels.append((name, lineno))
                else:
                    self._open(functions, seen_names, name, None, lineno)
                continue
            m = _INSN_RE.match(line)
            if not m:
                raise self.error(f"malformed line: {raw.strip()!r}", lineno)
            if not functions:
                raise self.error("instruction outside a function", lineno)
            addr = int(m.group(1), 16)
            mnem = m.group(2).lower()
            klass = self.profile.classify(mnem)
            if klass is None:
                raise self.error(f"unknown mnemonic '{mnem}' for {self.profile.isa}", lineno)
            branchy = klass[0] in ("call", "jump", "cbranch", "rbranch", "rbranch2")
            ops = tuple(self.operand(o, lineno, branchy) for o in _split_operands(m.group(3) or ""))
            if len(ops) > 4:
                raise self.error(f"{len(ops)} operands; at most 4 are allowed", lineno)
            func = functions[-1]
            for name, lab_line in pending_labels:
                if name in func[3]:
                    raise self.error(f"duplicate label '{name}'", lab_line)
                func[3][name] = addr
            pending_labels = []
            func[2].append((addr, mnem, ops, lineno))
        if pending_labels:
            name, lab_line = pending_labels[0]
            raise self.error(f"label '{name}' is not followed by an instruction", lab_line)
        return self._build(functions)

    def _open(self, functions, seen, name, entry, lineno):
        if name in seen:
            raise self.error(f"duplicate function '{name}' (first defined on line {seen[name]})", lineno)
        seen[name] = lineno
        functions.append([name, entry, [], {}, lineno])

    def _build(self, raw_functions):
        all_addrs = {}
        built = []
        symbols = {}
        for name, entry, insns, labels, fline in raw_functions:
            prev = None
            for addr, _, _, lineno in insns:
                if prev is not None and addr <= prev:
                    raise self.error(
                        f"address {addr:x} does not increase (previous {prev:x})", lineno
                    )
                if addr in all_addrs:
                    raise self.error(
                        f"address {addr:x} already used on line {all_addrs[addr]}", lineno
                    )
                all_addrs[addr] = lineno
                prev = addr
            if entry is None:
                entry = insns[0][0] if insns else 0
            elif insns and insns[0][0] < entry:
                raise self.error(f"instruction at {insns[0][0]:x} precedes entry {entry:x}", insns[0][3])
            records = []
            for i, (addr, mnem, ops, lineno) in enumerate(insns):
                if i + 1 < len(insns):
                    size = insns[i + 1][0] - addr
                else:
                    size = self.profile.last_size
                records.append(Instruction(addr, size, mnem, ops, name, i, lineno))
            built.append(Function(name, entry, tuple(records), dict(labels)))
            symbols[name] = entry
        return ListingModel(self.profile, tuple(built), symbols)


_COMMENT_RE = re.compile(r"(?:^|(?<=\s))#(?![-+]?(?:0[xX])?[0-9a-fA-F])|;|//")


def _strip_comment(raw):
    # '#' followed by a number is an ARM immediate, not a comment
    m = _COMMENT_RE.search(raw)
    return raw[: m.start()] if m else raw


def parse_listing(text: str, isa, source=None) -> ListingModel:
    """Parse a normalized listing under the given ISA profile (name or profile)."""
    return _Parser(get_profile(isa), source).parse(text)
