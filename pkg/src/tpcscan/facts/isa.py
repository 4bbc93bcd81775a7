"""Per-ISA register conventions and mnemonic tables.

Each mnemonic maps to a semantic class used by the usage interpreter:

    move     dst <- src                      load    dst <- memory
    store    memory <- src                   def     dst <- something untracked
    arith3   dst <- src1 (op) src2           li      dst <- immediate
    cmp      flags <- a - b                  cmn     flags <- a + b
    test     flags <- a & b                  slt     dst <- (a < b)
    cbranch  branch on flags (op)            rbranch branch on register vs constant
    rbranch2 branch on two operands (op)     jump    unconditional branch
    call     call                            ret     return
    setcc    dst <- flags (op)               keep    value-preserving in place
    pop      registers <- stack              nop     no register effect
"""

from __future__ import annotations

from dataclasses import dataclass, field

CMP_OPS = ("eq", "ne", "lt", "le", "gt", "ge")

NEGATE = {"eq": "ne", "ne": "eq", "lt": "ge", "ge": "lt", "le": "gt", "gt": "le"}
SWAP = {"eq": "eq", "ne": "ne", "lt": "gt", "gt": "lt", "le": "ge", "ge": "le"}


@dataclass(frozen=True)
class IsaProfile:
    isa: str
    return_registers: tuple
    argument_registers: tuple
    call_mnemonics: frozenset
    compare_mnemonics: frozenset
    # mnemonic -> (cmp_op, implied constant or None)
    conditional_branch_mnemonics: dict
    move_mnemonics: frozenset
    mnemonics: dict = field(repr=False)
    registers: frozenset = field(repr=False)
    aliases: dict = field(repr=False)
    scratch_registers: frozenset = field(repr=False)
    frame_registers: frozenset = field(repr=False)
    zero_register: str | None = None
    link_register: str | None = None
    pc_register: str | None = None
    last_size: int = 4

    @property
    def return_register(self):
        return self.return_registers[0]

    def canonical(self, reg):
        reg = reg.lower()
        return self.aliases.get(reg, reg)

    def is_register(self, name):
        return self.canonical(name) in self.registers

    def classify(self, mnemonic):
        return self.mnemonics.get(mnemonic.lower())

    def call_clobbers(self):
        return set(self.return_registers) | set(self.argument_registers) | set(self.scratch_registers)


def _table(groups):
    out = {}
    for klass, names in groups.items():
        if isinstance(names, dict):
            for name, extra in names.items():
                out[name] = (klass, extra)
        else:
            for name in names.split():
                out[name] = (klass, None)
    return out


def _branches(table):
    out = {}
    for name, (klass, extra) in table.items():
        if klass == "cbranch":
            out[name] = (extra, None)
        elif klass == "rbranch":
            out[name] = extra
        elif klass == "rbranch2":
            out[name] = (extra, None)
    return out


# ---------------------------------------------------------------------------
# x86_64 (Intel operand order: destination first)

_X86_GPR = {
    "rax": "eax ax al ah",
    "rbx": "ebx bx bl bh",
    "rcx": "ecx cx cl ch",
    "rdx": "edx dx dl dh",
    "rsi": "esi si sil",
    "rdi": "edi di dil",
    "rbp": "ebp bp bpl",
    "rsp": "esp sp spl",
}
for _n in range(8, 16):
    _X86_GPR[f"r{_n}"] = f"r{_n}d r{_n}w r{_n}b"

_X86_ALIASES = {a: full for full, subs in _X86_GPR.items() for a in subs.split()}

_X86_TABLE = _table(
    {
        "move": "mov movq movl movabs movzx movsx movsxd movzbl movslq",
        "def": "add sub and or xor imul mul idiv div shl shr sar sal inc dec neg not rol ror adc sbb bsr bsf",
        "lea": "lea",
        "cmp": "cmp",
        "test": "test",
        "cbranch": {
            "je": "eq", "jz": "eq", "jne": "ne", "jnz": "ne",
            "jl": "lt", "jnge": "lt", "jle": "le", "jng": "le",
            "jg": "gt", "jnle": "gt", "jge": "ge", "jnl": "ge",
            "jb": "lt", "jc": "lt", "jnae": "lt", "jbe": "le", "jna": "le",
            "ja": "gt", "jnbe": "gt", "jae": "ge", "jnb": "ge", "jnc": "ge",
            "js": "lt", "jns": "ge",
        },
        "setcc": {
            "sete": "eq", "setz": "eq", "setne": "ne", "setnz": "ne",
            "setl": "lt", "setle": "le", "setg": "gt", "setge": "ge",
            "setb": "lt", "setbe": "le", "seta": "gt", "setae": "ge",
        },
        "jump": "jmp",
        "call": "call callq",
        "ret": "ret retq",
        "keep": "cdqe cltq cdq cqo",
        "pop": "pop",
        "nop": "nop push leave endbr64 hlt int3 cwde",
    }
)

X86_64 = IsaProfile(
    isa="x86_64",
    return_registers=("rax",),
    argument_registers=("rdi", "rsi", "rdx", "rcx", "r8", "r9"),
    call_mnemonics=frozenset({"call", "callq"}),
    compare_mnemonics=frozenset({"cmp", "test"}),
    conditional_branch_mnemonics=_branches(_X86_TABLE),
    move_mnemonics=frozenset(k for k, (c, _) in _X86_TABLE.items() if c == "move"),
    mnemonics=_X86_TABLE,
    registers=frozenset(_X86_GPR) | {"rip"},
    aliases=_X86_ALIASES,
    scratch_registers=frozenset({"r10", "r11"}),
    frame_registers=frozenset({"rbp", "rsp"}),
    pc_register="rip",
    last_size=1,
)


# ---------------------------------------------------------------------------
# arm32 (destination first; #imm immediates accepted)

_ARM_TABLE = _table(
    {
        "move": "mov cpy",
        "mvn": "mvn",
        "li": "movw",
        "def": "movt mul mla lsl lsr asr ror rsb sdiv udiv uxtb uxth sxtb sxth bic",
        "arith3": "add sub orr eor and adds subs",
        "load": "ldr ldrb ldrh ldrsb ldrsh",
        "store": "str strb strh",
        "lea": "adr",
        "cmp": "cmp",
        "cmn": "cmn",
        "test": "tst",
        "cbranch": {
            "beq": "eq", "bne": "ne", "blt": "lt", "ble": "le", "bgt": "gt", "bge": "ge",
            "blo": "lt", "bcc": "lt", "bls": "le", "bhi": "gt", "bhs": "ge", "bcs": "ge",
            "bmi": "lt", "bpl": "ge",
        },
        "rbranch": {"cbz": ("eq", 0), "cbnz": ("ne", 0)},
        "jump": "b",
        "call": "bl blx",
        "ret": "bx",
        "pop": "pop",
        "nop": "nop push",
    }
)

ARM32 = IsaProfile(
    isa="arm32",
    return_registers=("r0",),
    argument_registers=("r0", "r1", "r2", "r3"),
    call_mnemonics=frozenset({"bl", "blx"}),
    compare_mnemonics=frozenset({"cmp", "cmn", "tst"}),
    conditional_branch_mnemonics=_branches(_ARM_TABLE),
    move_mnemonics=frozenset({"mov", "cpy"}),
    mnemonics=_ARM_TABLE,
    registers=frozenset({f"r{i}" for i in range(13)} | {"sp", "lr", "pc"}),
    aliases={"r13": "sp", "r14": "lr", "r15": "pc", "fp": "r11", "ip": "r12", "sb": "r9", "sl": "r10"},
    scratch_registers=frozenset({"r12"}),
    frame_registers=frozenset({"sp", "r11", "r7"}),
    link_register="lr",
    pc_register="pc",
)


# ---------------------------------------------------------------------------
# mips32 (destination first; "disp(reg)" memory operands accepted)

_MIPS_REGS = (
    "zero at v0 v1 a0 a1 a2 a3 t0 t1 t2 t3 t4 t5 t6 t7 s0 s1 s2 s3 s4 s5 s6 s7 "
    "t8 t9 k0 k1 gp sp fp ra"
).split()

_MIPS_TABLE = _table(
    {
        "move": "move",
        "li": "li",
        "lui": "lui",
        "lea": "la",
        "arith3": "addiu addu add addi or ori xor xori subu sub and andi",
        "def": "sll srl sra sllv srlv mul mult multu div divu mflo mfhi nor",
        "load": "lw lh lhu lb lbu",
        "store": "sw sh sb",
        "slt": "slt slti sltu sltiu",
        "rbranch": {
            "beqz": ("eq", 0), "bnez": ("ne", 0), "blez": ("le", 0),
            "bgtz": ("gt", 0), "bltz": ("lt", 0), "bgez": ("ge", 0),
        },
        "rbranch2": {"beq": "eq", "bne": "ne"},
        "jump": "b j",
        "call": "jal jalr bal",
        "ret": "jr",
        "nop": "nop",
    }
)

MIPS32 = IsaProfile(
    isa="mips32",
    return_registers=("v0", "v1"),
    argument_registers=("a0", "a1", "a2", "a3"),
    call_mnemonics=frozenset({"jal", "jalr", "bal"}),
    compare_mnemonics=frozenset({"slt", "slti", "sltu", "sltiu"}),
    conditional_branch_mnemonics=_branches(_MIPS_TABLE),
    move_mnemonics=frozenset({"move"}),
    mnemonics=_MIPS_TABLE,
    registers=frozenset(_MIPS_REGS),
    aliases={"s8": "fp", "r0": "zero", "$0": "zero"},
    scratch_registers=frozenset({"at", "t0", "t1", "t2", "t3", "t4", "t5", "t6", "t7", "t8", "t9"}),
    frame_registers=frozenset({"sp", "fp"}),
    zero_register="zero",
    link_register="ra",
)

PROFILES = {p.isa: p for p in (X86_64, ARM32, MIPS32)}


def get_profile(isa) -> IsaProfile:
    if isinstance(isa, IsaProfile):
        return isa
    try:
        return PROFILES[isa]
    except KeyError:
        raise ValueError(f"unknown ISA '{isa}' (expected one of {', '.join(sorted(PROFILES))})") from None
