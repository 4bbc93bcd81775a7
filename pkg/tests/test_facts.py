import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpcscan.datalog import FactStore, merge_stores, read_facts, write_facts
from tpcscan.facts import (
    INITIAL,
    SCHEMA,
    ListingError,
    emit_initial_facts,
    emit_usage_facts,
    extract_facts,
    get_profile,
    parse_listing,
)


def usage(src, isa="x86_64", **kw):
    return emit_usage_facts(parse_listing(src, isa), **kw)


# ---- profiles -----------------------------------------------------------------


def test_calling_conventions():
    assert get_profile("arm32").return_register == "r0"
    assert get_profile("arm32").argument_registers == ("r0", "r1", "r2", "r3")
    assert get_profile("mips32").return_register == "v0"
    assert get_profile("mips32").argument_registers == ("a0", "a1", "a2", "a3")
    assert get_profile("x86_64").return_register == "rax"
    assert get_profile("x86_64").argument_registers == ("rdi", "rsi", "rdx", "rcx", "r8", "r9")


def test_implied_branch_comparisons():
    assert get_profile("mips32").conditional_branch_mnemonics["blez"] == ("le", 0)
    assert get_profile("arm32").conditional_branch_mnemonics["cbnz"] == ("ne", 0)
    assert get_profile("x86_64").conditional_branch_mnemonics["jge"] == ("ge", None)


def test_unknown_isa():
    with pytest.raises(ValueError):
        get_profile("riscv")


# ---- parse_listing ----------------------------------------------------------


def test_two_instruction_listing():
    model = parse_listing("main:\n1000  mov  rdi, 0\n1004  call pcap_close", "x86_64")
    assert len(model.functions) == 1
    assert [i.mnemonic for i in model.functions[0].instructions] == ["mov", "call"]
    assert model.functions[0].entry == 0x1000


def test_empty_listing():
    assert parse_listing("", "arm32").functions == ()


def test_isa_mismatch_is_unknown_mnemonic():
    with pytest.raises(ListingError, match="unknown mnemonic 'bl'") as exc:
        parse_listing("f:\n1000 bl SSL_new", "mips32")
    assert exc.value.line == 2


def test_canonical_operands():
    src = """
    # canonical form
    FUNC f @ 400
    400  mov   %rax, [%rbp+%rcx*8-16]
    408  mov   %rdi, $-3
    40c  call  g
    """
    ins = parse_listing(src, "x86_64").functions[0].instructions
    mem = ins[0].operands[1]
    assert (mem.kind, mem.base, mem.index, mem.scale, mem.disp) == ("mem", "rbp", "rcx", 8, -16)
    assert ins[1].operands[1].value == -3
    assert ins[2].operands[0].symbol == "g"


def test_lenient_operands_per_isa():
    arm = parse_listing("f:\n10 mov r0, #5\n14 ldr r1, [sp, #8]\n18 bl g", "arm32")
    assert arm.functions[0].instructions[0].operands[1].value == 5
    assert arm.functions[0].instructions[1].operands[1].disp == 8
    mips = parse_listing("f:\n10 lw a0, 16(sp)\n14 move $a1, $v0", "mips32")
    op = mips.functions[0].instructions[0].operands[1]
    assert (op.base, op.disp) == ("sp", 16)
    assert mips.functions[0].instructions[1].operands[1].reg == "v0"


def test_x86_subregisters_are_canonicalized():
    ins = parse_listing("f:\n10 test eax, eax", "x86_64").functions[0].instructions[0]
    assert [o.reg for o in ins.operands] == ["rax", "rax"]


@pytest.mark.parametrize(
    "src, fragment, line",
    [
        ("f:\n1000 ret\ng:\n1000 ret", "already used", 4),
        ("f:\n1004 ret\n1000 ret", "does not increase", 3),
        ("f:\n1000 ret\nf:\n2000 ret", "duplicate function", 3),
        ("1000 ret", "outside a function", 1),
        ("f:\nthis is not an instruction", "malformed line", 2),
        ("f:\n1000 mov %zz, $1", "unknown register", 2),
        ("f:\n1000 mov rax, rbx, rcx, rdx, rsi", "at most 4", 2),
        ("f:\n1000 mov rax, [rbx+rcx+rdx]", "too many registers", 2),
        ("f:\n.L1:", "not followed", 2),
    ],
)
def test_listing_errors(src, fragment, line):
    with pytest.raises(ListingError, match=fragment) as exc:
        parse_listing(src, "x86_64", source="t.lst")
    assert exc.value.line == line
    assert str(exc.value).startswith(f"t.lst:{line}:")


def test_listing_text_round_trip():
    src = "f:\n10 mov rdi, [rbp-8]\n14 call g\n18 ret\ng:\n20 xor eax, eax\n24 ret\n"
    model = parse_listing(src, "x86_64")
    again = parse_listing(model.to_text(), "x86_64")
    assert again == model


# ---- emit_initial_facts -------------------------------------------------------


def test_single_instruction_facts():
    store = emit_initial_facts(parse_listing("f:\n1000 ret", "x86_64"))
    assert len(store["instruction"]) == 1
    assert len(store["in_function"]) == 1
    assert len(store["next"]) == 0


def test_next_links_consecutive_instructions():
    store = emit_initial_facts(parse_listing("f:\n1000 nop\n1001 ret", "x86_64"))
    assert store["next"] == {(0x1000, 0x1001)}


def test_operand_codes_dense_shared_and_zero_absent():
    src = "f:\n1000 mov rdi, 0\n1004 mov rsi, 0\n1008 call g\n100c ret"
    store = emit_initial_facts(parse_listing(src, "x86_64"))
    rows = store.sorted_tuples("instruction")
    assert rows[0][3:] == (1, 2, 0, 0)
    assert rows[1][3:] == (3, 2, 0, 0)  # immediate 0 shares its code
    assert rows[3][3:] == (0, 0, 0, 0)
    codes = {c for rel in ("op_regdirect", "op_immediate", "op_symbol", "op_indirect") for c, *_ in store[rel]}
    assert codes == set(range(1, len(codes) + 1))


def test_instruction_sizes_from_address_gaps():
    store = emit_initial_facts(parse_listing("f:\n1000 nop\n1003 ret", "x86_64"))
    assert {(a, s) for a, s, *_ in store["instruction"]} == {(0x1000, 3), (0x1003, 1)}


def test_indirect_operand_tuple():
    store = emit_initial_facts(parse_listing("f:\n10 mov rax, [rbp-8]", "x86_64"))
    assert store["op_indirect"] == {(2, "rbp", "none", 1, -8)}


def test_facts_round_trip_byte_identical(tmp_path):
    src = (
        "main:\n1000 mov edi, 5\n1004 call malloc\n1008 test eax, eax\n"
        "100a je .L\n100c mov rdi, rax\n1010 call free\n.L:\n1014 ret\n"
    )
    store = extract_facts(parse_listing(src, "x86_64"))
    write_facts(store, tmp_path / "a")
    loaded = read_facts(tmp_path / "a", SCHEMA)
    assert loaded == store
    write_facts(loaded, tmp_path / "b")
    for path in sorted((tmp_path / "a").iterdir()):
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_every_emitted_relation_is_declared():
    src = "f:\n10 call g\n14 ret\n"
    store = extract_facts(parse_listing(src, "x86_64"))
    assert set(store.relations()) == set(SCHEMA)


# ---- emit_usage_facts: return checks ------------------------------------------


def test_mips_blez_is_le_zero_check():
    src = "f:\n100 jal SSL_write\n104 blez v0, .err\n108 nop\n.err:\n10c jr ra\n"
    assert usage(src, "mips32")["ret_reg_checked"] == {(0x100, "le", 0)}


def test_unchecked_call_has_no_check():
    src = "f:\n100 call f1\n104 mov eax, 1\n108 cmp eax, 0\n10c je 100\n110 ret\n"
    assert usage(src)["ret_reg_checked"] == frozenset()


@pytest.mark.parametrize(
    "isa, body, expected",
    [
        ("x86_64", "test eax, eax\n108 jle .x", ("le", 0)),
        ("x86_64", "cmp rax, -1\n108 jne .x", ("ne", -1)),
        ("x86_64", "test rax, rax\n108 js .x", ("lt", 0)),
        ("arm32", "cmp r0, #0\n108 blt .x", ("lt", 0)),
        ("arm32", "cmn r0, #1\n108 beq .x", ("eq", -1)),
        ("arm32", "cbz r0, .x", ("eq", 0)),
        ("mips32", "bgez v0, .x", ("ge", 0)),
        ("mips32", "beq v0, zero, .x", ("eq", 0)),
        ("mips32", "slti t0, v0, 1\n108 bnez t0, .x", ("lt", 1)),
        ("mips32", "slti t0, v0, 1\n108 beqz t0, .x", ("ge", 1)),
        ("mips32", "slt t0, zero, v0\n108 bnez t0, .x", ("gt", 0)),
    ],
)
def test_check_patterns(isa, body, expected):
    call = {"x86_64": "call", "arm32": "bl", "mips32": "jal"}[isa]
    src = f"f:\n100 {call} api\n104 {body}\n.x:\n200 nop\n"
    assert usage(src, isa)["ret_reg_checked"] == {(0x100, *expected)}


def test_swapped_operands_flip_the_comparison():
    src = "f:\n100 call api\n104 mov ebx, 5\n108 cmp rbx, rax\n10c jl .x\n.x:\n110 ret\n"
    # 5 < rax  is  rax > 5
    assert usage(src)["ret_reg_checked"] == {(0x100, "gt", 5)}


def test_compare_without_branch_is_an_unconstrained_check():
    src = "f:\n100 call api\n104 cmp rax, 0\n108 ret\n"
    assert usage(src)["ret_reg_checked"] == {(0x100, "any", 0)}


def test_one_register_move_is_followed():
    src = "f:\n100 call api\n104 mov rbx, rax\n108 call other\n10c test rbx, rbx\n110 je .x\n.x:\n114 ret\n"
    assert usage(src)["ret_reg_checked"] == {(0x100, "eq", 0)}


def test_two_register_moves_are_not_followed():
    src = (
        "f:\n100 call api\n104 mov rbx, rax\n108 mov r12, rbx\n10c call other\n"
        "110 test r12, r12\n114 je .x\n.x:\n118 ret\n"
    )
    assert usage(src)["ret_reg_checked"] == frozenset()


def test_check_through_stack_slot_copy():
    src = (
        "f:\n100 bl api\n104 str r0, [sp, #4]\n108 bl other\n10c ldr r0, [sp, #4]\n"
        "110 cmp r0, #0\n114 beq .x\n.x:\n118 bx lr\n"
    )
    assert usage(src, "arm32")["ret_reg_checked"] == {(0x100, "eq", 0)}


def test_forwarded_return_value():
    src = "wrap:\n100 call api\n104 ret\nother:\n200 call api\n204 mov eax, 0\n208 ret\n"
    assert usage(src)["ret_reg_forwarded"] == {(0x100,)}


def test_forwarded_after_restore_from_copy():
    src = "wrap:\n100 bl api\n104 mov r4, r0\n108 bl log\n10c mov r0, r4\n110 pop r4, pc\n"
    assert usage(src, "arm32")["ret_reg_forwarded"] == {(0x100,)}


def test_op_on_ret_both_paths():
    src = (
        "f:\n100 call SSL_do_handshake\n104 test eax, eax\n106 jne .ok\n"
        "108 call SSL_get_error\n10c jmp .out\n.ok:\n110 call SSL_write\n.out:\n114 ret\n"
    )
    facts = usage(src)
    assert facts["op_on_ret"] == {
        (0x100, "ne", 0, "SSL_write"),
        (0x100, "eq", 0, "SSL_get_error"),
    }


def test_indirect_call_site():
    facts = usage("f:\n100 call rax\n104 ret\n")
    assert facts["call_site"] == {(0x100, "f", "?indirect")}


def test_call_to_numeric_address_resolves_function_name():
    facts = usage("f:\n100 call 200\n104 ret\ng:\n200 ret\n")
    assert facts["call_site"] == {(0x100, "f", "g")}


# ---- emit_usage_facts: arguments ------------------------------------------------


def test_argument_definitions():
    src = (
        "f:\n100 mov rbx, rsi\n104 xor edi, edi\n108 mov rsi, rbx\n10c lea rdx, [rbp-32]\n"
        "110 call api\n114 ret\n"
    )
    facts = usage(src)
    assert facts["arg_def"] == {
        (0x110, 1, "imm", "0"),
        (0x110, 2, "reg", "%rbx"),
        (0x110, 3, "unknown", "lea"),
    }
    assert facts["arg_imm"] == {(0x110, 1, 0)}
    # the caller's own 2nd parameter reaches api as its 2nd argument
    assert ("f", 2, "api") in facts["param_passed_to"]


def test_constants_propagate_through_moves_and_folds():
    src = "f:\n100 lui t0, 1\n104 ori t0, t0, 2\n108 move a0, t0\n10c addiu a1, zero, -7\n110 jal api\n"
    facts = usage(src, "mips32")
    assert facts["arg_imm"] == {(0x110, 1, 65538), (0x110, 2, -7)}


def test_registers_clobbered_by_a_call_are_not_defined():
    src = "f:\n100 mov edi, 1\n104 call a\n108 call b\n10c ret\n"
    facts = usage(src)
    assert {(s, i) for s, i, *_ in facts["arg_def"]} == {(0x104, 1)}


def test_pointer_passed_to_later_call():
    src = (
        "f:\n100 call X509_new\n104 mov rbx, rax\n108 mov rsi, rbx\n10c call X509_STORE_add_cert\n"
        "110 mov rdi, rbx\n114 call X509_free\n118 ret\n"
    )
    facts = usage(src)
    assert (0x10C, 2, "X509_free", 1) in facts["arg_freed_after"]
    assert (0x10C, 2) in facts["arg_live_after"]


def test_argument_not_live_after_call():
    src = "f:\n100 call X509_new\n104 mov rdi, rax\n108 call use\n10c ret\n"
    assert usage(src)["arg_live_after"] == frozenset()


def test_argument_checked_after_call():
    src = "f:\n100 mov rbx, 0\n104 lea rbx, [rbp-8]\n108 mov rdi, rbx\n10c call fill\n110 cmp rbx, 0\n114 je .x\n.x:\n118 ret\n"
    assert usage(src)["arg_checked_after"] == {(0x10C, 1, "eq", 0)}


# ---- emit_usage_facts: call windows ---------------------------------------------


def brute_force_windows(callees, sites, k_max):
    before, after = set(), set()
    for i, site in enumerate(sites):
        for j, other in enumerate(callees):
            d = i - j
            if 1 <= d <= k_max:
                before.add((site, d, other))
            if 1 <= -d <= k_max:
                after.add((site, -d, other))
    return before, after


def test_seven_calls_window():
    names = [f"c{i}" for i in range(1, 8)]
    src = "f:\n" + "".join(f"{0x100 + 4 * i:x} call {n}\n" for i, n in enumerate(names))
    facts = usage(src)
    fourth = 0x10C
    assert sorted((k, c) for s, k, c in facts["nearest_call_before"] if s == fourth) == [
        (1, "c3"),
        (2, "c2"),
        (3, "c1"),
    ]
    assert sorted((k, c) for s, k, c in facts["nearest_call_after"] if s == fourth) == [
        (1, "c5"),
        (2, "c6"),
        (3, "c7"),
    ]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.sampled_from(["a", "b", "c", "lock", "unlock"]), max_size=15), st.integers(1, 7))
def test_windows_match_brute_force(callees, window):
    src = "f:\n" + "".join(f"{0x100 + 8 * i:x} call {n}\n{0x104 + 8 * i:x} nop\n" for i, n in enumerate(callees))
    facts = usage(src, window=window)
    sites = [0x100 + 8 * i for i in range(len(callees))]
    before, after = brute_force_windows(callees, sites, window)
    assert set(facts["nearest_call_before"]) == before
    assert set(facts["nearest_call_after"]) == after
    for site in sites:
        ks = [k for s, k, _ in facts["nearest_call_before"] if s == site]
        assert len(ks) <= window and sorted(ks) == list(range(1, len(ks) + 1))


def test_windows_do_not_cross_functions():
    facts = usage("f:\n100 call a\ng:\n200 call b\n")
    assert facts["nearest_call_before"] == frozenset()
    assert facts["nearest_call_after"] == frozenset()


# ---- hand oracle for straight-line checks ----------------------------------------
#
# A separate, table-driven linear scan over the listing text: for each call, walk
# forward until the return register is written again and read off the single
# compare/branch that mentions it.

_ORACLE = {
    "x86_64": {
        "call": "call", "ret": "rax", "writes": ("mov",),
        "branch": {"je": "eq", "jne": "ne", "jl": "lt", "jle": "le", "jg": "gt", "jge": "ge"},
    },
    "arm32": {
        "call": "bl", "ret": "r0", "writes": ("mov",),
        "branch": {"beq": "eq", "bne": "ne", "blt": "lt", "ble": "le", "bgt": "gt", "bge": "ge"},
    },
    "mips32": {
        "call": "jal", "ret": "v0", "writes": ("li", "move"),
        "zbranch": {"beqz": "eq", "bnez": "ne", "bltz": "lt", "blez": "le", "bgtz": "gt", "bgez": "ge"},
    },
}


def hand_oracle(lines, isa):
    t = _ORACLE[isa]
    found = {}
    for i, (addr, mnem, ops) in enumerate(lines):
        if mnem != t["call"]:
            continue
        for j in range(i + 1, len(lines)):
            _, m2, o2 = lines[j]
            if m2 == t["call"] or (m2 in t["writes"] and o2[0] == t["ret"]):
                break
            if isa == "mips32" and m2 in t["zbranch"] and o2[0] == "v0":
                found[addr] = (t["zbranch"][m2], 0)
            elif m2 == "cmp" and o2[0] == t["ret"]:
                _, m3, _ = lines[j + 1]
                found[addr] = (t["branch"][m3], int(o2[1].lstrip("#")))
    return found


def random_straight_line(rng, isa):
    t = _ORACLE[isa]
    ret = t["ret"]
    scratch = {"x86_64": ["rbx", "r12"], "arm32": ["r4", "r5"], "mips32": ["s0", "s1"]}[isa]
    imm = "#" if isa == "arm32" else ""
    lines = []
    addr = 0x1000

    def emit(mnem, *ops):
        nonlocal addr
        lines.append((addr, mnem, list(ops)))
        addr += 4

    for n in range(rng.randint(1, 6)):
        emit(t["call"], f"api{n}")
        for _ in range(rng.randint(0, 2)):
            emit("mov" if isa != "mips32" else "li", rng.choice(scratch), f"{imm}{rng.randint(0, 9)}")
        if rng.random() < 0.7:
            value = rng.randint(-3, 3)
            if isa == "mips32":
                emit(rng.choice(sorted(t["zbranch"])), ret, "0x2000")
            else:
                emit("cmp", ret, f"{imm}{value}")
                emit(rng.choice(sorted(t["branch"])), "0x2000")
        if rng.random() < 0.3:
            emit("mov" if isa != "mips32" else "li", ret, f"{imm}7")
    emit("nop")
    text = "f:\n" + "".join(f"{a:x} {m} {', '.join(o)}\n" for a, m, o in lines)
    return text, lines


@pytest.mark.parametrize("isa", ["x86_64", "arm32", "mips32"])
@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_straight_line_checks_match_hand_oracle(isa, seed):
    text, lines = random_straight_line(random.Random(seed), isa)
    facts = usage(text, isa)
    expected = hand_oracle(lines, isa)
    got = {}
    for site, op, value in facts["ret_reg_checked"]:
        assert site not in got, "exactly one check per site"
        got[site] = (op, value)
    assert got == expected


@pytest.mark.parametrize("isa", ["x86_64", "arm32", "mips32"])
@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), pick=st.integers(0, 100))
def test_adding_a_check_affects_only_its_site(isa, seed, pick):
    rng = random.Random(seed)
    text, lines = random_straight_line(rng, isa)
    t = _ORACLE[isa]
    call_idx = [i for i, (_, m, _) in enumerate(lines) if m == t["call"]]
    i = call_idx[pick % len(call_idx)]
    site = lines[i][0]
    # the inserted check sits right after the call, at addresses between it and the next line
    if isa == "mips32":
        new = [(site + 1, "slti", ["t9", "v0", "42"]), (site + 2, "bnez", ["t9", "0x2000"])]
    else:
        imm = "#" if isa == "arm32" else ""
        new = [(site + 1, "cmp", [t["ret"], f"{imm}42"]), (site + 2, sorted(t["branch"])[0], ["0x2000"])]
    mutated = lines[: i + 1] + new + lines[i + 1 :]
    text2 = "f:\n" + "".join(f"{a:x} {m} {', '.join(o)}\n" for a, m, o in mutated)
    before = usage(text, isa)
    after = usage(text2, isa)
    added = set(after["ret_reg_checked"]) - set(before["ret_reg_checked"])
    assert added and all(s == site for s, _, _ in added)
    for name in ("ret_reg_checked", "call_site", "nearest_call_before", "nearest_call_after", "arg_def"):
        others_before = {t for t in before[name] if t[0] != site}
        others_after = {t for t in after[name] if t[0] != site}
        assert others_before == others_after, name


# ---- determinism & merging -----------------------------------------------------


def test_fact_files_deterministic(tmp_path):
    src = "f:\n10 mov rdi, 3\n14 call g\n18 test eax, eax\n1a je .x\n1c call h\n.x:\n20 ret\ng:\n30 ret\n"
    for run in ("a", "b"):
        write_facts(extract_facts(parse_listing(src, "x86_64")), tmp_path / run)
    for path in (tmp_path / "a").iterdir():
        assert path.read_bytes() == (tmp_path / "b" / path.name).read_bytes()


def test_merge_of_disjoint_single_tuple_stores():
    a = FactStore({"next": [(1, 2)]}, INITIAL)
    b = FactStore({"next": [(2, 3)]}, INITIAL)
    assert merge_stores(a, b).total() == 2
