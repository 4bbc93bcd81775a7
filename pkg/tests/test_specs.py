import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tpcscan.specs import (
    CHECKER_OF,
    CMP_OPS,
    OPERATIONS,
    DeprecatedEntry,
    DeprecatedList,
    ProgrammingExpression,
    SpecError,
    SpecSet,
    VersionRange,
    format_spec_set,
    parse_spec_file,
    parse_version,
    satisfiable,
    select_specs,
    validate,
)


def test_call_after_expression():
    specs = parse_spec_file("openssl X509_new: CALL_AFTER(X509_free)")
    (e,) = specs.expressions
    assert (e.tpc, e.api, e.operation, e.args) == ("openssl", "X509_new", "CALL_AFTER", ("X509_free",))


def test_call_before_expression():
    specs = parse_spec_file("sqlite sqlite3_config: CALL_BEFORE(sqlite3_initialize)")
    assert len(specs) == 1
    assert specs.expressions[0].args == ("sqlite3_initialize",)


def test_wrong_arity_is_reported_with_line():
    with pytest.raises(SpecError, match="takes 2") as exc:
        parse_spec_file("# x\nopenssl BN_CTX_get: CHECK_RET(ne, 0, extra)", source="s.spec")
    assert exc.value.line == 2
    assert str(exc.value).startswith("s.spec:2:")


@pytest.mark.parametrize(
    "line, fragment",
    [
        ("openssl f: CHECK_RET(about, 0)", "bad comparison"),
        ("openssl f: ARG_PRE(1, any_check, 0)", "bad comparison"),
        ("openssl f: ARG_PRE(0, eq, 0)", "index"),
        ("openssl f: CHECK_RET(eq, zero)", "not an integer"),
        ("openssl f: FROB(1)", "unknown operation"),
        ("openssl f@1.x..2: CHECK_RET(eq, 0)", "malformed version"),
        ("openssl f@2.0..1.0: CHECK_RET(eq, 0)", "empty version range"),
        ("openssl f CHECK_RET(eq, 0)", "syntax error"),
        ("openssl f: CALL_AFTER(1abc)", "not a function"),
        ("openssl deprecated: g/2(ptr)", "lists 1 argument"),
        ("openssl deprecated: g/1(float)", "unknown argument type"),
        ("openssl f: CHECK_RET(any_check, 3)", "takes value 0"),
    ],
)
def test_spec_errors(line, fragment):
    with pytest.raises(SpecError, match=fragment):
        parse_spec_file(line)


def test_all_operations_parse():
    text = """
    t a: CALL_BEFORE(b)
    t a: CALL_AFTER(b())
    t a: CHECK_RET(any_check, 0)
    t a: OP_ON_RET(eq, 0, handle)
    t a: ARG_PRE(2, eq, 0x10)
    t a: ARG_POST(1, ge, -1)
    t a: FREE_ARG(1, free)
    t deprecated@1.0..: old/2(ptr, int)
    t deprecated@1.0..: older/0
    """
    specs = parse_spec_file(text)
    assert [e.operation for e in specs.expressions] == list(OPERATIONS)
    assert specs.expressions[1].args == ("b",)
    assert specs.expressions[4].args == (2, "eq", 16)
    (dl,) = specs.deprecated
    assert dl.entries == (DeprecatedEntry("old", 2, ("ptr", "int")), DeprecatedEntry("older", 0))


def test_every_operation_has_one_checker():
    assert set(CHECKER_OF) == set(OPERATIONS)
    assert set(CHECKER_OF.values()) == {"causality", "return_value", "argument"}


# ---- versions -------------------------------------------------------------------


def test_version_padding():
    assert parse_version("1.0") == parse_version("1.0.0")
    assert parse_version("1.10") > parse_version("1.9")


def test_select_inside_and_outside_range():
    specs = parse_spec_file("openssl f@1.0.0..1.1.0: CHECK_RET(eq, 0)\nopenssl g: CHECK_RET(eq, 0)")
    assert [e.api for e in select_specs(specs, "openssl", "1.0.2").expressions] == ["f", "g"]
    assert [e.api for e in select_specs(specs, "openssl", "1.2.0").expressions] == ["g"]
    assert [e.api for e in select_specs(specs, "openssl", "0.9").expressions] == ["g"]
    assert select_specs(specs, "sqlite", "1.0").expressions == ()


def test_select_bad_version():
    with pytest.raises(SpecError):
        select_specs(SpecSet(), "openssl", "1.0-beta")


def test_open_ended_ranges():
    assert VersionRange(None, "1.1").covers("0.1")
    assert not VersionRange("1.1", None).covers("1.0.9")
    assert VersionRange.parse("..") is None


# ---- validate -------------------------------------------------------------------


def test_empty_specset_no_diagnostics():
    assert validate(SpecSet()) == []


def test_duplicate_expression_names_both_lines():
    specs = parse_spec_file("t f: CHECK_RET(eq, 0)\n\nt f: CHECK_RET(eq, 0)", source="d.spec")
    (d,) = validate(specs)
    assert d.severity == "warning"
    assert d.lines == (1, 3)
    assert "lines 1 and 3" in d.message


def test_contradictory_checks():
    (d,) = validate(parse_spec_file("t f: CHECK_RET(eq, 0)\nt f: CHECK_RET(ne, 0)"))
    assert d.severity == "warning" and "cannot both hold" in d.message


def test_compatible_checks_or_disjoint_versions_are_quiet():
    assert validate(parse_spec_file("t f: CHECK_RET(ge, 0)\nt f: CHECK_RET(gt, -1)")) == []
    text = "t f@1.0..1.1: CHECK_RET(eq, 0)\nt f@2.0..: CHECK_RET(ne, 0)"
    assert validate(parse_spec_file(text)) == []


def test_duplicate_deprecated_entry_is_an_error():
    diags = validate(parse_spec_file("t deprecated: f/1\nt deprecated: f/1(ptr)"))
    assert [d.severity for d in diags] == ["error"]


def test_stack_argument_warning():
    (d,) = validate(parse_spec_file("libpcap pcap_open_live: ARG_PRE(5, eq, 0)"))
    assert "not passed in a register on arm32" in d.message


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(CMP_OPS), st.integers(-5, 5)), min_size=1, max_size=3))
def test_satisfiable_matches_wide_scan(preds):
    ops = {
        "eq": lambda x, v: x == v, "ne": lambda x, v: x != v, "lt": lambda x, v: x < v,
        "le": lambda x, v: x <= v, "gt": lambda x, v: x > v, "ge": lambda x, v: x >= v,
    }
    brute = any(all(ops[o](x, v) for o, v in preds) for x in range(-50, 51))
    assert satisfiable(preds) == brute


# ---- round trip -------------------------------------------------------------------

_name = st.from_regex(r"[A-Za-z_][A-Za-z0-9_]{0,8}", fullmatch=True).filter(lambda s: s != "deprecated")
_version = st.lists(st.integers(0, 12), min_size=1, max_size=3).map(lambda p: ".".join(map(str, p)))


@st.composite
def _ranges(draw):
    kind = draw(st.sampled_from(["none", "lo", "hi", "both", "point"]))
    if kind == "none":
        return None
    a, b = sorted([draw(_version), draw(_version)], key=parse_version)
    return {
        "lo": VersionRange(a, None),
        "hi": VersionRange(None, b),
        "both": VersionRange(a, b),
        "point": VersionRange(a, a),
    }[kind]


@st.composite
def _expressions(draw):
    op = draw(st.sampled_from(sorted(OPERATIONS)))
    args = []
    for kind in OPERATIONS[op]:
        if kind == "func":
            args.append(draw(_name))
        elif kind == "op":
            args.append(draw(st.sampled_from(CMP_OPS)))
        elif kind == "int":
            args.append(draw(st.integers(-(2**31), 2**31)))
        else:
            args.append(draw(st.integers(1, 6)))
    return ProgrammingExpression(draw(_name), draw(_name), op, tuple(args), draw(_ranges()))


@st.composite
def _specsets(draw):
    exprs = tuple(draw(st.lists(_expressions(), max_size=6)))
    lists = []
    for tpc in draw(st.lists(_name, max_size=2, unique=True)):
        entries = []
        for api in draw(st.lists(_name, min_size=1, max_size=3, unique=True)):
            arity = draw(st.integers(0, 3))
            types = tuple(draw(st.lists(st.sampled_from(["int", "ptr", "any"]), min_size=arity, max_size=arity)))
            entries.append(DeprecatedEntry(api, arity, draw(st.sampled_from([types, ()]))))
        lists.append(DeprecatedList(tpc, draw(_ranges()), tuple(entries)))
    return SpecSet(exprs, tuple(lists))


@settings(max_examples=150, deadline=None)
@given(_specsets())
def test_print_parse_round_trip(specs):
    text = format_spec_set(specs)
    again = parse_spec_file(text)
    assert again == specs
    assert format_spec_set(again) == text


@settings(max_examples=100, deadline=None)
@given(_specsets(), _version, st.booleans())
def test_select_is_an_idempotent_filter(specs, version, by_tpc):
    tpc = specs.tpcs()[0] if by_tpc and specs.tpcs() else None
    once = select_specs(specs, tpc, version)
    assert set(once.expressions) <= set(specs.expressions)
    assert set(once.deprecated) <= set(specs.deprecated)
    assert select_specs(once, tpc, version) == once
