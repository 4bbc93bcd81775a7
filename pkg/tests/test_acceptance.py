"""One test per primary acceptance criterion; the summary prints a PASS/FAIL line for each."""

import json
import random
import time
from collections import Counter
from pathlib import Path

import pytest

from oracles import naive_evaluate, random_program
from tpcscan.bench import bench, corpus_listings, load_annotations
from tpcscan.checkers import CATEGORIES, run_all
from tpcscan.datalog import FactStore, evaluate, parse_program
from tpcscan.exprgen import Ambiguous, compile_corpus, compile_sentence
from tpcscan.report import config_for, emit_facts, load_facts, render_report, scan, scan_listing
from tpcscan.specs import ProgrammingExpression, format_spec_set, parse_spec_file

GOLDEN = Path(__file__).resolve().parents[1] / "corpus" / "golden"
SPEC = GOLDEN / "golden.spec"
ISAS = ("x86_64", "arm32", "mips32")
DATA = Path(__file__).parent / "data"


def _specs():
    return parse_spec_file(SPEC.read_text())


def _violations(rel, isa):
    found = scan_listing((GOLDEN / rel).read_text(), isa, _specs())
    return [v for v in found if v.severity == "violation"]


@pytest.mark.criterion("engine oracle equivalence: 200 random stratified programs, semi-naive == naive, < 60 s")
def test_engine_oracle_equivalence():
    spent = 0.0
    biggest = 0
    for seed in range(200):
        src, data = random_program(random.Random(seed), max_tuples=5000)
        prog = parse_program(src)
        assert len(prog.declarations) <= 10 and len(prog.rules) <= 20
        biggest = max(biggest, sum(len(t) for t in data.values()))
        start = time.perf_counter()
        got = evaluate(prog, FactStore(data, {n: prog.types(n) for n in data}))
        spent += time.perf_counter() - start
        want = naive_evaluate(prog, data)
        for name in prog.declarations:
            assert got[name] == want[name], (seed, name)
    assert biggest <= 5000
    assert spent < 60.0
    print(f"engine time over 200 programs: {spent:.2f} s")


@pytest.mark.criterion("golden-corpus exactness: precision = recall = 1.0 per category and overall, scan < 5 s")
def test_golden_corpus_exactness():
    assert len(corpus_listings(GOLDEN)) >= 48
    start = time.perf_counter()
    _, card = bench(GOLDEN, _specs())
    elapsed = time.perf_counter() - start
    for cat in CATEGORIES + (None,):
        assert card.precision(cat) == 1.0, cat
        assert card.recall(cat) == 1.0, cat
    assert elapsed < 5.0


@pytest.mark.criterion("window boundary: callee at k=5 gives 0 violations, at k=6 gives 1")
def test_window_boundary():
    for isa in ISAS:
        assert len(_violations(f"{isa}/caus_window5.lst", isa)) == 0
        assert len(_violations(f"{isa}/caus_window6.lst", isa)) == 1


@pytest.mark.criterion("indirection depth: wrapper-checked result at depth 1 gives 0, at depth 2 gives 1")
def test_indirection_depth():
    for isa in ISAS:
        assert len(_violations(f"{isa}/ret_depth1.lst", isa)) == 0
        assert len(_violations(f"{isa}/ret_depth2.lst", isa)) == 1


@pytest.mark.criterion("incorrect-check semantics: le 0 vs lt 0 is a violation, ge 0 vs gt -1 is not")
def test_incorrect_check_semantics():
    for isa in ISAS:
        assert [v.kind for v in _violations(f"{isa}/ret_incorrect.lst", isa)] == ["incorrect_check"]
        assert _violations(f"{isa}/ret_equivalent.lst", isa) == []


@pytest.mark.criterion("cross-ISA agreement: 6-scenario program yields identical (category, api) multisets")
def test_cross_isa_agreement():
    bags = {isa: Counter((v.category, v.api) for v in _violations(f"{isa}/cross_isa.lst", isa)) for isa in ISAS}
    assert bags["x86_64"] == bags["arm32"] == bags["mips32"]
    assert sum(bags["x86_64"].values()) == 6
    assert {c for c, _ in bags["x86_64"]} == set(CATEGORIES)


@pytest.mark.criterion("expression compiler: X509_free and ge-0 sentences, >= 90% of 50 fixtures unambiguous")
def test_expression_compiler_fixtures():
    out = compile_sentence("the x509 object must be explicitly freed using X509_free", "X509_new")
    assert isinstance(out, ProgrammingExpression) and out.short() == "CALL_AFTER(X509_free)"
    out = compile_sentence("the return value should be greater than or equal to 0", "SSL_read")
    assert out.short() == "CHECK_RET(ge, 0)"
    rows = [line.split("\t")[:2] for line in (DATA / "sentences.tsv").read_text().splitlines()
            if line and not line.startswith("#")]
    assert len(rows) == 50
    _, unmatched = compile_corpus(rows)
    assert not any(isinstance(u, Ambiguous) for u in unmatched)
    assert (len(rows) - len(unmatched)) / len(rows) >= 0.9


@pytest.mark.criterion("determinism: byte-identical JSON and fact files across runs and parallel vs serial")
def test_determinism(tmp_path):
    for isa in ISAS:
        paths = [GOLDEN / rel for rel, i in corpus_listings(GOLDEN) if i == isa]
        runs = [render_report(scan(paths, [SPEC], isa, jobs=j)).encode() for j in (1, 1, 4)]
        assert runs[0] == runs[1] == runs[2]
        json.loads(runs[0])
    for n in (1, 2):
        emit_facts(GOLDEN / "mips32/cross_isa.lst", "mips32", tmp_path / str(n))
    names = sorted(p.name for p in (tmp_path / "1").iterdir())
    assert names == sorted(p.name for p in (tmp_path / "2").iterdir())
    for name in names:
        assert (tmp_path / "1" / name).read_bytes() == (tmp_path / "2" / name).read_bytes()


@pytest.mark.criterion("round-trips: listing->facts->reload->scan == direct scan; SpecSet print->parse fixpoint")
def test_round_trips(tmp_path):
    specs = _specs()
    annotations = load_annotations(GOLDEN)
    for rel, isa in corpus_listings(GOLDEN):
        out = tmp_path / rel.replace("/", "_")
        emit_facts(GOLDEN / rel, isa, out)
        direct = scan_listing((GOLDEN / rel).read_text(), isa, specs)
        assert run_all(load_facts(out), specs, config_for(isa)) == direct
        assert rel in annotations
    compiled, _ = compile_corpus([line.split("\t")[:2] for line in (DATA / "sentences.tsv").read_text().splitlines()
                                  if line and not line.startswith("#")], tpc="fixture")
    for s in (specs, compiled):
        text = format_spec_set(s)
        again = parse_spec_file(text)
        assert format_spec_set(again) == text
        assert [e.text() for e in again.expressions] == [e.text() for e in s.expressions]
