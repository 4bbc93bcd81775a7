"""Annotations, precision/recall scoring and violation injection."""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from typing import NamedTuple

from ..facts import emit_usage_facts, get_profile, parse_listing
from ..specs import SpecSet
from .scenario import CATEGORIES, _Emitter


class AnnotationError(ValueError):
    pass


@dataclass
class Annotation:
    listing: str
    expected: set = field(default_factory=set)  # (category, api, site)
    clean: set = field(default_factory=set)  # (api, site)
    # category column of clean rows, kept only for writing the file back
    clean_category: dict = field(default_factory=dict, compare=False)

    def check(self):
        both = {(api, site) for _, api, site in self.expected} & self.clean
        if both:
            api, site = sorted(both)[0]
            raise AnnotationError(f"{self.listing}: {api} at 0x{site:x} is both expected and clean")


def read_annotations(text, source="annotations.tsv") -> dict:
    """``listing TAB category TAB api TAB hex-site TAB viol|clean`` rows, grouped by listing."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 5 or cols[4] not in ("viol", "clean") or cols[1] not in CATEGORIES:
            raise AnnotationError(f"{source}:{lineno}: malformed annotation row")
        listing, category, api, site, expect = cols
        try:
            addr = int(site, 16)
        except ValueError:
            raise AnnotationError(f"{source}:{lineno}: bad site '{site}'") from None
        ann = out.setdefault(listing, Annotation(listing))
        if expect == "viol":
            ann.expected.add((category, api, addr))
        else:
            ann.clean.add((api, addr))
            ann.clean_category[(api, addr)] = category
    for ann in out.values():
        ann.check()
    return out


def format_annotations(annotations) -> str:
    rows = []
    for ann in sorted(annotations, key=lambda a: a.listing):
        cats = ann.clean_category
        for category, api, site in ann.expected:
            rows.append((ann.listing, site, category, api, "viol"))
        for api, site in ann.clean:
            rows.append((ann.listing, site, cats.get((api, site), "causality"), api, "clean"))
    rows.sort()
    lines = ["# listing\tcategory\tapi\tsite\texpect"]
    lines += [f"{lst}\t{cat}\t{api}\t{site:x}\t{exp}" for lst, site, cat, api, exp in rows]
    return "\n".join(lines) + "\n"


# ---- scoring ----------------------------------------------------------------------


@dataclass
class ScoreCard:
    tp: dict
    fp: dict
    fn: dict

    @staticmethod
    def ratio(num, den):
        return num / den if den else None

    def precision(self, category=None):
        tp, fp = self._counts(category, self.tp), self._counts(category, self.fp)
        return self.ratio(tp, tp + fp)

    def recall(self, category=None):
        tp, fn = self._counts(category, self.tp), self._counts(category, self.fn)
        return self.ratio(tp, tp + fn)

    @staticmethod
    def _counts(category, table):
        return table.get(category, 0) if category else sum(table.values())

    def as_dict(self):
        rows = {}
        for cat in CATEGORIES + (None,):
            rows[cat or "overall"] = {
                "tp": self._counts(cat, self.tp),
                "fp": self._counts(cat, self.fp),
                "fn": self._counts(cat, self.fn),
                "precision": self.precision(cat),
                "recall": self.recall(cat),
            }
        return rows

    def text(self):
        def fmt(x):
            return "n/a" if x is None else f"{x:.3f}"

        lines = [f"{'category':<14}{'TP':>5}{'FP':>5}{'FN':>5}  {'precision':>9}  {'recall':>6}"]
        for name, r in self.as_dict().items():
            lines.append(
                f"{name:<14}{r['tp']:>5}{r['fp']:>5}{r['fn']:>5}  {fmt(r['precision']):>9}  {fmt(r['recall']):>6}"
            )
        return "\n".join(lines) + "\n"


def score(reports: dict, annotations: dict) -> ScoreCard:
    """Compare reported (category, api, site) triples per listing with the annotations.

    ``reports`` maps listing name to an iterable of Violations or triples.
    """
    tp, fp, fn = defaultdict(int), defaultdict(int), defaultdict(int)
    for listing, found in reports.items():
        if listing not in annotations:
            raise AnnotationError(f"no annotation for listing '{listing}'")
        got = set()
        for v in found:
            if hasattr(v, "category"):
                if getattr(v, "severity", "violation") != "violation":
                    continue
                v = (v.category, v.api, v.site)
            got.add(tuple(v))
        want = annotations[listing].expected
        for cat, *_ in got & want:
            tp[cat] += 1
        for cat, *_ in got - want:
            fp[cat] += 1
        for cat, *_ in want - got:
            fn[cat] += 1
    return ScoreCard(dict(tp), dict(fp), dict(fn))


# ---- injection --------------------------------------------------------------------


class InjectionError(ValueError):
    pass


@dataclass(frozen=True)
class Mutation:
    kind: str  # remove-check | wrong-check | remove-call | swap-to-deprecated
    site: int | None = None  # call site the mutation is anchored at
    op: str | None = None
    value: int | None = None
    name: str | None = None


class Injection(NamedTuple):
    text: str
    annotation: Annotation
    sites: dict  # old address -> new address, for every instruction that survived


_INSN = re.compile(r"^([0-9a-fA-F]+)\s+(\S+)\s*(.*)$")


def _lines(text):
    out = []
    for raw in text.splitlines():
        m = _INSN.match(raw.strip())
        if m and not raw.strip().startswith("FUNC"):
            out.append(["insn", int(m.group(1), 16), m.group(2), m.group(3)])
        else:
            out.append(["raw", raw])
    return out


def _reassemble(lines):
    """Renumber instructions (4 bytes apart, functions keep their entry) and map old to new sites."""
    out, remap = [], {}
    addr = None
    for item in lines:
        if item[0] == "raw":
            text = item[1]
            m = re.match(r"^FUNC\s+\S+\s*@\s*([0-9a-fA-F]+)", text.strip())
            if m:
                entry = int(m.group(1), 16)
                addr = entry if addr is None else max(entry, addr)
                text = re.sub(r"@\s*[0-9a-fA-F]+", f"@ {addr:x}", text)
            out.append(text)
            continue
        _, old, mnem, ops = item
        if old is not None:
            remap[old] = addr
        out.append(f"{addr:x}  {mnem:<6} {ops}".rstrip())
        addr += 4
    return "\n".join(out) + "\n", remap


def _function_span(lines, index):
    start = index
    while start > 0 and not (lines[start][0] == "raw" and lines[start][1].strip().startswith("FUNC")):
        start -= 1
    end = index + 1
    while end < len(lines) and not (lines[end][0] == "raw" and lines[end][1].strip().startswith("FUNC")):
        end += 1
    return start, end


def _find_site(lines, site):
    for i, item in enumerate(lines):
        if item[0] == "insn" and item[1] == site:
            return i
    raise InjectionError(f"no instruction at 0x{site:x}")


def _check_lines(lines, i, isa):
    """Indices of the compare/branch that test the result of the call at line ``i``."""
    prof = get_profile(isa)
    _, end = _function_span(lines, i)
    picked = []
    for j in range(i + 1, end):
        item = lines[j]
        if item[0] != "insn":
            continue
        klass = prof.classify(item[2].lower())[0]
        if klass == "call":
            break
        if klass in ("cmp", "cmn", "test", "slt") or (klass == "li" and item[3].startswith("t0")):
            picked.append(j)
            continue
        if klass in ("cbranch", "rbranch", "rbranch2"):
            picked.append(j)
            return picked
    raise InjectionError("no return-value check follows the call")


def _callee(item):
    return item[3].split(",")[0].strip()


def inject(text: str, isa: str, mutation: Mutation, annotation: Annotation, specs: SpecSet | None = None):
    """Apply one mutation and re-address the listing.

    Returns the mutated text, the annotation with exactly one new expected
    violation, and the address map.  ``remove-call`` needs ``specs`` to find
    the call that depended on the removed one.
    """
    lines = _lines(text)
    expect = replaced = None
    m = mutation
    if m.kind in ("remove-check", "wrong-check"):
        i = _find_site(lines, m.site)
        api = _callee(lines[i])
        picks = _check_lines(lines, i, isa)
        if m.kind == "remove-check":
            for j in reversed(picks):
                del lines[j]
        else:
            label = lines[picks[-1]][3].split(",")[-1].strip()
            new = _Emitter(isa).check(m.op, m.value, label.lstrip("."))
            lines[picks[0]:picks[-1] + 1] = [["insn", None, mn, ops] for mn, ops in new]
        expect = ("return_value", api, m.site)
    elif m.kind == "remove-call":
        idx = [j for j, it in enumerate(lines) if it[0] == "insn" and _callee(it) == m.name
               and get_profile(isa).classify(it[2].lower())[0] == "call"]
        if not idx:
            raise InjectionError(f"no call to '{m.name}'")
        owner = _dependent_site(lines, idx[0], m.name, specs, isa)
        del lines[idx[0]]
        expect = ("causality", owner[0], owner[1])
    elif m.kind == "swap-to-deprecated":
        i = _find_site(lines, m.site)
        replaced = _callee(lines[i])
        lines[i][3] = m.name
        expect = ("deprecated", m.name, m.site)
    else:
        raise InjectionError(f"unknown mutation '{m.kind}'")
    out, remap = _reassemble(lines)
    model = parse_listing(out, isa)
    if m.kind == "swap-to-deprecated":
        _check_deprecated_setup(model, remap[m.site], m.name, specs)
    new = Annotation(annotation.listing)
    new.expected = {(c, a, remap[s]) for c, a, s in annotation.expected if s in remap}
    new.clean = {(a, remap[s]) for a, s in annotation.clean if s in remap}
    new.clean_category = {(a, remap[s]): c for (a, s), c in annotation.clean_category.items() if s in remap}
    cat, api, site = expect
    gone = {api, replaced} if m.kind == "swap-to-deprecated" else {api}
    new.clean = {(a, s) for a, s in new.clean if not (a in gone and s == remap[site])}
    if (cat, api, remap[site]) in new.expected:
        raise InjectionError(f"{api} at 0x{site:x} already has an expected {cat} violation")
    new.expected.add((cat, api, remap[site]))
    new.check()
    return Injection(out, new, remap)


def _dependent_site(lines, index, callee, specs, isa):
    """The closest call in the same function to an API that requires ``callee``."""
    if specs is None:
        raise InjectionError("remove-call needs a SpecSet to find the dependent API")
    needers = {e.api for e in specs.expressions
               if e.operation in ("CALL_BEFORE", "CALL_AFTER") and e.args[0] == callee}
    start, end = _function_span(lines, index)
    prof = get_profile(isa)
    best = None
    for j in range(start, end):
        it = lines[j]
        if it[0] == "insn" and prof.classify(it[2].lower())[0] == "call" and _callee(it) in needers:
            if best is None or abs(j - index) < abs(best - index):
                best = j
    if best is None:
        raise InjectionError(f"no call in the function depends on '{callee}'")
    return _callee(lines[best]), lines[best][1]


def _check_deprecated_setup(model, site, name, specs):
    """The swapped call must set up the arguments the deprecated entry lists."""
    if specs is None:
        raise InjectionError("swap-to-deprecated needs a SpecSet for the entry's arity")
    entries = [e for dl in specs.deprecated for e in dl.entries if e.api == name]
    if not entries:
        raise InjectionError(f"'{name}' is not on any deprecated list")
    entry = entries[0]
    usage = emit_usage_facts(model)
    regs = len(model.isa.argument_registers)
    defined = {t[1]: t for t in usage.get("arg_def") if t[0] == site}
    imms = {t[1]: t[2] for t in usage.get("arg_imm") if t[0] == site}
    for i in range(1, min(entry.arity, regs) + 1):
        if i not in defined:
            raise InjectionError(f"the call at 0x{site:x} does not set up argument {i} of {name}")
        if i <= len(entry.types) and entry.types[i - 1] == "ptr" and imms.get(i, 0) != 0:
            raise InjectionError(f"argument {i} at 0x{site:x} is a constant, not a pointer")
