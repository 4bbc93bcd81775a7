"""Sentence to programming-expression compilation by template matching."""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..specs import ProgrammingExpression, SpecSet
from .patterns import PatternDB, PhrasePattern, default_db, slot_name

_TOKEN_RE = re.compile(
    r"-?0x[0-9a-f]+\b|-?\d+(?:st|nd|rd|th)?\b|[a-z_][a-z0-9_]*(?:\(\))?", re.IGNORECASE
)
_IDENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*(?:\(\))?$")

NUMBER_WORDS = {"zero": 0, "null": 0, "one": 1, "two": 2}
ORDINALS = {
    "first": 1, "second": 2, "third": 3, "fourth": 4,
    "fifth": 5, "sixth": 6, "seventh": 7, "eighth": 8,
}
SELF_REFERENCE = ("this", "function")


@dataclass(frozen=True)
class NoMatch:
    api: str
    sentence: str
    reason: str = "no pattern matches"


@dataclass(frozen=True)
class Ambiguous:
    api: str
    sentence: str
    candidates: tuple  # (expression text, pattern text) pairs

    @property
    def reason(self):
        return "ambiguous: " + " | ".join(e for e, _ in self.candidates)


def tokenize(sentence):
    """Lowercased tokens, each paired with its original spelling."""
    return [(t.lower(), t) for t in _TOKEN_RE.findall(sentence)]


def normalize(sentence, api=None, skip=frozenset()):
    """Token stream used for matching: skip-words dropped, the API's own name read as 'this function'."""
    out = []
    own = api.lower() if api else None
    for low, orig in tokenize(sentence):
        if low in skip:
            continue
        if own and low.removesuffix("()") == own:
            out.extend((w, w) for w in SELF_REFERENCE)
            continue
        out.append((low, orig))
    return out


def _number(tok):
    if tok in NUMBER_WORDS:
        return NUMBER_WORDS[tok]
    try:
        return int(tok, 16) if "x" in tok else int(tok, 10)
    except ValueError:
        return None


def _ordinal(tok):
    if tok in ORDINALS:
        return ORDINALS[tok]
    m = re.match(r"^(\d+)(?:st|nd|rd|th)$", tok)
    return int(m.group(1)) if m and int(m.group(1)) > 0 else None


def _bind_single(slot, low, orig):
    if slot == "FUNC":
        return orig.removesuffix("()") if _IDENT_RE.match(orig) and low not in SELF_REFERENCE else None
    if slot == "NUM":
        return _number(low)
    if slot == "ARGORD":
        return _ordinal(low)
    return None


def match_template(template, tokens):
    """Leftmost match of ``template`` in ``tokens``; ENTITY slots take as few tokens as possible."""

    def go(ti, si, binds):
        if ti == len(template):
            return binds
        slot = slot_name(template[ti])
        if slot is None:
            if si < len(tokens) and tokens[si][0] == template[ti]:
                return go(ti + 1, si + 1, binds)
            return None
        if slot == "ENTITY":
            for end in range(si + 1, len(tokens) + 1):
                found = go(ti + 1, end, binds)
                if found is not None:
                    return found
            return None
        if si >= len(tokens):
            return None
        value = _bind_single(slot, *tokens[si])
        if value is None:
            return None
        return go(ti + 1, si + 1, {**binds, slot: value})

    for start in range(len(tokens)):
        found = go(0, start, {})
        if found is not None:
            return found
    return None


def _payload(p: PhrasePattern, binds):
    args = []
    for field, value in p.slots:
        if value in binds:
            args.append(binds[value])
        elif field in ("value", "index"):
            args.append(int(value))
        else:
            args.append(value)
    return tuple(args)


def compile_sentence(sentence: str, api: str, db: PatternDB | None = None, tpc="lib"):
    """ProgrammingExpression for the best-priority match, or NoMatch / Ambiguous."""
    db = db or default_db()
    tokens = normalize(sentence, api, db.skip)
    for group in db.by_priority():
        found = {}
        for p in group:
            binds = match_template(p.template, tokens)
            if binds is None:
                continue
            try:
                expr = ProgrammingExpression(tpc, api, p.operation, _payload(p, binds))
            except ValueError:
                continue  # e.g. index 0
            found.setdefault(expr, p.text())
        if len(found) == 1:
            return next(iter(found))
        if found:
            cands = sorted((e.short(), t) for e, t in found.items())
            return Ambiguous(api, sentence, tuple(cands))
    return NoMatch(api, sentence)


def compile_corpus(sentences, db: PatternDB | None = None, tpc="lib"):
    """Compile ``(api, sentence)`` pairs; returns the SpecSet and the unmatched outcomes."""
    db = db or default_db()
    exprs, unmatched = {}, []
    for api, sentence in sentences:
        out = compile_sentence(sentence, api, db, tpc)
        if isinstance(out, ProgrammingExpression):
            exprs.setdefault(out, None)
        else:
            unmatched.append(out)
    return SpecSet(tuple(exprs)), unmatched


def read_corpus(text):
    """Rows of ``api TAB sentence``; blank lines and ``#`` comments are skipped."""
    rows = []
    for line in text.splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        api, _, sentence = line.partition("\t")
        rows.append((api.strip(), sentence.strip()))
    return rows
