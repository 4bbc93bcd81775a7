"""Phrase patterns, synonym tables and the expanded pattern database."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from ..specs import ANY_CHECK, CMP_OPS

SLOTS = ("ENTITY", "FUNC", "NUM", "ARGORD")
ORIGINS = ("base", "synonym", "voice")

# payload field names, in the order the operation takes them
FIELDS = {
    "CALL_BEFORE": ("callee",),
    "CALL_AFTER": ("callee",),
    "CHECK_RET": ("op", "value"),
    "OP_ON_RET": ("op", "value", "callee"),
    "ARG_PRE": ("index", "op", "value"),
    "ARG_POST": ("index", "op", "value"),
    "FREE_ARG": ("index", "callee"),
}

# words that close the object of an active verb
PREPOSITIONS = frozenset("using with to before after by if when on from for in of against".split())

_SLOT_RE = re.compile(r"^\{([A-Z]+)\}$")


class PatternError(ValueError):
    pass


def slot_name(token):
    m = _SLOT_RE.match(token)
    return m.group(1) if m else None


@dataclass(frozen=True)
class PhrasePattern:
    template: tuple
    operation: str
    slots: tuple  # (field, SLOT or constant) pairs in payload order
    origin: str = "base"
    base: tuple | None = None  # template of the base pattern it came from

    def __post_init__(self):
        if self.base is None:
            object.__setattr__(self, "base", self.template)

    @property
    def priority(self):
        return (-len(self.template), ORIGINS.index(self.origin))

    def text(self):
        return " ".join(self.template)

    def derive(self, template, origin):
        return PhrasePattern(tuple(template), self.operation, self.slots, origin, self.base)


def check_pattern(p: PhrasePattern):
    """Raise PatternError unless every payload field comes from exactly one slot or constant."""
    if p.operation not in FIELDS:
        raise PatternError(f"unknown operation '{p.operation}'")
    fields = [f for f, _ in p.slots]
    if sorted(fields) != sorted(FIELDS[p.operation]) or len(set(fields)) != len(fields):
        raise PatternError(
            f"{p.text()!r}: {p.operation} needs fields {', '.join(FIELDS[p.operation])}"
        )
    used = [slot_name(t) for t in p.template if slot_name(t)]
    for s in used:
        if s not in SLOTS:
            raise PatternError(f"{p.text()!r}: unknown slot {{{s}}}")
    for s in SLOTS[1:]:
        if used.count(s) > 1:
            raise PatternError(f"{p.text()!r}: slot {{{s}}} appears twice")
    for field, value in p.slots:
        if value in SLOTS:
            if value not in used:
                raise PatternError(f"{p.text()!r}: field {field} refers to missing slot {value}")
        elif field == "op" and value not in CMP_OPS + (ANY_CHECK,):
            raise PatternError(f"{p.text()!r}: bad comparison '{value}'")
    for s in set(used) - {v for _, v in p.slots} - {"ENTITY"}:
        raise PatternError(f"{p.text()!r}: slot {{{s}}} is not mapped to any field")


@dataclass(frozen=True)
class Lexicon:
    """Synonyms, verb forms and skipped words."""

    synonyms: dict  # word -> frozenset of words, symmetric
    verbs: dict  # past participle -> base form
    skip: frozenset

    def __post_init__(self):
        sym = {}
        for a, bs in self.synonyms.items():
            for b in bs:
                if a != b:
                    sym.setdefault(a, set()).add(b)
                    sym.setdefault(b, set()).add(a)
        object.__setattr__(self, "synonyms", {k: frozenset(v) for k, v in sorted(sym.items())})

    @property
    def participles(self):
        return {base: pp for pp, base in self.verbs.items()}

    def normalize_template(self, tokens):
        return tuple(t for t in tokens if t not in self.skip)


def _data(name):
    return resources.files("tpcscan.exprgen").joinpath("data", name).read_text(encoding="utf-8")


def _rows(text):
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip() and not line.lstrip().startswith("#"):
            yield lineno, line.rstrip("\n").split("\t")


def parse_pairs(text):
    pairs = {}
    for lineno, row in _rows(text):
        if len(row) != 2:
            raise PatternError(f"line {lineno}: expected two tab-separated words")
        pairs.setdefault(row[0].strip(), set()).add(row[1].strip())
    return pairs


def load_lexicon(synonyms=None, verbs=None, skip=None) -> Lexicon:
    """Lexicon from the given texts, falling back to the shipped data files."""
    syn = parse_pairs(_data("synonyms.tsv") if synonyms is None else synonyms)
    vb = {k: sorted(v)[0] for k, v in parse_pairs(_data("verbs.tsv") if verbs is None else verbs).items()}
    sk = _data("skipwords.txt") if skip is None else skip
    words = frozenset(w for line in sk.splitlines() if not line.startswith("#") for w in line.split())
    return Lexicon(syn, vb, words)


def parse_patterns(text, lexicon: Lexicon | None = None) -> list:
    """Parse ``template TAB operation TAB slot-map`` rows into base patterns."""
    lexicon = lexicon or load_lexicon()
    out = []
    for lineno, row in _rows(text):
        if len(row) != 3:
            raise PatternError(f"line {lineno}: expected template, operation and slot map")
        template, operation, slotmap = (c.strip() for c in row)
        values = {}
        for item in filter(None, (s.strip() for s in slotmap.split(","))):
            field, eq, value = item.partition("=")
            if not eq:
                raise PatternError(f"line {lineno}: bad slot map entry '{item}'")
            values[field.strip()] = value.strip()
        order = FIELDS.get(operation, tuple(values))
        slots = tuple((f, values[f]) for f in order if f in values)
        slots += tuple((f, v) for f, v in values.items() if f not in order)
        tokens = (t if slot_name(t) else t.lower() for t in template.split())
        p = PhrasePattern(lexicon.normalize_template(tokens), operation, slots)
        try:
            check_pattern(p)
        except PatternError as exc:
            raise PatternError(f"line {lineno}: {exc}") from None
        out.append(p)
    return out


def synonym_variants(template, lexicon: Lexicon):
    """Every template reachable by replacing one literal word with a synonym."""
    for i, tok in enumerate(template):
        if slot_name(tok):
            continue
        for alt in sorted(lexicon.synonyms.get(tok, ())):
            yield template[:i] + (alt,) + template[i + 1 :]


def voice_swap(template, lexicon: Lexicon):
    """Passive ``X be <pp> rest`` <-> imperative ``<verb> X rest``; None if neither shape fits."""
    if template.count("be") == 1:
        i = template.index("be")
        subject = template[:i]
        plain = subject and not PREPOSITIONS.intersection(subject) and subject[-1] != "not"
        if plain and i < len(template) - 1 and template[i + 1] in lexicon.verbs:
            return (lexicon.verbs[template[i + 1]],) + subject + template[i + 2 :]
    if template and template[0] in lexicon.participles and "be" not in template:
        j = 1
        while j < len(template) and template[j] not in PREPOSITIONS:
            j += 1
        if j > 1:
            return template[1:j] + ("be", lexicon.participles[template[0]]) + template[j:]
    return None


@dataclass(frozen=True)
class PatternDB:
    patterns: tuple
    skip: frozenset = frozenset()

    def __len__(self):
        return len(self.patterns)

    def templates(self):
        return {p.template for p in self.patterns}

    def by_priority(self):
        """Groups of patterns that share a priority, best group first."""
        groups = {}
        for p in self.patterns:
            groups.setdefault(p.priority, []).append(p)
        return [groups[k] for k in sorted(groups)]


def _rank(p):
    return (ORIGINS.index(p.origin), p.base, p.operation, p.slots)


def expand_patterns(base, lexicon: Lexicon | None = None) -> PatternDB:
    """Base patterns plus one-word synonym substitutions plus voice variants of all of those."""
    lexicon = lexicon or load_lexicon()
    pool = []
    for p in base:
        check_pattern(p)
        pool.append(p)
        pool.extend(p.derive(t, "synonym") for t in synonym_variants(p.template, lexicon))
    pool.extend(
        p.derive(swapped, "voice")
        for p in list(pool)
        if (swapped := voice_swap(p.template, lexicon)) is not None
    )
    best = {}
    for p in pool:
        if p.template not in best or _rank(p) < _rank(best[p.template]):
            best[p.template] = p
    ordered = sorted(best.values(), key=lambda p: (p.priority, p.template))
    return PatternDB(tuple(ordered), lexicon.skip)


_DEFAULT = None


def default_db() -> PatternDB:
    """The database built from the shipped pattern and synonym files."""
    global _DEFAULT
    if _DEFAULT is None:
        lex = load_lexicon()
        _DEFAULT = expand_patterns(parse_patterns(_data("patterns.tsv"), lex), lex)
    return _DEFAULT
