"""Programming expressions and deprecated-API lists.

Grammar (one entry per line, ``#`` comments)::

    openssl X509_new: CALL_AFTER(X509_free)
    openssl SSL_write@1.0.0..1.1.1: CHECK_RET(gt, 0)
    openssl deprecated@..1.1.0: RAND_pseudo_bytes/2(ptr, int)
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SourceError

OPERATIONS = {
    # operation -> payload field kinds
    "CALL_BEFORE": ("func",),
    "CALL_AFTER": ("func",),
    "CHECK_RET": ("op", "int"),
    "OP_ON_RET": ("op", "int", "func"),
    "ARG_PRE": ("index", "op", "int"),
    "ARG_POST": ("index", "op", "int"),
    "FREE_ARG": ("index", "func"),
}

CHECKER_OF = {
    "CALL_BEFORE": "causality",
    "CALL_AFTER": "causality",
    "OP_ON_RET": "causality",
    "CHECK_RET": "return_value",
    "ARG_PRE": "argument",
    "ARG_POST": "argument",
    "FREE_ARG": "argument",
}

CMP_OPS = ("eq", "ne", "lt", "le", "gt", "ge")
ANY_CHECK = "any_check"
TYPE_TAGS = ("int", "ptr", "any")
REGISTER_ARGS = 4

_IDENT = r"[A-Za-z_][\w.]*"
_EXPR_RE = re.compile(rf"^({_IDENT})\s+({_IDENT})(?:@(\S*))?\s*:\s*([A-Z_]+)\s*\((.*)\)$")
_DEPR_RE = re.compile(rf"^({_IDENT})\s+deprecated(?:@(\S*))?\s*:\s*({_IDENT})\s*/\s*(\d+)\s*(?:\((.*)\))?$")
_FUNC_RE = re.compile(rf"^{_IDENT}(?:\(\))?$")
_INT_RE = re.compile(r"^[-+]?(?:0[xX][0-9a-fA-F]+|\d+)$")
_VERSION_RE = re.compile(r"^\d+(?:\.\d+)*$")


class SpecError(SourceError):
    pass


def parse_version(text) -> tuple:
    if not isinstance(text, str) or not _VERSION_RE.match(text):
        raise SpecError(f"malformed version '{text}' (expected dotted numbers)")
    parts = [int(p) for p in text.split(".")]
    while len(parts) > 1 and parts[-1] == 0:
        parts.pop()
    return tuple(parts)


@dataclass(frozen=True)
class VersionRange:
    lo: str | None = None
    hi: str | None = None

    def __post_init__(self):
        lo = parse_version(self.lo) if self.lo is not None else None
        hi = parse_version(self.hi) if self.hi is not None else None
        if lo is not None and hi is not None and lo > hi:
            raise SpecError(f"empty version range {self.lo}..{self.hi}")

    @classmethod
    def parse(cls, text):
        if text is None:
            return None
        if ".." in text:
            lo, _, hi = text.partition("..")
            if not lo and not hi:
                return None
            return cls(lo or None, hi or None)
        return cls(text, text)

    def covers(self, version) -> bool:
        v = parse_version(version) if isinstance(version, str) else version
        if self.lo is not None and v < parse_version(self.lo):
            return False
        return not (self.hi is not None and v > parse_version(self.hi))

    def overlaps(self, other) -> bool:
        lo = max(
            (parse_version(r.lo) for r in (self, other) if r.lo is not None), default=None
        )
        hi = min(
            (parse_version(r.hi) for r in (self, other) if r.hi is not None), default=None
        )
        return lo is None or hi is None or lo <= hi

    def text(self):
        if self.lo == self.hi and self.lo is not None:
            return self.lo
        return f"{self.lo or ''}..{self.hi or ''}"


def _overlap(a, b):
    if a is None or b is None:
        return True
    return a.overlaps(b)


def _covers(r, version):
    return r is None or r.covers(version)


@dataclass(frozen=True)
class ProgrammingExpression:
    tpc: str
    api: str
    operation: str
    args: tuple
    versions: VersionRange | None = None
    line: int | None = field(default=None, compare=False)
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        check_payload(self.operation, self.args)

    @property
    def checker(self):
        return CHECKER_OF[self.operation]

    def payload_text(self):
        return ", ".join(str(a) for a in self.args)

    def text(self):
        where = f"@{self.versions.text()}" if self.versions else ""
        return f"{self.tpc} {self.api}{where}: {self.operation}({self.payload_text()})"

    def short(self):
        return f"{self.operation}({self.payload_text()})"


@dataclass(frozen=True)
class DeprecatedEntry:
    api: str
    arity: int
    types: tuple = ()
    line: int | None = field(default=None, compare=False)


@dataclass(frozen=True)
class DeprecatedList:
    tpc: str
    versions: VersionRange | None
    entries: tuple

    def text_lines(self):
        where = f"@{self.versions.text()}" if self.versions else ""
        for e in self.entries:
            types = f"({', '.join(e.types)})" if e.types else ""
            yield f"{self.tpc} deprecated{where}: {e.api}/{e.arity}{types}"


@dataclass(frozen=True)
class SpecSet:
    expressions: tuple = ()
    deprecated: tuple = ()

    def __len__(self):
        return len(self.expressions)

    def tpcs(self):
        return sorted({e.tpc for e in self.expressions} | {d.tpc for d in self.deprecated})

    def merge(self, other: "SpecSet") -> "SpecSet":
        return SpecSet(self.expressions + other.expressions, self.deprecated + other.deprecated)


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # warning | error
    message: str
    lines: tuple = ()
    source: str | None = None

    def __str__(self):
        where = self.source or "<specs>"
        if self.lines:
            where += ":" + ",".join(str(n) for n in self.lines)
        return f"{where}: {self.severity}: {self.message}"


def check_payload(operation, args):
    """Raise SpecError unless ``args`` has exactly the shape the operation needs."""
    if operation not in OPERATIONS:
        raise SpecError(f"unknown operation '{operation}'")
    kinds = OPERATIONS[operation]
    if len(args) != len(kinds):
        raise SpecError(f"{operation} takes {len(kinds)} argument(s), got {len(args)}")
    for kind, value in zip(kinds, args):
        if kind == "func" and not (isinstance(value, str) and _FUNC_RE.match(value)):
            raise SpecError(f"{operation}: '{value}' is not a function name")
        if kind == "op":
            allowed = CMP_OPS + ((ANY_CHECK,) if operation == "CHECK_RET" else ())
            if value not in allowed:
                raise SpecError(f"{operation}: bad comparison operator '{value}'")
        if kind == "int" and (not isinstance(value, int) or isinstance(value, bool)):
            raise SpecError(f"{operation}: '{value}' is not an integer")
        if kind == "index" and (not isinstance(value, int) or isinstance(value, bool) or value < 1):
            raise SpecError(f"{operation}: argument index must be an integer >= 1, got '{value}'")
    if operation == "CHECK_RET" and args[0] == ANY_CHECK and args[1] != 0:
        raise SpecError("CHECK_RET(any_check, v) takes value 0")


def _convert(kind, token):
    if kind in ("int", "index"):
        if not _INT_RE.match(token):
            return token
        return int(token, 16) if "x" in token.lower() else int(token, 10)
    if kind == "func":
        return token[:-2] if token.endswith("()") else token
    return token


def _split_payload(text):
    text = text.strip()
    return [t.strip() for t in text.split(",")] if text else []


def parse_spec_file(text: str, source=None) -> SpecSet:
    """Parse expressions and deprecated-list entries; raise SpecError on the first bad line."""
    exprs = []
    groups = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            m = _DEPR_RE.match(line)
            if m:
                tpc, rng, api, arity, types = m.groups()
                tags = tuple(_split_payload(types or ""))
                for tag in tags:
                    if tag not in TYPE_TAGS:
                        raise SpecError(f"unknown argument type '{tag}' (expected int, ptr or any)")
                if tags and len(tags) != int(arity):
                    raise SpecError(f"{api}/{arity} lists {len(tags)} argument types")
                key = (tpc, VersionRange.parse(rng))
                groups.setdefault(key, []).append(DeprecatedEntry(api, int(arity), tags, lineno))
                continue
            m = _EXPR_RE.match(line)
            if not m:
                raise SpecError(f"syntax error: {raw.strip()!r}")
            tpc, api, rng, op, payload = m.groups()
            if op not in OPERATIONS:
                raise SpecError(f"unknown operation '{op}'")
            tokens = _split_payload(payload)
            kinds = OPERATIONS[op]
            args = tuple(_convert(k, t) for k, t in zip(kinds, tokens)) + tuple(tokens[len(kinds):])
            exprs.append(
                ProgrammingExpression(tpc, api, op, args, VersionRange.parse(rng), lineno, source)
            )
        except SpecError as exc:
            raise SpecError(exc.message, line=lineno, source=source) from None
    deprecated = tuple(DeprecatedList(t, r, tuple(es)) for (t, r), es in groups.items())
    return SpecSet(tuple(exprs), deprecated)


def format_spec_set(specs: SpecSet) -> str:
    lines = [e.text() for e in specs.expressions]
    for dl in specs.deprecated:
        lines.extend(dl.text_lines())
    return "".join(line + "\n" for line in lines)


def _holds(op, x, value):
    return {
        "eq": x == value,
        "ne": x != value,
        "lt": x < value,
        "le": x <= value,
        "gt": x > value,
        "ge": x >= value,
    }[op]


def satisfiable(preds) -> bool:
    """Whether some integer satisfies every (op, value) predicate.

    Each predicate changes truth only at value-1, value, value+1, so testing
    those points (plus one beyond the extremes) decides the conjunction.
    """
    preds = [p for p in preds if p[0] != ANY_CHECK]
    if not preds:
        return True
    points = {v + d for _, v in preds for d in (-1, 0, 1)}
    points |= {min(points) - 1, max(points) + 1}
    return any(all(_holds(op, x, v) for op, v in preds) for x in points)


def validate(specs: SpecSet) -> list:
    """Diagnostics for duplicates, contradictions and untrackable arguments. Never raises."""
    diags = []
    seen = {}
    for e in specs.expressions:
        key = (e.tpc, e.api, e.operation, e.args, e.versions)
        if key in seen:
            first = seen[key]
            diags.append(
                Diagnostic(
                    "warning",
                    f"duplicate expression '{e.text()}' (lines {first.line} and {e.line})",
                    tuple(x for x in (first.line, e.line) if x is not None),
                    e.source,
                )
            )
        else:
            seen[key] = e
        if e.operation in ("ARG_PRE", "ARG_POST", "FREE_ARG") and e.args[0] > REGISTER_ARGS:
            diags.append(
                Diagnostic(
                    "warning",
                    f"{e.api}: argument {e.args[0]} is not passed in a register on arm32 "
                    "or mips32; sites there are reported as unverifiable",
                    (e.line,) if e.line else (),
                    e.source,
                )
            )
    rets = [e for e in seen.values() if e.operation == "CHECK_RET"]
    for i, a in enumerate(rets):
        for b in rets[i + 1 :]:
            if (a.tpc, a.api) != (b.tpc, b.api) or not _overlap(a.versions, b.versions):
                continue
            if not satisfiable([a.args, b.args]):
                diags.append(
                    Diagnostic(
                        "warning",
                        f"{a.api}: {a.short()} and {b.short()} cannot both hold",
                        tuple(x for x in (a.line, b.line) if x is not None),
                        a.source,
                    )
                )
    entries = {}
    for dl in specs.deprecated:
        for entry in dl.entries:
            key = (dl.tpc, entry.api, dl.versions)
            if key in entries:
                diags.append(
                    Diagnostic(
                        "error",
                        f"{dl.tpc}: deprecated entry {entry.api} listed twice for the same versions",
                        tuple(x for x in (entries[key], entry.line) if x is not None),
                    )
                )
            else:
                entries[key] = entry.line
    return diags


def select_specs(specs: SpecSet, tpc=None, version=None) -> SpecSet:
    """Keep expressions and deprecated lists for ``tpc`` whose range covers ``version``.

    ``None`` for either argument means no filtering on it.
    """
    v = parse_version(version) if version is not None else None

    def keep(t, r):
        return (tpc is None or t == tpc) and (v is None or _covers(r, v))

    return SpecSet(
        tuple(e for e in specs.expressions if keep(e.tpc, e.versions)),
        tuple(d for d in specs.deprecated if keep(d.tpc, d.versions)),
    )


def load_spec_files(paths) -> SpecSet:
    out = SpecSet()
    for path in paths:
        out = out.merge(parse_spec_file(Path(path).read_text(encoding="utf-8"), source=str(path)))
    return out
