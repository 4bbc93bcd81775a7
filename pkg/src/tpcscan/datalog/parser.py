"""Parser for a Soufflé-like Datalog subset.

Supported: ``.decl``, ``.input``, ``.output``, facts, rules with ``:-``,
negation ``!``, comparisons ``= != < <= > >=`` over ``+ - *`` expressions,
``//`` and ``/* */`` comments, the anonymous variable ``_``.
"""

from __future__ import annotations

import re
from collections import defaultdict

from .program import Program, make_program
from .terms import (
    COMPARISONS,
    Atom,
    BinOp,
    Constraint,
    DatalogError,
    DatalogSyntaxError,
    Declaration,
    Literal,
    Rule,
    Var,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<directive>\.(?:decl|input|output)\b)
  | (?P<number>0[xX][0-9a-fA-F]+|\d+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>:-|!=|<=|>=|[(),.:!=<>+\-*])
    """,
    re.VERBOSE | re.DOTALL,
)


class _Tok:
    __slots__ = ("kind", "text", "line", "col")

    def __init__(self, kind, text, line, col):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.line}:{self.col}"


def _tokenize(text: str):
    pos, line, line_start = 0, 1, 0
    toks = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DatalogSyntaxError(
                f"unexpected character {text[pos]!r}", line=line, column=pos - line_start + 1
            )
        kind = m.lastgroup
        chunk = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "bcomment":
            nls = chunk.count("\n")
            if nls:
                line += nls
                line_start = pos + chunk.rfind("\n") + 1
        elif kind not in ("ws", "lcomment"):
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


def _unescape(s: str) -> str:
    body = s[1:-1]
    return re.sub(r"\\(.)", lambda m: {"n": "\n", "t": "\t"}.get(m.group(1), m.group(1)), body)


class _Parser:
    def __init__(self, text):
        self.toks = _tokenize(text)
        self.i = 0
        self.anon = 0

    @property
    def tok(self):
        return self.toks[self.i]

    def error(self, msg, tok=None):
        tok = tok or self.tok
        return DatalogSyntaxError(msg, line=tok.line, column=tok.col)

    def advance(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def accept(self, text):
        if self.tok.text == text and self.tok.kind in ("op", "directive"):
            return self.advance()
        return None

    def expect(self, text):
        tok = self.accept(text)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected '{text}', found '{found}'")
        return tok

    def ident(self):
        if self.tok.kind != "ident":
            raise self.error(f"expected identifier, found '{self.tok.text or 'end of input'}'")
        return self.advance().text

    # ---- top level -------------------------------------------------------

    def program(self):
        decls, inputs, outputs, rules = [], [], [], []
        facts = defaultdict(list)
        fact_lines = {}
        while self.tok.kind != "eof":
            tok = self.tok
            if tok.kind == "directive":
                self.advance()
                if tok.text == ".decl":
                    decls.append(self.declaration(tok.line))
                else:
                    names = [self.ident()]
                    while self.accept(","):
                        names.append(self.ident())
                    (inputs if tok.text == ".input" else outputs).extend(names)
                continue
            head = self.atom()
            if self.accept(":-"):
                body = [self.body_item()]
                while self.accept(","):
                    body.append(self.body_item())
                self.expect(".")
                rules.append(Rule(head, tuple(body), line=tok.line))
            else:
                self.expect(".")
                if not head.is_ground():
                    raise DatalogSyntaxError(
                        f"fact '{head}' contains variables", line=tok.line, column=tok.col
                    )
                facts[head.relation].append(head.args)
                fact_lines.setdefault(head.relation, tok.line)
        return decls, inputs, outputs, rules, facts, fact_lines

    def declaration(self, line):
        name = self.ident()
        self.expect("(")
        cols = []
        if not self.accept(")"):
            while True:
                col = self.ident()
                self.expect(":")
                cols.append((col, self.ident()))
                if self.accept(")"):
                    break
                self.expect(",")
        return Declaration(name, tuple(cols), line=line)

    def atom(self):
        name = self.ident()
        if not self.accept("("):
            raise self.error(f"expected '(' after relation name '{name}'")
        args = []
        if not self.accept(")"):
            while True:
                args.append(self.term())
                if self.accept(")"):
                    break
                self.expect(",")
        return Atom(name, tuple(args))

    def term(self):
        tok = self.tok
        if tok.kind == "ident":
            self.advance()
            if tok.text == "_":
                self.anon += 1
                return Var(f"_{self.anon}")
            if tok.text[0].isupper():
                return Var(tok.text)
            raise self.error(
                f"'{tok.text}' is not a variable (variables start uppercase; quote symbols)", tok
            )
        if tok.kind == "number":
            self.advance()
            return int(tok.text, 0)
        if tok.kind == "string":
            self.advance()
            return _unescape(tok.text)
        if tok.kind == "op" and tok.text == "-" and self.toks[self.i + 1].kind == "number":
            self.advance()
            return -int(self.advance().text, 0)
        raise self.error(f"expected a term, found '{tok.text or 'end of input'}'")

    def body_item(self):
        if self.accept("!"):
            return Literal(self.atom(), negated=True)
        tok = self.tok
        nxt = self.toks[self.i + 1]
        if tok.kind == "ident" and nxt.kind == "op" and nxt.text == "(":
            return Literal(self.atom())
        left = self.expr()
        if self.tok.kind != "op" or self.tok.text not in COMPARISONS:
            raise self.error(f"expected comparison operator, found '{self.tok.text}'")
        op = self.advance().text
        return Constraint(op, left, self.expr())

    def expr(self):
        node = self.mul()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.mul())
        return node

    def mul(self):
        node = self.primary()
        while self.tok.kind == "op" and self.tok.text == "*":
            self.advance()
            node = BinOp("*", node, self.primary())
        return node

    def primary(self):
        if self.accept("("):
            node = self.expr()
            self.expect(")")
            return node
        return self.term()


def parse_program(text: str, source=None) -> Program:
    """Parse and validate Datalog source text."""
    try:
        decls, inputs, outputs, rules, facts, fact_lines = _Parser(text).program()
        try:
            return make_program(decls, rules, inputs, outputs, facts)
        except DatalogError as exc:
            if exc.line is None:
                # Attribute fact-level schema errors to the first offending line.
                for rel, line in fact_lines.items():
                    if f"'{rel}'" in exc.message:
                        exc.line = line
                        exc.args = (exc._format(),)
                        break
            raise
    except DatalogError as exc:
        if source is not None:
            exc.with_source(source)
        raise


def parse_atom(text: str) -> Atom:
    """Parse a single atom such as ``path(1, Y)``."""
    p = _Parser(text)
    atom = p.atom()
    if p.tok.kind != "eof":
        raise p.error(f"unexpected '{p.tok.text}' after atom")
    return atom
