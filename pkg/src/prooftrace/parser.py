"""Tokenizer and operator-precedence parser for the supported Prolog subset.

Supported: facts, rules, conjunction, ``\\+``, ``is``, comparisons, ``=``,
``==``, ``\\==``, ``+ - * /``, unary minus, parentheses, integer and decimal
literals, quoted atoms and ``%`` comments.  A ``% id: <name>`` comment
directly above a clause becomes that clause's provenance.  ``?- Goal.``
lines are collected as queries.

Disjunction, cut, lists, curly terms and directives are rejected with a
diagnostic rather than silently misparsed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .terms import (
    BUILTIN_OPS, INFIX_OPS, PREFIX_OPS, Atom, Builtin, Call, Clause,
    KnowledgeBase, Naf, Num, Struct, Var,
)

__all__ = [
    "SourceProgram", "ParseDiagnostic", "ParseError", "Token",
    "tokenize", "parse_program", "parse_query", "parse_term",
]


@dataclass(frozen=True)
class SourceProgram:
    text: str
    origin: str = "<string>"

    def __post_init__(self):
        if not self.origin:
            raise ValueError("origin must be non-empty")


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int
    column: int
    message: str
    kind: str = "error"

    def __str__(self):
        return f"{self.line}:{self.column}: {self.kind}: {self.message}"


class ParseError(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Token:
    kind: str   # name, var, number, punct, end, provenance, error
    value: object
    line: int
    column: int
    # True when whitespace or a comment precedes the token
    spaced: bool = True
    quoted: bool = False

    def __repr__(self):
        return f"{self.kind} {self.value!r}"


_SYMBOL_CHARS = set("+-*/\\<>=:.?")
_PUNCT = set("(),|[]{}!;")
_PROVENANCE = re.compile(r"%\s*id:\s*(\S+)\s*$")
# 1r3 is an exact rational literal (the form non-terminating values render as)
_NUMBER = re.compile(r"(\d+)r([1-9]\d*)|\d+(?:\.\d+)?(?:[eE][+-]?\d+)?")
_NAME = re.compile(r"[a-z][A-Za-z0-9_]*")
_VAR = re.compile(r"[A-Z_][A-Za-z0-9_]*")


def _scan(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)
    spaced = True

    def advance(k):
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line += 1
                col = 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch.isspace():
            advance(1)
            spaced = True
            continue
        if ch == "%":
            end = text.find("\n", i)
            end = n if end < 0 else end
            m = _PROVENANCE.match(text, i, end)
            if m:
                tokens.append(Token("provenance", m.group(1), line, col))
            advance(end - i)
            spaced = True
            continue
        if text.startswith("/*", i):
            end = text.find("*/", i + 2)
            if end < 0:
                tokens.append(Token("error", "unterminated block comment", line, col))
                break
            advance(end + 2 - i)
            spaced = True
            continue
        start_line, start_col = line, col
        if ch.isdigit():
            m = _NUMBER.match(text, i)
            value = Fraction(int(m.group(1)), int(m.group(2))) if m.group(1) else Fraction(m.group())
            tokens.append(Token("number", value, line, col, spaced))
            advance(m.end() - i)
        elif ch.isascii() and (ch.isalpha() or ch == "_"):
            m = (_NAME if ch.islower() else _VAR).match(text, i)
            kind = "name" if ch.islower() else "var"
            tokens.append(Token(kind, m.group(), line, col, spaced))
            advance(m.end() - i)
        elif ch == "'":
            j = i + 1
            chars = []
            while j < n and text[j] != "'":
                if text[j] == "\\" and j + 1 < n:
                    j += 1
                if text[j] == "\n":
                    break
                chars.append(text[j])
                j += 1
            if j >= n or text[j] != "'":
                tokens.append(Token("error", "unterminated quoted atom", line, col, spaced))
                advance(j - i)
            else:
                tokens.append(Token("name", "".join(chars), line, col, spaced, quoted=True))
                advance(j + 1 - i)
        elif ch == "." and (i + 1 == n or text[i + 1].isspace() or text[i + 1] == "%"):
            tokens.append(Token("end", ".", line, col, spaced))
            advance(1)
        elif ch in _SYMBOL_CHARS:
            j = i
            while j < n and text[j] in _SYMBOL_CHARS:
                # a '.' that ends a clause is not part of the symbol
                if text[j] == "." and (j + 1 == n or text[j + 1].isspace() or text[j + 1] == "%"):
                    break
                j += 1
            tokens.append(Token("name", text[i:j], line, col, spaced))
            advance(j - i)
        elif ch in _PUNCT:
            tokens.append(Token("punct", ch, line, col, spaced))
            advance(1)
        else:
            tokens.append(Token("error", f"illegal character {ch!r}", start_line, start_col, spaced))
            advance(1)
        spaced = False
    return tokens


def tokenize(p) -> list[Token]:
    """Tokens of a program text, raising ParseError on the first illegal character."""
    text = p.text if isinstance(p, SourceProgram) else p
    tokens = _scan(text)
    for t in tokens:
        if t.kind == "error":
            raise ParseError([ParseDiagnostic(t.line, t.column, t.value)])
    return tokens


class _Fail(Exception):
    def __init__(self, token, message):
        self.token = token
        self.message = message


_UNSUPPORTED = {
    ";": "disjunction ';' is not supported",
    "!": "cut '!' is not supported",
    "[": "lists are not supported",
    "]": "lists are not supported",
    "|": "lists are not supported",
    "{": "curly-brace terms are not supported",
    "}": "curly-brace terms are not supported",
}


class _Parser:
    """Precedence-climbing parser over one clause worth of tokens."""

    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0
        self.where: dict[int, Token] = {}
        self.anon = 0
        self.last = tokens[-1] if tokens else None

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> Token:
        tok = self.peek()
        if tok is None:
            raise _Fail(self.last, "unexpected end of clause")
        self.pos += 1
        return tok

    def mark(self, term, tok):
        self.where[id(term)] = tok
        return term

    def expect(self, value):
        tok = self.take()
        if tok.kind != "punct" or tok.value != value:
            raise _Fail(tok, f"expected {value!r}, found {tok.value!r}")
        return tok

    def check_supported(self, tok):
        if tok.kind == "error":
            raise _Fail(tok, tok.value)
        if tok.kind == "punct" and tok.value in _UNSUPPORTED:
            raise _Fail(tok, _UNSUPPORTED[tok.value])

    def _starts_term(self, tok) -> bool:
        if tok is None or tok.kind == "end":
            return False
        if tok.kind == "punct":
            return tok.value == "("
        if tok.kind == "name" and not tok.quoted and tok.value in INFIX_OPS \
                and tok.value not in PREFIX_OPS:
            # an infix operator cannot start an operand ...
            nxt = self.tokens[self.pos + 1] if self.pos + 1 < len(self.tokens) else None
            # ... unless it is used as a functor, e.g. +(a, b)
            return nxt is not None and nxt.kind == "punct" and nxt.value == "(" and not nxt.spaced
        return True

    def parse(self, max_prec: int):
        left, left_prec = self.primary(max_prec)
        while True:
            tok = self.peek()
            if tok is None or tok.kind == "end":
                break
            self.check_supported(tok)
            if tok.kind == "punct" and tok.value == ",":
                op = ","
            elif tok.kind == "name" and tok.value in INFIX_OPS and not tok.quoted:
                op = tok.value
            else:
                break
            prec, typ = INFIX_OPS[op]
            if prec > max_prec:
                break
            left_max = prec - 1 if typ[0] == "x" else prec
            if left_prec > left_max:
                break
            right_max = prec - 1 if typ[2] == "x" else prec
            self.take()
            right, _ = self.parse(right_max)
            left = self.mark(Struct(op, (left, right)), tok)
            left_prec = prec
        return left, left_prec

    def primary(self, max_prec: int):
        tok = self.take()
        self.check_supported(tok)
        if tok.kind == "number":
            return self.mark(Num(tok.value), tok), 0
        if tok.kind == "var":
            if tok.value == "_":
                self.anon += 1
                return self.mark(Var(f"_{self.anon}"), tok), 0
            return self.mark(Var(tok.value), tok), 0
        if tok.kind == "punct" and tok.value == "(":
            term, _ = self.parse(1200)
            self.expect(")")
            return term, 0
        if tok.kind == "name":
            nxt = self.peek()
            if tok.quoted and not (nxt is not None and nxt.kind == "punct" and nxt.value == "("
                                   and not nxt.spaced):
                return self.mark(Atom(tok.value), tok), 0
            if nxt is not None and nxt.kind == "punct" and nxt.value == "(" and not nxt.spaced:
                self.take()
                args = [self.parse(999)[0]]
                while True:
                    sep = self.take()
                    self.check_supported(sep)
                    if sep.kind == "punct" and sep.value == ",":
                        args.append(self.parse(999)[0])
                    elif sep.kind == "punct" and sep.value == ")":
                        break
                    else:
                        raise _Fail(sep, f"expected ',' or ')', found {sep.value!r}")
                return self.mark(Struct(tok.value, tuple(args)), tok), 0
            if tok.value in PREFIX_OPS and self._starts_term(nxt):
                prec, typ = PREFIX_OPS[tok.value]
                arg_max = prec if typ == "fy" else prec - 1
                if prec > max_prec:
                    prec, arg_max = 999, 999
                if tok.value == "-" and nxt.kind == "number":
                    self.take()
                    return self.mark(Num(-nxt.value), tok), 0
                arg, _ = self.parse(arg_max)
                return self.mark(Struct(tok.value, (arg,)), tok), prec
            if tok.value in ("?-", ":-"):
                raise _Fail(tok, f"unexpected {tok.value!r}")
            if tok.value in INFIX_OPS and not tok.value.isalpha():
                raise _Fail(tok, f"operator {tok.value!r} is missing its left operand")
            return self.mark(Atom(tok.value), tok), 0
        if tok.kind == "end":
            raise _Fail(tok, "unexpected end of clause")
        raise _Fail(tok, f"unexpected {tok.value!r}")

    def finish(self):
        tok = self.peek()
        if tok is not None:
            self.check_supported(tok)
            raise _Fail(tok, f"unexpected {tok.value!r}")

    def position(self, term, fallback):
        return self.where.get(id(term), fallback)

    def to_goals(self, term, fallback) -> list:
        goals = []
        while isinstance(term, Struct) and term.functor == "," and len(term.args) == 2:
            goals.append(self.to_goal(term.args[0], fallback))
            term = term.args[1]
        goals.append(self.to_goal(term, fallback))
        return goals

    def to_goal(self, term, fallback, negated=False):
        tok = self.position(term, fallback)
        if isinstance(term, Var):
            raise _Fail(tok, "a variable cannot be used as a goal")
        if isinstance(term, Num):
            raise _Fail(tok, "a number cannot be used as a goal")
        if isinstance(term, Struct):
            if term.functor == "\\+" and len(term.args) == 1:
                if negated:
                    raise _Fail(tok, "nested negation is not supported")
                inner = term.args[0]
                if isinstance(inner, Struct) and inner.functor == "," and len(inner.args) == 2:
                    raise _Fail(tok, "negation of a conjunction is not supported")
                return Naf(self.to_goal(inner, tok, negated=True))
            if term.functor in BUILTIN_OPS and len(term.args) == 2:
                return Builtin(term.functor, term.args)
            if term.functor in (",", ":-") and len(term.args) == 2:
                raise _Fail(tok, f"unexpected {term.functor!r} inside a goal")
        return Call(term)

    def check_head(self, head, fallback):
        tok = self.position(head, fallback)
        if not isinstance(head, (Atom, Struct)):
            raise _Fail(tok, "clause head must be an atom or compound term")
        if isinstance(head, Struct) and len(head.args) == 2 and (
                head.functor in BUILTIN_OPS or head.functor == ","):
            raise _Fail(tok, f"cannot define built-in {head.functor}/2")
        if isinstance(head, Struct) and head.functor == "\\+" and len(head.args) == 1:
            raise _Fail(tok, "cannot define \\+/1")


def _split_clauses(tokens):
    """Group tokens into (provenance tokens, clause tokens, end token) chunks."""
    chunk, provs = [], []
    for tok in tokens:
        if tok.kind == "provenance":
            if chunk:
                # comment inside a clause; it belongs to nothing
                continue
            provs.append(tok)
        elif tok.kind == "end":
            yield provs, chunk, tok
            chunk, provs = [], []
        else:
            chunk.append(tok)
    if chunk or provs:
        yield provs, chunk, None


def _parse_clause_tokens(chunk, end_tok):
    """Returns ('clause', Clause-args) or ('query', goals); raises _Fail."""
    parser = _Parser(chunk)
    first = chunk[0]
    if first.kind == "name" and first.value == ":-":
        raise _Fail(first, "directives are not supported")
    if first.kind == "name" and first.value == "?-" and len(chunk) > 1:
        parser.take()
        body, _ = parser.parse(1199)
        parser.finish()
        if end_tok is None:
            raise _Fail(chunk[-1], "query is missing its terminating '.'")
        return "query", parser.to_goals(body, first)
    term, _ = parser.parse(1200)
    parser.finish()
    if end_tok is None:
        raise _Fail(chunk[-1], "clause is missing its terminating '.'")
    if isinstance(term, Struct) and term.functor == ":-" and len(term.args) == 2:
        head, body = term.args
        parser.check_head(head, first)
        return "clause", (head, tuple(parser.to_goals(body, first)))
    parser.check_head(term, first)
    return "clause", (term, ())


def parse_program(p) -> KnowledgeBase:
    """Parse a whole program, collecting every clause-level error.

    Raises ParseError carrying all diagnostics if any clause fails.
    Warnings (e.g. a dangling ``% id:`` comment) are dropped here; use
    parse_program_ex to see them.
    """
    kb, diagnostics = parse_program_ex(p)
    errors = [d for d in diagnostics if d.kind == "error"]
    if errors:
        raise ParseError(errors)
    return kb


def parse_program_ex(p):
    """Like parse_program but returns (kb or None, diagnostics) without raising."""
    text = p.text if isinstance(p, SourceProgram) else p
    diagnostics: list[ParseDiagnostic] = []
    clauses, queries = [], []
    for provs, chunk, end_tok in _split_clauses(_scan(text)):
        if not chunk:
            if end_tok is not None:
                diagnostics.append(ParseDiagnostic(end_tok.line, end_tok.column, "empty clause"))
            for tok in provs:
                diagnostics.append(ParseDiagnostic(
                    tok.line, tok.column, "provenance comment not followed by a clause", "warning"))
            continue
        for tok in provs[:-1]:
            diagnostics.append(ParseDiagnostic(
                tok.line, tok.column, "provenance comment overridden by a later one", "warning"))
        try:
            kind, value = _parse_clause_tokens(chunk, end_tok)
        except _Fail as fail:
            tok = fail.token
            diagnostics.append(ParseDiagnostic(tok.line, tok.column, fail.message))
            continue
        if kind == "query":
            queries.append(value)
        else:
            head, body = value
            clauses.append(Clause(head, body, provs[-1].value if provs else None))
    if any(d.kind == "error" for d in diagnostics):
        return None, diagnostics
    return KnowledgeBase(clauses, queries), diagnostics


def parse_query(text: str) -> list:
    """Parse ``?- g1, g2.`` (prefix and final dot optional) into goals."""
    tokens = [t for t in _scan(text) if t.kind != "provenance"]
    if tokens and tokens[0].kind == "name" and tokens[0].value == "?-":
        tokens = tokens[1:]
    if tokens and tokens[-1].kind == "end":
        tokens = tokens[:-1]
    if not tokens:
        raise ParseError([ParseDiagnostic(1, 1, "empty query")])
    parser = _Parser(tokens)
    try:
        term, _ = parser.parse(1200)
        parser.finish()
        return parser.to_goals(term, tokens[0])
    except _Fail as fail:
        raise ParseError([ParseDiagnostic(fail.token.line, fail.token.column, fail.message)])


def parse_term(text: str):
    """Parse a single term (no trailing dot required)."""
    tokens = [t for t in _scan(text) if t.kind != "provenance"]
    if tokens and tokens[-1].kind == "end":
        tokens = tokens[:-1]
    if not tokens:
        raise ParseError([ParseDiagnostic(1, 1, "empty term")])
    parser = _Parser(tokens)
    try:
        term, _ = parser.parse(1200)
        parser.finish()
        return term
    except _Fail as fail:
        raise ParseError([ParseDiagnostic(fail.token.line, fail.token.column, fail.message)])
