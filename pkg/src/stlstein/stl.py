"""STL formula trees, the concrete text syntax, and structural validation.

Time intervals are discrete step counts. ``And``/``Or`` are n-ary; the derived
operators (``Or``, ``Implies``, ``Eventually``, ``Always``) are kept as their
own node types so evaluators can use direct min/max rules for them.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Union


@dataclass(frozen=True)
class Interval:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo < 0 or self.hi < 0:
            raise ValueError(f"negative interval bound in [{self.lo},{self.hi}]")
        if self.lo > self.hi:
            raise ValueError(f"interval lower bound exceeds upper bound: [{self.lo},{self.hi}]")


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Pred:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("And needs at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        if len(self.children) < 2:
            raise ValueError("Or needs at least two children")


@dataclass(frozen=True)
class Implies:
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Until:
    interval: Interval
    lhs: "Formula"
    rhs: "Formula"


@dataclass(frozen=True)
class Eventually:
    interval: Interval
    child: "Formula"


@dataclass(frozen=True)
class Always:
    interval: Interval
    child: "Formula"


Formula = Union[TrueF, Pred, Not, And, Or, Implies, Until, Eventually, Always]


def conj(parts) -> Formula:
    """n-ary conjunction that tolerates 0 or 1 operands."""
    parts = list(parts)
    if not parts:
        return TrueF()
    if len(parts) == 1:
        return parts[0]
    return And(tuple(parts))


def children(f: Formula) -> tuple:
    if isinstance(f, (TrueF, Pred)):
        return ()
    if isinstance(f, (Not, Eventually, Always)):
        return (f.child,)
    if isinstance(f, (And, Or)):
        return f.children
    if isinstance(f, (Implies, Until)):
        return (f.lhs, f.rhs)
    raise TypeError(f"not a formula: {f!r}")


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from walk(c)


def predicate_names(f: Formula) -> set[str]:
    return {g.name for g in walk(f) if isinstance(g, Pred)}


def required_horizon(f: Formula) -> int:
    """Largest sum of interval upper bounds along any root-to-leaf path.

    Evaluating ``f`` at t=0 touches states up to this index.
    """
    own = f.interval.hi if isinstance(f, (Until, Eventually, Always)) else 0
    return own + max((required_horizon(c) for c in children(f)), default=0)


# ---------------------------------------------------------------- parsing

class FormulaSyntaxError(ValueError):
    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"{msg} (line {line}, column {col})")
        self.line = line
        self.col = col


KEYWORDS = {"TRUE", "not", "and", "or", "implies", "U", "F", "G"}

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)|(?P<int>-?\d+)|(?P<punct>[\[\](),])"
)


@dataclass
class _Tok:
    kind: str  # 'ident', 'kw', 'int', 'punct', 'eof'
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        s = m.group()
        if kind == "ws":
            for i, ch in enumerate(s):
                if ch == "\n":
                    line += 1
                    line_start = pos + i + 1
        else:
            if kind == "ident" and s in KEYWORDS:
                kind = "kw"
            toks.append(_Tok(kind, s, line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def _err(self, msg, tok=None):
        tok = tok or self.cur
        return FormulaSyntaxError(msg, tok.line, tok.col)

    def accept(self, text):
        if self.cur.kind in ("kw", "punct") and self.cur.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text):
        if not self.accept(text):
            found = self.cur.text or "end of input"
            raise self._err(f"expected {text!r}, found {found!r}")

    def parse(self) -> Formula:
        f = self.implies()
        if self.cur.kind != "eof":
            raise self._err(f"unexpected token {self.cur.text!r}")
        return f

    def implies(self):
        lhs = self.disj()
        if self.accept("implies"):
            return Implies(lhs, self.implies())
        return lhs

    def disj(self):
        parts = [self.conj()]
        while self.accept("or"):
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.until()]
        while self.accept("and"):
            parts.append(self.until())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def until(self):
        lhs = self.unary()
        while self.cur.kind == "kw" and self.cur.text == "U":
            self.i += 1
            iv = self.interval()
            lhs = Until(iv, lhs, self.unary())
        return lhs

    def interval(self) -> Interval:
        start = self.cur
        self.expect("[")
        lo = self.integer()
        self.expect(",")
        hi = self.integer()
        self.expect("]")
        if lo > hi:
            raise self._err(f"interval lower bound exceeds upper bound: [{lo},{hi}]", start)
        return Interval(lo, hi)

    def integer(self) -> int:
        tok = self.cur
        if tok.kind != "int":
            raise self._err(f"expected integer, found {tok.text or 'end of input'!r}")
        self.i += 1
        value = int(tok.text)
        if value < 0:
            raise self._err(f"negative interval bound {value}", tok)
        return value

    def unary(self):
        tok = self.cur
        if self.accept("not"):
            return Not(self.unary())
        if self.accept("F"):
            iv = self.interval()
            return Eventually(iv, self.unary())
        if self.accept("G"):
            iv = self.interval()
            return Always(iv, self.unary())
        if self.accept("("):
            f = self.implies()
            self.expect(")")
            return f
        if self.accept("TRUE"):
            return TrueF()
        if tok.kind == "ident":
            self.i += 1
            return Pred(tok.text)
        raise self._err(f"unexpected token {tok.text or 'end of input'!r}")


def parse_formula(text: str) -> Formula:
    return _Parser(text).parse()


# ---------------------------------------------------------------- printing

# binding strength, higher binds tighter
_PREC = {Implies: 1, Or: 2, And: 3, Until: 4, Not: 5, Eventually: 5, Always: 5, Pred: 6, TrueF: 6}


def _wrap(f: Formula, min_prec: int) -> str:
    s = pretty_print(f)
    return f"({s})" if _PREC[type(f)] < min_prec else s


def _iv(iv: Interval) -> str:
    return f"[{iv.lo},{iv.hi}]"


def pretty_print(f: Formula) -> str:
    if isinstance(f, TrueF):
        return "TRUE"
    if isinstance(f, Pred):
        return f.name
    if isinstance(f, Not):
        return "not " + _wrap(f.child, 5)
    if isinstance(f, Eventually):
        return f"F{_iv(f.interval)} " + _wrap(f.child, 5)
    if isinstance(f, Always):
        return f"G{_iv(f.interval)} " + _wrap(f.child, 5)
    if isinstance(f, Until):
        # left-associative chain: a nested Until on the left needs no parens
        return f"{_wrap(f.lhs, 4)} U{_iv(f.interval)} {_wrap(f.rhs, 5)}"
    if isinstance(f, And):
        return " and ".join(_wrap(c, 4) for c in f.children)
    if isinstance(f, Or):
        return " or ".join(_wrap(c, 3) for c in f.children)
    if isinstance(f, Implies):
        return f"{_wrap(f.lhs, 2)} implies {_wrap(f.rhs, 1)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------- validation

@dataclass(frozen=True)
class Diagnostic:
    kind: str  # 'unbound' or 'horizon'
    message: str
    subformula: Formula | None = None


def validate(f: Formula, bindings, horizon: int) -> list[Diagnostic]:
    """Return an empty list when ``f`` is evaluable at t=0 on an H-step trace."""
    diags = []
    for name in sorted(predicate_names(f) - set(bindings)):
        diags.append(Diagnostic("unbound", f"unbound predicate {name!r}", Pred(name)))
    need = required_horizon(f)
    if need > horizon:
        culprit = _overflowing_subformula(f, horizon, 0)
        diags.append(Diagnostic(
            "horizon",
            f"formula needs trace length {need + 1} but horizon {horizon} gives {horizon + 1}: "
            f"{pretty_print(culprit)}",
            culprit,
        ))
    return diags


def _overflowing_subformula(f: Formula, horizon: int, offset: int) -> Formula:
    own = f.interval.hi if isinstance(f, (Until, Eventually, Always)) else 0
    if offset + own > horizon:
        return f
    for c in children(f):
        if offset + own + required_horizon(c) > horizon:
            return _overflowing_subformula(c, horizon, offset + own)
    return f


class ValidationError(ValueError):
    def __init__(self, diagnostics: list[Diagnostic]):
        super().__init__("; ".join(d.message for d in diagnostics))
        self.diagnostics = diagnostics


def check(f: Formula, bindings, horizon: int) -> None:
    diags = validate(f, bindings, horizon)
    if diags:
        raise ValidationError(diags)
