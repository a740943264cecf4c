"""First-order formulas over membership and equality.

The language has two atoms, ``x in y`` and ``x = y``, the usual Boolean
connectives, unbounded quantifiers, and bounded-quantifier sugar
``exists y in x. f`` / ``forall y in x. f`` which abbreviate
``exists y. (y in x & f)`` and ``forall y. (y in x -> f)``.

Concrete grammar (whitespace-insensitive)::

    formula := iff
    iff     := imp ("<->" imp)*          # left-associative
    imp     := or ("->" imp)?            # right-associative
    or      := and ("|" and)*
    and     := unary ("&" unary)*
    unary   := "!" unary | quant | atom | "(" formula ")" | "true" | "false"
    quant   := ("exists" | "forall") var ("," var)* ("in" var)? "." formula
    atom    := var ("in" | "=") var
    var     := [A-Za-z_][A-Za-z0-9_]*

``exists x, y. f`` abbreviates nested quantifiers of the same kind; the
``in`` form allows a single quantified variable, distinct from the bound.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .runtime import FormulaSyntaxError

__all__ = [
    "Formula", "TruthConst", "Atom", "Not", "And", "Or", "Implies", "Iff",
    "Exists", "Forall", "BoundedExists", "BoundedForall",
    "TRUE", "FALSE", "parse", "render", "desugar_bounded", "rank",
    "free_vars", "prenex", "PrenexFormula", "alternation_profile",
]


@dataclass(frozen=True)
class Formula:
    """Base class for formula AST nodes.  All nodes are immutable and hashable."""


@dataclass(frozen=True)
class TruthConst(Formula):
    value: bool


@dataclass(frozen=True)
class Atom(Formula):
    op: str  # "mem" or "eq"
    left: str
    right: str

    def __post_init__(self):
        if self.op not in ("mem", "eq"):
            raise ValueError(f"unknown atom operator {self.op!r}")


@dataclass(frozen=True)
class Not(Formula):
    body: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class BoundedExists(Formula):
    var: str
    bound: str
    body: Formula

    def __post_init__(self):
        if self.var == self.bound:
            raise ValueError("bounded quantifier needs distinct variables")


@dataclass(frozen=True)
class BoundedForall(Formula):
    var: str
    bound: str
    body: Formula

    def __post_init__(self):
        if self.var == self.bound:
            raise ValueError("bounded quantifier needs distinct variables")


TRUE = TruthConst(True)
FALSE = TruthConst(False)

_BINARY = (And, Or, Implies, Iff)
_QUANT = (Exists, Forall, BoundedExists, BoundedForall)


# ---------------------------------------------------------------------------
# Tokenizer / parser

_KEYWORDS = {"exists", "forall", "in", "true", "false"}

_TOKEN_RE = re.compile(
    r"(?P<ws>\s+)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><->|->|\||&|!|\(|\)|\.|,|=)"
)


def _tokenize(text: str):
    tokens = []
    line, col = 1, 1
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        lexeme = m.group(0)
        if m.lastgroup == "name":
            kind = lexeme if lexeme in _KEYWORDS else "var"
            tokens.append((kind, lexeme, line, col))
        elif m.lastgroup == "op":
            tokens.append((lexeme, lexeme, line, col))
        nl = lexeme.count("\n")
        if nl:
            line += nl
            col = len(lexeme) - lexeme.rfind("\n")
        else:
            col += len(lexeme)
        pos = m.end()
    tokens.append(("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str):
        tok = self.next()
        if tok[0] != kind:
            raise FormulaSyntaxError(
                f"expected {kind!r}, found {tok[1]!r}" if tok[0] != "eof"
                else f"expected {kind!r}, found end of input", tok[2], tok[3])
        return tok

    def fail(self, message: str):
        tok = self.peek()
        raise FormulaSyntaxError(message, tok[2], tok[3])

    def parse(self) -> Formula:
        f = self.iff()
        tok = self.peek()
        if tok[0] != "eof":
            self.fail(f"unexpected {tok[1]!r} after formula")
        return f

    def iff(self) -> Formula:
        f = self.imp()
        while self.peek()[0] == "<->":
            self.next()
            f = Iff(f, self.imp())
        return f

    def imp(self) -> Formula:
        f = self.or_()
        if self.peek()[0] == "->":
            self.next()
            return Implies(f, self.imp())
        return f

    def or_(self) -> Formula:
        f = self.and_()
        while self.peek()[0] == "|":
            self.next()
            f = Or(f, self.and_())
        return f

    def and_(self) -> Formula:
        f = self.unary()
        while self.peek()[0] == "&":
            self.next()
            f = And(f, self.unary())
        return f

    def unary(self) -> Formula:
        kind, lexeme, line, col = self.peek()
        if kind == "!":
            self.next()
            return Not(self.unary())
        if kind in ("exists", "forall"):
            return self.quant()
        if kind == "(":
            self.next()
            f = self.iff()
            self.expect(")")
            return f
        if kind == "true":
            self.next()
            return TRUE
        if kind == "false":
            self.next()
            return FALSE
        if kind == "var":
            return self.atom()
        self.fail(f"unexpected {lexeme!r}" if kind != "eof" else "unexpected end of input")

    def quant(self) -> Formula:
        kind = self.next()[0]
        names = [self.expect("var")[1]]
        while self.peek()[0] == ",":
            self.next()
            names.append(self.expect("var")[1])
        bound = None
        if self.peek()[0] == "in":
            tok = self.next()
            if len(names) != 1:
                raise FormulaSyntaxError(
                    "bounded quantifier permits a single variable", tok[2], tok[3])
            bound = self.expect("var")[1]
            if bound == names[0]:
                raise FormulaSyntaxError(
                    "bounded quantifier needs distinct variables", tok[2], tok[3])
        self.expect(".")
        body = self.iff()
        if bound is not None:
            cls = BoundedExists if kind == "exists" else BoundedForall
            return cls(names[0], bound, body)
        cls = Exists if kind == "exists" else Forall
        for name in reversed(names):
            body = cls(name, body)
        return body

    def atom(self) -> Formula:
        left = self.expect("var")[1]
        kind, lexeme, line, col = self.next()
        if kind == "in":
            return Atom("mem", left, self.expect("var")[1])
        if kind == "=":
            return Atom("eq", left, self.expect("var")[1])
        raise FormulaSyntaxError(
            f"expected 'in' or '=', found {lexeme!r}" if kind != "eof"
            else "expected 'in' or '=', found end of input", line, col)


def parse(text: str) -> Formula:
    """Parse formula source text into an AST."""
    return _Parser(text).parse()


def render(f: Formula) -> str:
    """Canonical text form; ``parse(render(f)) == f`` for every AST."""
    if isinstance(f, TruthConst):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        return f"{f.left} in {f.right}" if f.op == "mem" else f"{f.left} = {f.right}"
    if isinstance(f, Not):
        inner = render(f.body)
        if isinstance(f.body, _BINARY):
            return f"!{inner}"  # already wrapped in parens
        return f"!({inner})"
    if isinstance(f, _BINARY):
        op = {And: "&", Or: "|", Implies: "->", Iff: "<->"}[type(f)]
        return f"({_operand(f.left)} {op} {_operand(f.right)})"
    if isinstance(f, Exists):
        return f"exists {f.var}. {render(f.body)}"
    if isinstance(f, Forall):
        return f"forall {f.var}. {render(f.body)}"
    if isinstance(f, BoundedExists):
        return f"exists {f.var} in {f.bound}. {render(f.body)}"
    if isinstance(f, BoundedForall):
        return f"forall {f.var} in {f.bound}. {render(f.body)}"
    raise TypeError(f"not a formula: {f!r}")


def _operand(f: Formula) -> str:
    # Quantifier bodies extend maximally right, so a quantified operand of a
    # binary connective needs its own parentheses.
    text = render(f)
    if isinstance(f, _QUANT):
        return f"({text})"
    return text


# ---------------------------------------------------------------------------
# Basic measures and transformations

def free_vars(f: Formula) -> frozenset[str]:
    if isinstance(f, TruthConst):
        return frozenset()
    if isinstance(f, Atom):
        return frozenset((f.left, f.right))
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, _BINARY):
        return free_vars(f.left) | free_vars(f.right)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - {f.var}
    if isinstance(f, (BoundedExists, BoundedForall)):
        return (free_vars(f.body) - {f.var}) | {f.bound}
    raise TypeError(f"not a formula: {f!r}")


def desugar_bounded(f: Formula) -> Formula:
    """Expand bounded quantifiers into their unbounded definitions."""
    if isinstance(f, (TruthConst, Atom)):
        return f
    if isinstance(f, Not):
        return Not(desugar_bounded(f.body))
    if isinstance(f, _BINARY):
        return type(f)(desugar_bounded(f.left), desugar_bounded(f.right))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, desugar_bounded(f.body))
    if isinstance(f, BoundedExists):
        return Exists(f.var, And(Atom("mem", f.var, f.bound), desugar_bounded(f.body)))
    if isinstance(f, BoundedForall):
        return Forall(f.var, Implies(Atom("mem", f.var, f.bound), desugar_bounded(f.body)))
    raise TypeError(f"not a formula: {f!r}")


def rank(f: Formula) -> int:
    """Quantifier rank: 0 for quantifier-free, max over connectives, +1 per quantifier."""
    if isinstance(f, (TruthConst, Atom)):
        return 0
    if isinstance(f, Not):
        return rank(f.body)
    if isinstance(f, _BINARY):
        return max(rank(f.left), rank(f.right))
    if isinstance(f, (Exists, Forall, BoundedExists, BoundedForall)):
        return rank(f.body) + 1
    raise TypeError(f"not a formula: {f!r}")


def is_bounded(f: Formula) -> bool:
    """True iff f uses only atoms, connectives, and bounded quantifiers."""
    if isinstance(f, (TruthConst, Atom)):
        return True
    if isinstance(f, Not):
        return is_bounded(f.body)
    if isinstance(f, _BINARY):
        return is_bounded(f.left) and is_bounded(f.right)
    if isinstance(f, (BoundedExists, BoundedForall)):
        return is_bounded(f.body)
    return False


def _rename_free(f: Formula, mapping: dict[str, str]) -> Formula:
    """Rename free variable occurrences.  Quantified names shadow entries."""
    if not mapping:
        return f
    if isinstance(f, TruthConst):
        return f
    if isinstance(f, Atom):
        return Atom(f.op, mapping.get(f.left, f.left), mapping.get(f.right, f.right))
    if isinstance(f, Not):
        return Not(_rename_free(f.body, mapping))
    if isinstance(f, _BINARY):
        return type(f)(_rename_free(f.left, mapping), _rename_free(f.right, mapping))
    if isinstance(f, (Exists, Forall)):
        inner = {v: w for v, w in mapping.items() if v != f.var}
        return type(f)(f.var, _rename_free(f.body, inner))
    if isinstance(f, (BoundedExists, BoundedForall)):
        inner = {v: w for v, w in mapping.items() if v != f.var}
        return type(f)(f.var, mapping.get(f.bound, f.bound), _rename_free(f.body, inner))
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Prenex normal form

@dataclass(frozen=True)
class PrenexFormula:
    """Alternating quantifier-block prefix plus quantifier-free matrix.

    blocks: tuple of (kind, vars) with kind in {"exists", "forall"},
    adjacent blocks of different kind, all blocks nonempty.
    """

    blocks: tuple[tuple[str, tuple[str, ...]], ...]
    matrix: Formula

    def __post_init__(self):
        for kind, names in self.blocks:
            if kind not in ("exists", "forall") or not names:
                raise ValueError("malformed quantifier block")
        for (a, _), (b, _) in zip(self.blocks, self.blocks[1:]):
            if a == b:
                raise ValueError("adjacent blocks must alternate")

    def as_formula(self) -> Formula:
        f = self.matrix
        for kind, names in reversed(self.blocks):
            cls = Exists if kind == "exists" else Forall
            for name in reversed(names):
                f = cls(name, f)
        return f

    @property
    def rank(self) -> int:
        return sum(len(names) for _, names in self.blocks)

    @property
    def profile(self) -> tuple[int, int]:
        return alternation_profile(self)


def alternation_profile(p: PrenexFormula) -> tuple[int, int]:
    """(r, q): number of blocks and maximal block length; (0, 0) when quantifier-free."""
    if not p.blocks:
        return (0, 0)
    return (len(p.blocks), max(len(names) for _, names in p.blocks))


def _strip_dummies(f: Formula) -> Formula:
    """Drop quantifiers over variables with no free occurrence in their body."""
    if isinstance(f, (TruthConst, Atom)):
        return f
    if isinstance(f, Not):
        return Not(_strip_dummies(f.body))
    if isinstance(f, _BINARY):
        return type(f)(_strip_dummies(f.left), _strip_dummies(f.right))
    if isinstance(f, (Exists, Forall)):
        body = _strip_dummies(f.body)
        if f.var not in free_vars(body):
            return body
        return type(f)(f.var, body)
    raise TypeError(f"prenex requires a desugared formula: {f!r}")


def _has_quantifier(f: Formula) -> bool:
    if isinstance(f, (TruthConst, Atom)):
        return False
    if isinstance(f, Not):
        return _has_quantifier(f.body)
    if isinstance(f, _BINARY):
        return _has_quantifier(f.left) or _has_quantifier(f.right)
    return True


def _expand_iff(f: Formula) -> Formula:
    """Replace <-> by two implications wherever a quantifier occurs below it."""
    if isinstance(f, (TruthConst, Atom)):
        return f
    if isinstance(f, Not):
        return Not(_expand_iff(f.body))
    if isinstance(f, Iff):
        left, right = _expand_iff(f.left), _expand_iff(f.right)
        if _has_quantifier(left) or _has_quantifier(right):
            return And(Implies(left, right), Implies(right, left))
        return Iff(left, right)
    if isinstance(f, _BINARY):
        return type(f)(_expand_iff(f.left), _expand_iff(f.right))
    if isinstance(f, (Exists, Forall)):
        return type(f)(f.var, _expand_iff(f.body))
    raise TypeError(f"prenex requires a desugared formula: {f!r}")


class _FreshNames:
    def __init__(self, used: set[str]):
        self.used = set(used)

    def fresh(self, base: str) -> str:
        base = base.rstrip("0123456789") or "v"
        i = 0
        while f"{base}{i}" in self.used:
            i += 1
        name = f"{base}{i}"
        self.used.add(name)
        return name


def _rename_apart(f: Formula, names: _FreshNames) -> Formula:
    """Give every quantifier a globally unique variable."""
    if isinstance(f, (TruthConst, Atom)):
        return f
    if isinstance(f, Not):
        return Not(_rename_apart(f.body, names))
    if isinstance(f, _BINARY):
        return type(f)(_rename_apart(f.left, names), _rename_apart(f.right, names))
    if isinstance(f, (Exists, Forall)):
        new = names.fresh(f.var)
        body = _rename_free(f.body, {f.var: new})
        return type(f)(new, _rename_apart(body, names))
    raise TypeError(f"prenex requires a desugared formula: {f!r}")


def _pull(f: Formula) -> tuple[list[tuple[str, str]], Formula]:
    """Return (prefix, matrix); prefix entries are (kind, var), outermost first.

    Quantifiers of the left operand are pulled before the right operand's,
    negation and implication antecedents flip kinds.
    """
    if isinstance(f, (TruthConst, Atom, Iff)):
        return [], f
    if isinstance(f, Not):
        prefix, matrix = _pull(f.body)
        return [_flip(entry) for entry in prefix], Not(matrix)
    if isinstance(f, (And, Or)):
        pl, ml = _pull(f.left)
        pr, mr = _pull(f.right)
        return pl + pr, type(f)(ml, mr)
    if isinstance(f, Implies):
        pl, ml = _pull(f.left)
        pr, mr = _pull(f.right)
        return [_flip(entry) for entry in pl] + pr, Implies(ml, mr)
    if isinstance(f, Exists):
        prefix, matrix = _pull(f.body)
        return [("exists", f.var)] + prefix, matrix
    if isinstance(f, Forall):
        prefix, matrix = _pull(f.body)
        return [("forall", f.var)] + prefix, matrix
    raise TypeError(f"prenex requires a desugared formula: {f!r}")


def _flip(entry: tuple[str, str]) -> tuple[str, str]:
    kind, var = entry
    return ("forall" if kind == "exists" else "exists", var)


def prenex(f: Formula) -> PrenexFormula:
    """Prenex normal form with dummy quantifiers removed and blocks merged.

    The input is desugared first; <-> over quantified subformulas is expanded
    into two implications; quantified variables are renamed apart, so the
    result's matrix may use renamed bound variables.
    """
    f = desugar_bounded(f)
    f = _strip_dummies(f)
    f = _expand_iff(f)
    f = _strip_dummies(f)
    f = _rename_apart(f, _FreshNames(set(free_vars(f))))
    prefix, matrix = _pull(f)
    blocks: list[tuple[str, list[str]]] = []
    for kind, var in prefix:
        if blocks and blocks[-1][0] == kind:
            blocks[-1][1].append(var)
        else:
            blocks.append((kind, [var]))
    return PrenexFormula(tuple((k, tuple(vs)) for k, vs in blocks), matrix)
