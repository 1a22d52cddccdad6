"""First-order logic abstract syntax, parsing, and printing.

The parser accepts the ASCII notation used in few-shot prompt fixtures
(``all x. (P(x) -> Q(x))`` with ``-``, ``&``, ``|``, ``->``, ``<->``) and the
Unicode notation common in typeset corpora (``∀``, ``∃``, ``¬``, ``∧``, ``∨``,
``⊕``, ``→``/``⇒``, ``↔``/``⇔``).  The two notations may be mixed freely
inside one formula, which matters in practice: LLM output does exactly that.

Identifier classification is purely scope based.  An identifier in term
position is a ``Variable`` iff an enclosing quantifier binds that name,
otherwise it is a ``Constant``.  An identifier applied to arguments is a
``PredicateApp`` in formula position and a ``FunctionApp`` in term position.
Free ``Variable`` nodes therefore never come out of the parser; they can only
be built programmatically (and are resolved by universal closure during
clausification).

Operator precedence, tightest first: ``¬``, ``∧``, ``∨``/``⊕``, ``→``, ``↔``.
``→`` is right-associative and a quantifier body extends maximally to the
right after the dot (or space).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


# ---------------------------------------------------------------------------
# Abstract syntax
# ---------------------------------------------------------------------------


class Term:
    """Base class for terms: variables, constants, function applications."""

    __slots__ = ()


@dataclass(frozen=True)
class Variable(Term):
    name: str


@dataclass(frozen=True)
class Constant(Term):
    name: str


@dataclass(frozen=True)
class FunctionApp(Term):
    name: str
    args: tuple[Term, ...]

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))
        if not self.args:
            raise ValueError("function application needs at least one argument")


class Formula:
    """Base class for formulas."""

    __slots__ = ()


@dataclass(frozen=True)
class PredicateApp(Formula):
    name: str
    args: tuple[Term, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class Equality(Formula):
    left: Term
    right: Term


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Xor(Formula):
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
class ForAll(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


ATOM_TYPES = (PredicateApp, Equality)
BINARY_TYPES = (And, Or, Xor, Implies, Iff)
QUANTIFIER_TYPES = (ForAll, Exists)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParseDiagnostic:
    """A parse problem anchored to a byte span of the input."""

    start: int
    end: int
    message: str
    severity: str = "error"


class ParseError(Exception):
    """Raised when a formula cannot be parsed; carries the diagnostics."""

    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(d.message for d in self.diagnostics) or "parse error")


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<number>[0-9]+)
  | (?P<iff><->|<=>|↔|⇔)
  | (?P<implies>->|=>|→|⇒)
  | (?P<neq>!=|≠)
  | (?P<lpar>\()
  | (?P<rpar>\))
  | (?P<comma>,)
  | (?P<dot>\.)
  | (?P<not>-|~|¬)
  | (?P<and>&|∧)
  | (?P<or>\||∨)
  | (?P<xor>⊕)
  | (?P<eq>=)
  | (?P<forall>∀)
  | (?P<exists>∃)
    """,
    re.VERBOSE,
)

_KEYWORDS = {"all": "forall", "forall": "forall", "exists": "exists"}


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    start: int  # character offset
    end: int


def _byte_span(text: str, start: int, end: int) -> tuple[int, int]:
    return len(text[:start].encode("utf-8")), len(text[:end].encode("utf-8"))


def _lex(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            bs, be = _byte_span(text, pos, pos + 1)
            raise ParseError([ParseDiagnostic(bs, be, f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup or ""
        if kind != "ws":
            tok_text = m.group()
            if kind == "ident" and tok_text in _KEYWORDS:
                kind = _KEYWORDS[tok_text]
            tokens.append(_Token(kind, tok_text, m.start(), m.end()))
        pos = m.end()
    tokens.append(_Token("end", "", len(text), len(text)))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str, tokens: list[_Token]):
        self.text = text
        self.tokens = tokens
        self.pos = 0
        self.scope: list[str] = []

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "end":
            self.pos += 1
        return tok

    def fail(self, message: str, start: int | None = None, end: int | None = None):
        tok = self.peek()
        cs = tok.start if start is None else start
        ce = tok.end if end is None else end
        if ce == cs:
            ce = min(len(self.text), cs + 1) if cs < len(self.text) else cs
        bs, be = _byte_span(self.text, cs, ce)
        raise ParseError([ParseDiagnostic(bs, be, message)])

    def expect(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok.kind != kind:
            found = repr(tok.text) if tok.kind != "end" else "end of input"
            self.fail(f"expected {what}, found {found}")
        return self.advance()

    # formula := iff
    def formula(self) -> Formula:
        return self.iff()

    def iff(self) -> Formula:
        left = self.implication()
        if self.peek().kind == "iff":
            self.advance()
            return Iff(left, self.iff())
        return left

    def implication(self) -> Formula:
        left = self.disjunction()
        if self.peek().kind == "implies":
            self.advance()
            return Implies(left, self.implication())
        return left

    def disjunction(self) -> Formula:
        left = self.conjunction()
        while self.peek().kind in ("or", "xor"):
            op = self.advance()
            right = self.conjunction()
            left = Or(left, right) if op.kind == "or" else Xor(left, right)
        return left

    def conjunction(self) -> Formula:
        left = self.unary()
        while self.peek().kind == "and":
            self.advance()
            left = And(left, self.unary())
        return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "not":
            self.advance()
            return Not(self.unary())
        if tok.kind in ("forall", "exists"):
            return self.quantified()
        return self.atom()

    def quantified(self) -> Formula:
        q = self.advance()
        var = self.expect("ident", "a quantified variable name")
        if self.peek().kind == "dot":
            self.advance()
        self.scope.append(var.text)
        try:
            body = self.formula()
        finally:
            self.scope.pop()
        return ForAll(var.text, body) if q.kind == "forall" else Exists(var.text, body)

    def atom(self) -> Formula:
        tok = self.peek()
        if tok.kind == "lpar":
            self.advance()
            inner = self.formula()
            self.expect("rpar", "a closing parenthesis")
            return inner
        if tok.kind in ("ident", "number"):
            name, args, start = self.application()
            nxt = self.peek()
            if nxt.kind in ("eq", "neq"):
                self.advance()
                right = self.term()
                eq = Equality(self.as_term(name, args, start), right)
                return Not(eq) if nxt.kind == "neq" else eq
            if tok.kind == "number":
                self.fail("a number cannot be used as a predicate", tok.start, tok.end)
            return PredicateApp(name, tuple(args))
        if tok.kind == "end":
            self.fail("unexpected end of input, expected a formula")
        self.fail(f"expected a formula, found {tok.text!r}")
        raise AssertionError("unreachable")

    def application(self) -> tuple[str, list[Term], int]:
        head = self.advance()
        args: list[Term] = []
        if self.peek().kind == "lpar":
            open_tok = self.advance()
            if self.peek().kind == "rpar":
                self.fail("empty argument list", head.start, self.peek().end)
            args.append(self.term())
            while self.peek().kind == "comma":
                self.advance()
                args.append(self.term())
            if self.peek().kind != "rpar":
                self.fail("unclosed argument list", head.start, open_tok.end)
            self.advance()
        return head.text, args, head.start

    def term(self) -> Term:
        tok = self.peek()
        if tok.kind not in ("ident", "number"):
            found = repr(tok.text) if tok.kind != "end" else "end of input"
            self.fail(f"expected a term, found {found}")
        name, args, start = self.application()
        return self.as_term(name, args, start)

    def as_term(self, name: str, args: list[Term], start: int) -> Term:
        if args:
            return FunctionApp(name, tuple(args))
        if name in self.scope:
            return Variable(name)
        return Constant(name)


def parse_formula(text: str) -> Formula:
    """Parse one formula; raises :class:`ParseError` with diagnostics."""
    tokens = _lex(text)
    parser = _Parser(text, tokens)
    try:
        f = parser.formula()
    except RecursionError:
        span = _byte_span(text, 0, len(text))
        raise ParseError([ParseDiagnostic(span[0], span[1], "formula nests too deeply")])
    trailing = parser.peek()
    if trailing.kind != "end":
        parser.fail(f"unexpected trailing input {trailing.text!r}")
    return f


def try_parse_formula(text: str) -> tuple[Formula | None, list[ParseDiagnostic]]:
    """Like :func:`parse_formula` but returns diagnostics instead of raising."""
    try:
        return parse_formula(text), []
    except ParseError as exc:
        return None, exc.diagnostics


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

_ASCII_OPS = {And: "&", Or: "|", Implies: "->", Iff: "<->"}
_UNICODE_OPS = {And: "∧", Or: "∨", Xor: "⊕", Implies: "→", Iff: "↔"}


def render(f: Formula, dialect: str = "ascii") -> str:
    """Deterministically render a formula.

    ``ascii`` matches the notation of the prompt fixtures; it has no xor
    operator, so ``Xor`` renders as its either/or expansion
    ``((a & -b) | (-a & b))`` and an ascii round trip returns that expanded
    form.  ``unicode`` keeps ``⊕`` first class.  For closed formulas,
    ``parse_formula(render(f, d))`` is alpha-equivalent to ``f`` (modulo the
    ascii xor expansion).
    """
    if dialect == "ascii":
        return _render_ascii(f)
    if dialect == "unicode":
        return _render_unicode(f)
    raise ValueError(f"unknown dialect {dialect!r}")


def render_term(t: Term) -> str:
    if isinstance(t, (Variable, Constant)):
        return t.name
    if isinstance(t, FunctionApp):
        return f"{t.name}({', '.join(render_term(a) for a in t.args)})"
    raise TypeError(f"not a term: {t!r}")


def _render_atom(f: Formula) -> str:
    if isinstance(f, PredicateApp):
        if not f.args:
            return f.name
        return f"{f.name}({', '.join(render_term(a) for a in f.args)})"
    if isinstance(f, Equality):
        return f"{render_term(f.left)} = {render_term(f.right)}"
    raise TypeError(f"not an atom: {f!r}")


def _quant_body(body: Formula, rec) -> str:
    # Binary connectives parenthesize themselves and a directly nested
    # quantifier extends maximally right, so neither needs extra parens.
    if isinstance(body, BINARY_TYPES + QUANTIFIER_TYPES):
        return rec(body)
    return f"({rec(body)})"


def _ends_open(f: Formula) -> bool:
    """True if the rendering ends in a quantifier body that would keep
    consuming tokens to its right (so a left operand needs parens)."""
    if isinstance(f, QUANTIFIER_TYPES):
        return True
    if isinstance(f, Not):
        return _ends_open(f.operand)
    return False


def _left_operand(f: Formula, rec) -> str:
    text = rec(f)
    return f"({text})" if _ends_open(f) else text


def _render_ascii(f: Formula) -> str:
    if isinstance(f, ATOM_TYPES):
        return _render_atom(f)
    if isinstance(f, Not):
        return "-" + _render_ascii(f.operand)
    if isinstance(f, Xor):
        expanded = Or(And(f.left, Not(f.right)), And(Not(f.left), f.right))
        return _render_ascii(expanded)
    if isinstance(f, BINARY_TYPES):
        op = _ASCII_OPS[type(f)]
        return f"({_left_operand(f.left, _render_ascii)} {op} {_render_ascii(f.right)})"
    if isinstance(f, ForAll):
        return f"all {f.var}. {_quant_body(f.body, _render_ascii)}"
    if isinstance(f, Exists):
        return f"exists {f.var}. {_quant_body(f.body, _render_ascii)}"
    raise TypeError(f"not a formula: {f!r}")


def _render_unicode(f: Formula) -> str:
    if isinstance(f, ATOM_TYPES):
        return _render_atom(f)
    if isinstance(f, Not):
        return "¬" + _render_unicode(f.operand)
    if isinstance(f, BINARY_TYPES):
        op = _UNICODE_OPS[type(f)]
        return f"({_left_operand(f.left, _render_unicode)} {op} {_render_unicode(f.right)})"
    if isinstance(f, ForAll):
        return f"∀{f.var}. {_quant_body(f.body, _render_unicode)}"
    if isinstance(f, Exists):
        return f"∃{f.var}. {_quant_body(f.body, _render_unicode)}"
    raise TypeError(f"not a formula: {f!r}")


# ---------------------------------------------------------------------------
# Structural helpers
# ---------------------------------------------------------------------------


def alpha_equal(f: Formula, g: Formula) -> bool:
    """True iff f and g are identical up to consistent bound-variable renaming."""
    return _alpha(f, g, {}, {}, 0)


def _alpha(f: Formula, g: Formula, env_f: dict, env_g: dict, depth: int) -> bool:
    if type(f) is not type(g):
        return False
    if isinstance(f, PredicateApp):
        return (
            f.name == g.name
            and len(f.args) == len(g.args)
            and all(_alpha_term(a, b, env_f, env_g) for a, b in zip(f.args, g.args))
        )
    if isinstance(f, Equality):
        return _alpha_term(f.left, g.left, env_f, env_g) and _alpha_term(
            f.right, g.right, env_f, env_g
        )
    if isinstance(f, Not):
        return _alpha(f.operand, g.operand, env_f, env_g, depth)
    if isinstance(f, BINARY_TYPES):
        return _alpha(f.left, g.left, env_f, env_g, depth) and _alpha(
            f.right, g.right, env_f, env_g, depth
        )
    if isinstance(f, QUANTIFIER_TYPES):
        env_f2 = {**env_f, f.var: depth}
        env_g2 = {**env_g, g.var: depth}
        return _alpha(f.body, g.body, env_f2, env_g2, depth + 1)
    raise TypeError(f"not a formula: {f!r}")


def _alpha_term(s: Term, t: Term, env_f: dict, env_g: dict) -> bool:
    if type(s) is not type(t):
        return False
    if isinstance(s, Variable):
        if s.name in env_f or t.name in env_g:
            return env_f.get(s.name) == env_g.get(t.name)
        return s.name == t.name
    if isinstance(s, Constant):
        return s.name == t.name
    if isinstance(s, FunctionApp):
        return (
            s.name == t.name
            and len(s.args) == len(t.args)
            and all(_alpha_term(a, b, env_f, env_g) for a, b in zip(s.args, t.args))
        )
    raise TypeError(f"not a term: {s!r}")


def free_variables(f: Formula) -> list[str]:
    """Free variable names in first-occurrence order."""
    out: list[str] = []
    seen: set[str] = set()

    def walk_term(t: Term, bound: frozenset[str]):
        if isinstance(t, Variable):
            if t.name not in bound and t.name not in seen:
                seen.add(t.name)
                out.append(t.name)
        elif isinstance(t, FunctionApp):
            for a in t.args:
                walk_term(a, bound)

    def walk(g: Formula, bound: frozenset[str]):
        if isinstance(g, PredicateApp):
            for a in g.args:
                walk_term(a, bound)
        elif isinstance(g, Equality):
            walk_term(g.left, bound)
            walk_term(g.right, bound)
        elif isinstance(g, Not):
            walk(g.operand, bound)
        elif isinstance(g, BINARY_TYPES):
            walk(g.left, bound)
            walk(g.right, bound)
        elif isinstance(g, QUANTIFIER_TYPES):
            walk(g.body, bound | {g.var})

    walk(f, frozenset())
    return out


@dataclass
class SymbolTable:
    """Census of the symbols a formula (or story) uses."""

    predicates: dict[str, set[int]] = field(default_factory=dict)
    functions: dict[str, set[int]] = field(default_factory=dict)
    constants: set[str] = field(default_factory=set)
    variables: set[str] = field(default_factory=set)

    def all_names(self) -> set[str]:
        return (
            set(self.predicates)
            | set(self.functions)
            | self.constants
            | self.variables
        )

    def add_formula(self, f: Formula):
        def walk_term(t: Term):
            if isinstance(t, Variable):
                self.variables.add(t.name)
            elif isinstance(t, Constant):
                self.constants.add(t.name)
            elif isinstance(t, FunctionApp):
                self.functions.setdefault(t.name, set()).add(len(t.args))
                for a in t.args:
                    walk_term(a)

        def walk(g: Formula):
            if isinstance(g, PredicateApp):
                self.predicates.setdefault(g.name, set()).add(len(g.args))
                for a in g.args:
                    walk_term(a)
            elif isinstance(g, Equality):
                walk_term(g.left)
                walk_term(g.right)
            elif isinstance(g, Not):
                walk(g.operand)
            elif isinstance(g, BINARY_TYPES):
                walk(g.left)
                walk(g.right)
            elif isinstance(g, QUANTIFIER_TYPES):
                self.variables.add(g.var)
                walk(g.body)

        walk(f)


def symbol_table(formulas) -> SymbolTable:
    table = SymbolTable()
    for f in formulas:
        table.add_formula(f)
    return table
