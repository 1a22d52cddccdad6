"""Transform closed formulas into clause sets.

Pipeline per formula: universal closure of free variables, elimination of
xor/implication/iff, negation normal form, bound-variable uniquification,
inside-out Skolemization (Skolem arity limited to the universals the
existential body actually mentions), quantifier stripping, and plain
distribution of disjunction over conjunction.  No definitional extension is
performed; a guard aborts if a single formula explodes past
``MAX_CLAUSES_PER_FORMULA`` clauses.

Equality is clausified as an ordinary binary predicate.  An optional helper
instantiates reflexivity/symmetry/transitivity/congruence schemas for stories
that use ``=``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TYPE_CHECKING

from .syntax import (
    And,
    BINARY_TYPES,
    Constant,
    Equality,
    Exists,
    ForAll,
    Formula,
    FunctionApp,
    Iff,
    Implies,
    Not,
    Or,
    PredicateApp,
    QUANTIFIER_TYPES,
    Term,
    Variable,
    Xor,
    free_variables,
    render_term,
    symbol_table,
)

if TYPE_CHECKING:
    from .story import FolStory

MAX_CLAUSES_PER_FORMULA = 4096

Atom = PredicateApp | Equality


class ClauseExplosionError(Exception):
    """A single formula produced more clauses than the distribution guard allows."""

    def __init__(self, origin: int, count: int):
        self.origin = origin
        self.count = count
        super().__init__(
            f"formula {origin} produced more than {MAX_CLAUSES_PER_FORMULA} clauses ({count})"
        )


@dataclass(frozen=True)
class Literal:
    positive: bool
    atom: Atom

    def negated(self) -> "Literal":
        return Literal(not self.positive, self.atom)

    def __str__(self):
        sign = "" if self.positive else "-"
        if isinstance(self.atom, Equality):
            return f"{sign}({render_term(self.atom.left)} = {render_term(self.atom.right)})"
        args = ", ".join(render_term(a) for a in self.atom.args)
        return f"{sign}{self.atom.name}({args})" if args else f"{sign}{self.atom.name}"


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals; variables are implicitly universally quantified."""

    literals: tuple[Literal, ...]
    origin: int = -1

    def __post_init__(self):
        object.__setattr__(self, "literals", tuple(self.literals))

    @property
    def is_empty(self) -> bool:
        return not self.literals

    def __str__(self):
        if self.is_empty:
            return "[]"
        return " | ".join(str(lit) for lit in self.literals)


# ---------------------------------------------------------------------------
# Canonical clause keys (variable-renaming invariant, used for dedup)
# ---------------------------------------------------------------------------


def _shape_key(lit: Literal) -> tuple:
    def term_shape(t: Term):
        if isinstance(t, Variable):
            return ("*",)
        if isinstance(t, Constant):
            return ("c", t.name)
        return ("f", t.name, tuple(term_shape(a) for a in t.args))

    atom = lit.atom
    if isinstance(atom, Equality):
        return (lit.positive, "=", term_shape(atom.left), term_shape(atom.right))
    return (lit.positive, atom.name, tuple(term_shape(a) for a in atom.args))


def canonical_key(clause: Clause) -> tuple:
    """Renaming-invariant key: sort by shape, then number variables in order."""
    ordered = sorted(clause.literals, key=_shape_key)
    names: dict[str, str] = {}

    def canon_term(t: Term):
        if isinstance(t, Variable):
            if t.name not in names:
                names[t.name] = f"V{len(names)}"
            return ("v", names[t.name])
        if isinstance(t, Constant):
            return ("c", t.name)
        return ("f", t.name, tuple(canon_term(a) for a in t.args))

    def canon_lit(lit: Literal):
        atom = lit.atom
        if isinstance(atom, Equality):
            return (lit.positive, "=", canon_term(atom.left), canon_term(atom.right))
        return (lit.positive, atom.name, tuple(canon_term(a) for a in atom.args))

    return tuple(sorted(canon_lit(lit) for lit in ordered))


def is_tautology(clause: Clause) -> bool:
    positives = {_atom_key(l.atom) for l in clause.literals if l.positive}
    negatives = {_atom_key(l.atom) for l in clause.literals if not l.positive}
    return bool(positives & negatives)


def _atom_key(atom: Atom):
    if isinstance(atom, Equality):
        return ("=", atom.left, atom.right)
    return (atom.name, atom.args)


# ---------------------------------------------------------------------------
# Normalization steps
# ---------------------------------------------------------------------------


def close_free(f: Formula) -> Formula:
    """Wrap all free variables of ``f`` in outermost universal quantifiers.

    Only ``Variable`` nodes count as free here.  The parser classifies
    unbound identifiers as constants, so parsed text is unaffected; this
    closes formulas assembled programmatically.
    """
    for name in reversed(free_variables(f)):
        f = ForAll(name, f)
    return f


def to_nnf(f: Formula) -> Formula:
    """Negation normal form with xor/implication/iff eliminated."""
    return _nnf(f)


def _nnf(f: Formula) -> Formula:
    if isinstance(f, (PredicateApp, Equality)):
        return f
    if isinstance(f, Not):
        return _nnf_neg(f.operand)
    if isinstance(f, And):
        return And(_nnf(f.left), _nnf(f.right))
    if isinstance(f, Or):
        return Or(_nnf(f.left), _nnf(f.right))
    if isinstance(f, Xor):
        return Or(
            And(_nnf(f.left), _nnf_neg(f.right)),
            And(_nnf_neg(f.left), _nnf(f.right)),
        )
    if isinstance(f, Implies):
        return Or(_nnf_neg(f.left), _nnf(f.right))
    if isinstance(f, Iff):
        return And(
            Or(_nnf_neg(f.left), _nnf(f.right)),
            Or(_nnf(f.left), _nnf_neg(f.right)),
        )
    if isinstance(f, ForAll):
        return ForAll(f.var, _nnf(f.body))
    if isinstance(f, Exists):
        return Exists(f.var, _nnf(f.body))
    raise TypeError(f"not a formula: {f!r}")


def _nnf_neg(f: Formula) -> Formula:
    if isinstance(f, (PredicateApp, Equality)):
        return Not(f)
    if isinstance(f, Not):
        return _nnf(f.operand)
    if isinstance(f, And):
        return Or(_nnf_neg(f.left), _nnf_neg(f.right))
    if isinstance(f, Or):
        return And(_nnf_neg(f.left), _nnf_neg(f.right))
    if isinstance(f, Xor):
        # not (a xor b)  ==  a iff b
        return And(
            Or(_nnf_neg(f.left), _nnf(f.right)),
            Or(_nnf(f.left), _nnf_neg(f.right)),
        )
    if isinstance(f, Implies):
        return And(_nnf(f.left), _nnf_neg(f.right))
    if isinstance(f, Iff):
        return Or(
            And(_nnf(f.left), _nnf_neg(f.right)),
            And(_nnf_neg(f.left), _nnf(f.right)),
        )
    if isinstance(f, ForAll):
        return Exists(f.var, _nnf_neg(f.body))
    if isinstance(f, Exists):
        return ForAll(f.var, _nnf_neg(f.body))
    raise TypeError(f"not a formula: {f!r}")


def _uniquify(f: Formula, taken: set[str]) -> Formula:
    """Rename bound variables so every quantifier binds a distinct name."""

    def fresh(name: str) -> str:
        if name not in taken:
            taken.add(name)
            return name
        i = 2
        while f"{name}_{i}" in taken:
            i += 1
        new = f"{name}_{i}"
        taken.add(new)
        return new

    def walk_term(t: Term, env: dict[str, str]) -> Term:
        if isinstance(t, Variable):
            return Variable(env.get(t.name, t.name))
        if isinstance(t, FunctionApp):
            return FunctionApp(t.name, tuple(walk_term(a, env) for a in t.args))
        return t

    def walk(g: Formula, env: dict[str, str]) -> Formula:
        if isinstance(g, PredicateApp):
            return PredicateApp(g.name, tuple(walk_term(a, env) for a in g.args))
        if isinstance(g, Equality):
            return Equality(walk_term(g.left, env), walk_term(g.right, env))
        if isinstance(g, Not):
            return Not(walk(g.operand, env))
        if isinstance(g, BINARY_TYPES):
            return type(g)(walk(g.left, env), walk(g.right, env))
        if isinstance(g, QUANTIFIER_TYPES):
            new = fresh(g.var)
            return type(g)(new, walk(g.body, {**env, g.var: new}))
        raise TypeError(f"not a formula: {g!r}")

    return walk(f, {})


class SkolemGenerator:
    """Yields ``sk<n>`` names that avoid every symbol already used by a story."""

    def __init__(self, taken: Iterable[str] = ()):
        self.taken = set(taken)
        self.counter = 0

    def fresh(self) -> str:
        while True:
            self.counter += 1
            name = f"sk{self.counter}"
            if name not in self.taken:
                self.taken.add(name)
                return name


def skolemize(f: Formula, skolems: SkolemGenerator | None = None) -> Formula:
    """Remove existential quantifiers from an NNF formula.

    Each existential variable is replaced by a Skolem constant, or by an
    application of a fresh Skolem function to the enclosing universals that
    actually occur free in the existential body (keeping arity minimal).
    """
    if skolems is None:
        skolems = SkolemGenerator(symbol_table([f]).all_names())
    f = _uniquify(f, set(free_variables(f)))

    def substitute(g: Formula, env: dict[str, Term]) -> Formula:
        def sub_term(t: Term) -> Term:
            if isinstance(t, Variable):
                return env.get(t.name, t)
            if isinstance(t, FunctionApp):
                return FunctionApp(t.name, tuple(sub_term(a) for a in t.args))
            return t

        if isinstance(g, PredicateApp):
            return PredicateApp(g.name, tuple(sub_term(a) for a in g.args))
        if isinstance(g, Equality):
            return Equality(sub_term(g.left), sub_term(g.right))
        if isinstance(g, Not):
            return Not(substitute(g.operand, env))
        if isinstance(g, BINARY_TYPES):
            return type(g)(substitute(g.left, env), substitute(g.right, env))
        if isinstance(g, QUANTIFIER_TYPES):
            return type(g)(g.var, substitute(g.body, env))
        raise TypeError(f"not a formula: {g!r}")

    def walk(g: Formula, universals: tuple[str, ...]) -> Formula:
        if isinstance(g, (PredicateApp, Equality, Not)):
            return g
        if isinstance(g, BINARY_TYPES):
            return type(g)(walk(g.left, universals), walk(g.right, universals))
        if isinstance(g, ForAll):
            return ForAll(g.var, walk(g.body, universals + (g.var,)))
        if isinstance(g, Exists):
            deps = [u for u in universals if u in free_variables(g.body)]
            name = skolems.fresh()
            witness: Term
            if deps:
                witness = FunctionApp(name, tuple(Variable(d) for d in deps))
            else:
                witness = Constant(name)
            return walk(substitute(g.body, {g.var: witness}), universals)
        raise TypeError(f"unexpected node in NNF: {g!r}")

    return walk(f, ())


def _strip_universals(f: Formula) -> Formula:
    while isinstance(f, ForAll):
        f = f.body
    if isinstance(f, BINARY_TYPES):
        return type(f)(_strip_universals(f.left), _strip_universals(f.right))
    if isinstance(f, Not):
        return Not(_strip_universals(f.operand))
    return f


def _distribute(f: Formula, origin: int) -> list[list[Literal]]:
    if isinstance(f, (PredicateApp, Equality)):
        return [[Literal(True, f)]]
    if isinstance(f, Not):
        if not isinstance(f.operand, (PredicateApp, Equality)):
            raise ValueError(f"negation above non-atom after NNF: {f!r}")
        return [[Literal(False, f.operand)]]
    if isinstance(f, And):
        left = _distribute(f.left, origin)
        right = _distribute(f.right, origin)
        if len(left) + len(right) > MAX_CLAUSES_PER_FORMULA:
            raise ClauseExplosionError(origin, len(left) + len(right))
        return left + right
    if isinstance(f, Or):
        left = _distribute(f.left, origin)
        right = _distribute(f.right, origin)
        if len(left) * len(right) > MAX_CLAUSES_PER_FORMULA:
            raise ClauseExplosionError(origin, len(left) * len(right))
        return [lc + rc for lc in left for rc in right]
    raise TypeError(f"unexpected node in quantifier-free NNF: {f!r}")


def clausify_formula(
    f: Formula, skolems: SkolemGenerator | None = None, origin: int = -1
) -> list[Clause]:
    """Full clausification pipeline for one formula."""
    closed = close_free(f)
    nnf = to_nnf(closed)
    skolemized = skolemize(nnf, skolems)
    matrix = _strip_universals(skolemized)
    raw = _distribute(matrix, origin)

    clauses: list[Clause] = []
    seen: set[tuple] = set()
    for lits in raw:
        deduped: list[Literal] = []
        lit_seen = set()
        for lit in lits:
            k = (lit.positive, _atom_key(lit.atom))
            if k not in lit_seen:
                lit_seen.add(k)
                deduped.append(lit)
        clause = Clause(tuple(deduped), origin)
        if is_tautology(clause):
            continue
        key = canonical_key(clause)
        if key in seen:
            continue
        seen.add(key)
        clauses.append(clause)
    return clauses


@dataclass
class ClausifiedStory:
    premise_clauses: list[Clause]
    conclusion_clauses_pos: list[Clause]
    conclusion_clauses_neg: list[Clause]


def to_clauses(story: "FolStory") -> ClausifiedStory:
    """Clausify a story's premises and both polarities of its conclusion.

    The conclusion is clausified as-is (for the contradiction test) and
    negated (for the entailment test).  Skolem numbering is shared across the
    whole story and never collides with a story symbol, so identical stories
    produce identical clause lists.
    """
    table = symbol_table(list(story.premises) + [story.conclusion])
    skolems = SkolemGenerator(table.all_names())
    premise_clauses: list[Clause] = []
    for i, premise in enumerate(story.premises):
        premise_clauses.extend(clausify_formula(premise, skolems, origin=i))
    conclusion_index = len(story.premises)
    pos = clausify_formula(story.conclusion, skolems, origin=conclusion_index)
    neg = clausify_formula(Not(close_free(story.conclusion)), skolems, origin=conclusion_index)
    return ClausifiedStory(premise_clauses, pos, neg)


def equality_axioms(story_formulas: Iterable[Formula], max_arity: int = 3) -> list[Clause]:
    """Reflexivity, symmetry, transitivity, and congruence clauses for ``=``.

    Congruence schemas are instantiated for every predicate and function
    symbol of arity at most ``max_arity``.  Intended for the rare stories
    that actually use equality; the prover itself has no equality rules.
    """
    v = Variable
    eq = lambda a, b: Literal(True, Equality(a, b))
    neq = lambda a, b: Literal(False, Equality(a, b))

    clauses = [
        Clause((eq(v("X"), v("X")),), origin=-2),
        Clause((neq(v("X"), v("Y")), eq(v("Y"), v("X"))), origin=-2),
        Clause((neq(v("X"), v("Y")), neq(v("Y"), v("Z")), eq(v("X"), v("Z"))), origin=-2),
    ]
    table = symbol_table(story_formulas)
    for name in sorted(table.predicates):
        for arity in sorted(table.predicates[name]):
            if arity == 0 or arity > max_arity:
                continue
            for i in range(arity):
                xs = [v(f"X{j}") for j in range(arity)]
                ys = list(xs)
                ys[i] = v("Y")
                lits = (
                    neq(xs[i], v("Y")),
                    Literal(False, PredicateApp(name, tuple(xs))),
                    Literal(True, PredicateApp(name, tuple(ys))),
                )
                clauses.append(Clause(lits, origin=-2))
    for name in sorted(table.functions):
        for arity in sorted(table.functions[name]):
            if arity > max_arity:
                continue
            for i in range(arity):
                xs = [v(f"X{j}") for j in range(arity)]
                ys = list(xs)
                ys[i] = v("Y")
                lits = (
                    neq(xs[i], v("Y")),
                    eq(FunctionApp(name, tuple(xs)), FunctionApp(name, tuple(ys))),
                )
                clauses.append(Clause(lits, origin=-2))
    return clauses
