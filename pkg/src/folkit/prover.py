"""Bounded resolution-refutation engine.

A given-clause (otter-style) saturation loop over clause sets: the lightest
passive clause (fewest symbols, ties FIFO) is selected, eagerly factored,
moved to the kept set, and resolved against every kept clause.  Forward
subsumption discards clauses subsumed by a kept or passive clause; backward
subsumption is available but off by default.

Budgets are checked in a deterministic order, iterations and kept-clause
count first and wall time last, so two runs with identical inputs and budget
produce identical statuses and statistics.  A search that had to discard
clauses (term-depth cap) can never report saturation; it reports budget
exhaustion instead.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .clausify import Atom, Clause, Literal, canonical_key, is_tautology
from .syntax import Constant, Equality, FunctionApp, PredicateApp, Term, Variable

Substitution = dict[str, Term]


# ---------------------------------------------------------------------------
# Unification
# ---------------------------------------------------------------------------


def _walk(t: Term, sub: Substitution) -> Term:
    while isinstance(t, Variable) and t.name in sub:
        t = sub[t.name]
    return t


def _occurs(name: str, t: Term, sub: Substitution) -> bool:
    t = _walk(t, sub)
    if isinstance(t, Variable):
        return t.name == name
    if isinstance(t, FunctionApp):
        return any(_occurs(name, a, sub) for a in t.args)
    return False


def _resolve_term(t: Term, sub: Substitution) -> Term:
    t = _walk(t, sub)
    if isinstance(t, FunctionApp):
        return FunctionApp(t.name, tuple(_resolve_term(a, sub) for a in t.args))
    return t


def unify(s, t, sub: Substitution | None = None) -> Substitution | None:
    """Most general unifier of two terms or two atoms, with occurs check.

    Returns an idempotent substitution, or None on clash or occurs violation.
    """
    stack: list[tuple[Term, Term]] = []
    if isinstance(s, (PredicateApp, Equality)) or isinstance(t, (PredicateApp, Equality)):
        if isinstance(s, PredicateApp) and isinstance(t, PredicateApp):
            if s.name != t.name or len(s.args) != len(t.args):
                return None
            stack.extend(zip(s.args, t.args))
        elif isinstance(s, Equality) and isinstance(t, Equality):
            stack.extend([(s.left, t.left), (s.right, t.right)])
        else:
            return None
    else:
        stack.append((s, t))

    work: Substitution = dict(sub) if sub else {}
    while stack:
        a, b = stack.pop()
        a = _walk(a, work)
        b = _walk(b, work)
        if a == b:
            continue
        if isinstance(a, Variable):
            if _occurs(a.name, b, work):
                return None
            work[a.name] = b
        elif isinstance(b, Variable):
            if _occurs(b.name, a, work):
                return None
            work[b.name] = a
        elif isinstance(a, FunctionApp) and isinstance(b, FunctionApp):
            if a.name != b.name or len(a.args) != len(b.args):
                return None
            stack.extend(zip(a.args, b.args))
        else:
            return None
    # Fully apply bindings so the substitution is idempotent.
    return {name: _resolve_term(term, work) for name, term in work.items()}


def apply_to_term(sub: Substitution, t: Term) -> Term:
    if isinstance(t, Variable):
        return sub.get(t.name, t)
    if isinstance(t, FunctionApp):
        return FunctionApp(t.name, tuple(apply_to_term(sub, a) for a in t.args))
    return t


def apply_to_atom(sub: Substitution, atom: Atom) -> Atom:
    if isinstance(atom, Equality):
        return Equality(apply_to_term(sub, atom.left), apply_to_term(sub, atom.right))
    return PredicateApp(atom.name, tuple(apply_to_term(sub, a) for a in atom.args))


def apply_to_literal(sub: Substitution, lit: Literal) -> Literal:
    return Literal(lit.positive, apply_to_atom(sub, lit.atom))


# ---------------------------------------------------------------------------
# Budgets and outcomes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Budget:
    max_seconds: float = 5.0
    max_kept_clauses: int = 20_000
    max_iterations: int = 100_000
    max_term_depth: int = 12

    def __post_init__(self):
        for name in ("max_seconds", "max_kept_clauses", "max_iterations", "max_term_depth"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


DEFAULT_BUDGET = Budget()


class RefutationStatus(Enum):
    REFUTED = "refuted"
    SATURATED = "saturated"
    BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class ProofStep:
    index: int
    clause: Clause
    rule: str  # "input" | "resolve" | "factor"
    parents: tuple[int, ...]


@dataclass(frozen=True)
class RefutationOutcome:
    status: RefutationStatus
    kept_clause_count: int
    iterations: int
    elapsed_seconds: float
    proof_trace: tuple[ProofStep, ...] = ()

    @property
    def refuted(self) -> bool:
        return self.status is RefutationStatus.REFUTED


# ---------------------------------------------------------------------------
# Clause utilities
# ---------------------------------------------------------------------------


def term_depth(t: Term) -> int:
    if isinstance(t, FunctionApp):
        return 1 + max(term_depth(a) for a in t.args)
    return 0


def clause_depth(clause: Clause) -> int:
    depth = 0
    for lit in clause.literals:
        if isinstance(lit.atom, Equality):
            depth = max(depth, term_depth(lit.atom.left), term_depth(lit.atom.right))
        else:
            for a in lit.atom.args:
                depth = max(depth, term_depth(a))
    return depth


def _term_size(t: Term) -> int:
    if isinstance(t, FunctionApp):
        return 1 + sum(_term_size(a) for a in t.args)
    return 1


def symbol_count(clause: Clause) -> int:
    total = 0
    for lit in clause.literals:
        if isinstance(lit.atom, Equality):
            total += 1 + _term_size(lit.atom.left) + _term_size(lit.atom.right)
        else:
            total += 1 + sum(_term_size(a) for a in lit.atom.args)
    return total


def _clause_variables(clause: Clause) -> list[str]:
    names: list[str] = []
    seen: set[str] = set()

    def walk(t: Term):
        if isinstance(t, Variable):
            if t.name not in seen:
                seen.add(t.name)
                names.append(t.name)
        elif isinstance(t, FunctionApp):
            for a in t.args:
                walk(a)

    for lit in clause.literals:
        if isinstance(lit.atom, Equality):
            walk(lit.atom.left)
            walk(lit.atom.right)
        else:
            for a in lit.atom.args:
                walk(a)
    return names


def _rename_clause(clause: Clause, suffix: str) -> Clause:
    sub = {name: Variable(f"{name}{suffix}") for name in _clause_variables(clause)}
    if not sub:
        return clause
    return Clause(tuple(apply_to_literal(sub, l) for l in clause.literals), clause.origin)


def _match_terms(pattern: Term, target: Term, sub: Substitution) -> Substitution | None:
    """One-way matching: variables of the pattern bind to target terms."""
    if isinstance(pattern, Variable):
        bound = sub.get(pattern.name)
        if bound is None:
            out = dict(sub)
            out[pattern.name] = target
            return out
        return sub if bound == target else None
    if isinstance(pattern, Constant):
        return sub if pattern == target else None
    if isinstance(pattern, FunctionApp) and isinstance(target, FunctionApp):
        if pattern.name != target.name or len(pattern.args) != len(target.args):
            return None
        for p, t in zip(pattern.args, target.args):
            nxt = _match_terms(p, t, sub)
            if nxt is None:
                return None
            sub = nxt
        return sub
    return None


def _match_atoms(pattern: Atom, target: Atom, sub: Substitution) -> Substitution | None:
    if isinstance(pattern, Equality) and isinstance(target, Equality):
        first = _match_terms(pattern.left, target.left, sub)
        if first is None:
            return None
        return _match_terms(pattern.right, target.right, first)
    if isinstance(pattern, PredicateApp) and isinstance(target, PredicateApp):
        if pattern.name != target.name or len(pattern.args) != len(target.args):
            return None
        for p, t in zip(pattern.args, target.args):
            nxt = _match_terms(p, t, sub)
            if nxt is None:
                return None
            sub = nxt
        return sub
    return None


def subsumes(general: Clause, specific: Clause) -> bool:
    """True iff some substitution maps every literal of ``general`` into ``specific``."""
    if len(general.literals) > len(specific.literals):
        return False

    lits = general.literals

    def backtrack(i: int, sub: Substitution) -> bool:
        if i == len(lits):
            return True
        lit = lits[i]
        for other in specific.literals:
            if other.positive != lit.positive:
                continue
            nxt = _match_atoms(lit.atom, other.atom, sub)
            if nxt is not None and backtrack(i + 1, nxt):
                return True
        return False

    return backtrack(0, {})


def resolvents(c1: Clause, c2: Clause) -> list[Clause]:
    """All binary resolvents of two clauses (renamed apart first)."""
    a = _rename_clause(c1, "_l")
    b = _rename_clause(c2, "_r")
    out: list[Clause] = []
    for i, lit_a in enumerate(a.literals):
        for j, lit_b in enumerate(b.literals):
            if lit_a.positive == lit_b.positive:
                continue
            mgu = unify(lit_a.atom, lit_b.atom)
            if mgu is None:
                continue
            rest = [apply_to_literal(mgu, l) for k, l in enumerate(a.literals) if k != i]
            rest += [apply_to_literal(mgu, l) for k, l in enumerate(b.literals) if k != j]
            out.append(_dedup_literals(rest))
    return out


def factors(clause: Clause) -> list[Clause]:
    """All binary factors of a clause."""
    out: list[Clause] = []
    lits = clause.literals
    for i in range(len(lits)):
        for j in range(i + 1, len(lits)):
            if lits[i].positive != lits[j].positive:
                continue
            mgu = unify(lits[i].atom, lits[j].atom)
            if mgu is None:
                continue
            merged = [apply_to_literal(mgu, l) for k, l in enumerate(lits) if k != j]
            out.append(_dedup_literals(merged))
    return out


def _dedup_literals(lits: list[Literal]) -> Clause:
    seen = set()
    out = []
    for lit in lits:
        key = (lit.positive, lit.atom)
        if key not in seen:
            seen.add(key)
            out.append(lit)
    return Clause(tuple(out))


# ---------------------------------------------------------------------------
# Saturation loop
# ---------------------------------------------------------------------------


def refute(
    clauses: Sequence[Clause],
    budget: Budget = DEFAULT_BUDGET,
    forward_subsumption: bool = True,
    backward_subsumption: bool = False,
) -> RefutationOutcome:
    """Search for the empty clause by binary resolution plus factoring.

    Refuted means the empty clause was derived within budget; Saturated means
    the passive set emptied with no budget limit hit; BudgetExhausted covers
    everything else, including internal clause discards.
    """
    start_time = time.monotonic()

    steps: dict[int, ProofStep] = {}
    by_id: dict[int, Clause] = {}
    passive: list[tuple[int, int, int]] = []  # (symbol_count, seq, id)
    alive_passive: set[int] = set()
    usable: list[int] = []
    seen_keys: set[tuple] = set()
    next_id = 0
    seq = 0
    limited = False

    def outcome(status: RefutationStatus, trace: tuple[ProofStep, ...] = ()):
        return RefutationOutcome(
            status=status,
            kept_clause_count=len(usable) + len(alive_passive),
            iterations=iterations,
            elapsed_seconds=time.monotonic() - start_time,
            proof_trace=trace,
        )

    def build_trace(empty_id: int) -> tuple[ProofStep, ...]:
        needed: set[int] = set()
        stack = [empty_id]
        while stack:
            cid = stack.pop()
            if cid in needed:
                continue
            needed.add(cid)
            stack.extend(steps[cid].parents)
        ordered = sorted(needed)
        return tuple(steps[cid] for cid in ordered)

    def admit(clause: Clause, rule: str, parents: tuple[int, ...]) -> int | None:
        """Record a clause and put it on the passive queue; None if dropped."""
        nonlocal next_id, seq, limited
        if clause_depth(clause) > budget.max_term_depth:
            limited = True
            return None
        if is_tautology(clause):
            return None
        key = canonical_key(clause)
        if key in seen_keys:
            return None
        if forward_subsumption:
            for uid in usable:
                if subsumes(by_id[uid], clause):
                    return None
            for pid in list(alive_passive):
                if subsumes(by_id[pid], clause):
                    return None
        if backward_subsumption and not clause.is_empty:
            for pid in list(alive_passive):
                if subsumes(clause, by_id[pid]):
                    alive_passive.discard(pid)
            for uid in list(usable):
                if subsumes(clause, by_id[uid]):
                    usable.remove(uid)
        seen_keys.add(key)
        cid = next_id
        next_id += 1
        by_id[cid] = clause
        steps[cid] = ProofStep(cid, clause, rule, parents)
        heapq.heappush(passive, (symbol_count(clause), seq, cid))
        alive_passive.add(cid)
        seq += 1
        return cid

    iterations = 0
    for clause in clauses:
        cid = admit(clause, "input", ())
        if cid is not None and clause.is_empty:
            return outcome(RefutationStatus.REFUTED, build_trace(cid))

    while passive:
        if iterations >= budget.max_iterations:
            return outcome(RefutationStatus.BUDGET_EXHAUSTED)
        if len(usable) + len(alive_passive) > budget.max_kept_clauses:
            return outcome(RefutationStatus.BUDGET_EXHAUSTED)
        # Wall time is the least deterministic limit, so it is checked last.
        if time.monotonic() - start_time > budget.max_seconds:
            return outcome(RefutationStatus.BUDGET_EXHAUSTED)
        iterations += 1

        _, _, given_id = heapq.heappop(passive)
        if given_id not in alive_passive:
            continue
        alive_passive.discard(given_id)
        given = by_id[given_id]

        if forward_subsumption and any(subsumes(by_id[uid], given) for uid in usable):
            continue

        usable.append(given_id)

        derived: list[tuple[Clause, str, tuple[int, ...]]] = []
        for factor in factors(given):
            derived.append((factor, "factor", (given_id,)))
        for uid in list(usable):
            for resolvent in resolvents(given, by_id[uid]):
                derived.append((resolvent, "resolve", (given_id, uid)))

        for clause, rule, parents in derived:
            cid = admit(clause, rule, parents)
            if cid is not None and clause.is_empty:
                return outcome(RefutationStatus.REFUTED, build_trace(cid))

    if limited or len(usable) + len(alive_passive) > budget.max_kept_clauses:
        return outcome(RefutationStatus.BUDGET_EXHAUSTED)
    return outcome(RefutationStatus.SATURATED)


def format_proof(outcome: RefutationOutcome) -> str:
    """Human-readable derivation listing for a refutation."""
    if not outcome.proof_trace:
        return "(no proof trace)"
    index_map = {step.index: i + 1 for i, step in enumerate(outcome.proof_trace)}
    lines = []
    for step in outcome.proof_trace:
        if step.rule == "input":
            origin = f"input[{step.clause.origin}]" if step.clause.origin >= 0 else "input"
        else:
            parents = ", ".join(str(index_map[p]) for p in step.parents)
            origin = f"{step.rule}({parents})"
        lines.append(f"{index_map[step.index]:>4}. {step.clause}  [{origin}]")
    return "\n".join(lines)
