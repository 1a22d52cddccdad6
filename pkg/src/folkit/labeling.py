"""Logical label computation by dual refutation, plus external cross-checking.

The label of a story is decided by two bounded refutation attempts: premises
with the negated conclusion (entailment test) and premises with the
conclusion as-is (contradiction test).  Exactly one label results:

* entailment refuted only            -> True
* contradiction refuted only         -> False
* neither refuted                    -> Uncertain
* both refuted                       -> Error(InconsistentPremises)

Both directions always run so inconsistent premises are detectable.  A
budget-exhausted direction counts as not refuted and sets
``budget_limited`` on the result.

The module also emits stories in the assumptions/goals file syntax of an
external prover and can cross-check label agreement against such a binary.
"""

from __future__ import annotations

import logging
import os
import shutil
import subprocess
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .clausify import Clause, ClauseExplosionError, equality_axioms, to_clauses
from .prover import Budget, DEFAULT_BUDGET, RefutationOutcome, RefutationStatus, refute
from .story import FolStory, Label
from .syntax import (
    And,
    BINARY_TYPES,
    Constant,
    Equality,
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
    symbol_table,
)

log = logging.getLogger(__name__)


class ErrorReason(str, Enum):
    PARSE = "Parse"
    ALIGNMENT = "Alignment"
    CLAUSE_EXPLOSION = "ClauseExplosion"
    INCONSISTENT_PREMISES = "InconsistentPremises"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class LabelResult:
    label: Label
    error_reason: ErrorReason | None = None
    budget_limited: bool = False
    entail_outcome: RefutationOutcome | None = None
    contradict_outcome: RefutationOutcome | None = None

    def __post_init__(self):
        if (self.label is Label.ERROR) != (self.error_reason is not None):
            raise ValueError("error_reason must be set exactly when label is Error")


def error_result(reason: ErrorReason) -> LabelResult:
    return LabelResult(Label.ERROR, error_reason=reason)


def classify(
    story: FolStory,
    budget: Budget = DEFAULT_BUDGET,
    use_equality_axioms: bool = False,
) -> LabelResult:
    """Compute the logical label of a story under a search budget.

    ``use_equality_axioms`` adds reflexivity/symmetry/transitivity/congruence
    clauses so infix ``=`` behaves like equality instead of an opaque
    predicate.
    """
    try:
        clausified = to_clauses(story)
    except ClauseExplosionError:
        return error_result(ErrorReason.CLAUSE_EXPLOSION)

    extra: list[Clause] = []
    if use_equality_axioms:
        extra = equality_axioms(list(story.premises) + [story.conclusion])

    entail = refute(
        extra + clausified.premise_clauses + clausified.conclusion_clauses_neg, budget
    )
    contradict = refute(
        extra + clausified.premise_clauses + clausified.conclusion_clauses_pos, budget
    )

    budget_limited = (
        entail.status is RefutationStatus.BUDGET_EXHAUSTED
        or contradict.status is RefutationStatus.BUDGET_EXHAUSTED
    )
    if entail.refuted and contradict.refuted:
        return LabelResult(
            Label.ERROR,
            error_reason=ErrorReason.INCONSISTENT_PREMISES,
            budget_limited=budget_limited,
            entail_outcome=entail,
            contradict_outcome=contradict,
        )
    if entail.refuted:
        label = Label.TRUE
    elif contradict.refuted:
        label = Label.FALSE
    else:
        label = Label.UNCERTAIN
    return LabelResult(
        label,
        budget_limited=budget_limited,
        entail_outcome=entail,
        contradict_outcome=contradict,
    )


# ---------------------------------------------------------------------------
# External engine file format
# ---------------------------------------------------------------------------

_VARIABLE_CYCLE = ["x", "y", "z", "u", "v", "w"]


class _ExternalNames:
    """Symbol renaming that keeps the external engine's conventions happy.

    The external engine decides variable-ness lexically (names starting with
    ``u`` through ``z``), so bound variables are renamed onto that range and
    constants or functions that stray into it get a ``c_`` prefix.
    """

    def __init__(self, taken: set[str]):
        self.taken = set(taken)
        self.constants: dict[str, str] = {}

    def constant(self, name: str) -> str:
        if name[0].lower() not in "uvwxyz":
            return name
        if name not in self.constants:
            candidate = f"c_{name}"
            while candidate in self.taken:
                candidate = f"c_{candidate}"
            self.taken.add(candidate)
            self.constants[name] = candidate
        return self.constants[name]

    def fresh_variable(self, index: int) -> str:
        base = _VARIABLE_CYCLE[index % len(_VARIABLE_CYCLE)]
        round_ = index // len(_VARIABLE_CYCLE)
        return base if round_ == 0 else f"{base}{round_}"


def _external_formula(f: Formula, names: _ExternalNames, env: dict[str, str], depth: int) -> str:
    def term(t: Term) -> str:
        if isinstance(t, Variable):
            return env.get(t.name, names.constant(t.name))
        if isinstance(t, Constant):
            return names.constant(t.name)
        args = ", ".join(term(a) for a in t.args)
        return f"{names.constant(t.name)}({args})"

    if isinstance(f, PredicateApp):
        if not f.args:
            return f.name
        return f"{f.name}({', '.join(term(a) for a in f.args)})"
    if isinstance(f, Equality):
        return f"{term(f.left)} = {term(f.right)}"
    if isinstance(f, Not):
        return f"-({_external_formula(f.operand, names, env, depth)})"
    if isinstance(f, Xor):
        expanded = Or(And(f.left, Not(f.right)), And(Not(f.left), f.right))
        return _external_formula(expanded, names, env, depth)
    if isinstance(f, BINARY_TYPES):
        ops = {And: "&", Or: "|", Implies: "->", Iff: "<->"}
        left = _external_formula(f.left, names, env, depth)
        right = _external_formula(f.right, names, env, depth)
        return f"({left} {ops[type(f)]} {right})"
    if isinstance(f, QUANTIFIER_TYPES):
        keyword = "all" if isinstance(f, ForAll) else "exists"
        fresh = names.fresh_variable(depth)
        body = _external_formula(f.body, names, {**env, f.var: fresh}, depth + 1)
        return f"{keyword} {fresh} ({body})"
    raise TypeError(f"not a formula: {f!r}")


def emit_external(story: FolStory, goal: Formula | None = None) -> str:
    """Render a story as an assumptions/goals problem file, one formula per line.

    ``goal`` overrides the story conclusion (used for the negated-goal run).
    Xor is desugared to its either/or form since the external syntax has no
    xor connective; equality is emitted as infix ``=``.
    """
    goal = story.conclusion if goal is None else goal
    names = _ExternalNames(symbol_table(list(story.premises) + [goal]).all_names())
    lines = ["formulas(assumptions)."]
    for premise in story.premises:
        lines.append(f"  {_external_formula(premise, names, {}, 0)}.")
    lines.append("end_of_list.")
    lines.append("")
    lines.append("formulas(goals).")
    lines.append(f"  {_external_formula(goal, names, {}, 0)}.")
    lines.append("end_of_list.")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Cross-check against the external binary
# ---------------------------------------------------------------------------

PROVED_MARKER = "THEOREM PROVED"
FAILED_MARKER = "SEARCH FAILED"


@dataclass(frozen=True)
class CrossCheckRow:
    story_id: str
    internal: Label
    external: Label
    agree: bool


@dataclass(frozen=True)
class AgreementReport:
    rows: tuple[CrossCheckRow, ...]
    agreement_rate: float | None
    skipped: bool = False
    reason: str | None = None

    def format_table(self) -> str:
        if self.skipped:
            return f"cross-check skipped: {self.reason}"
        lines = [f"{'story':<24} {'internal':<12} {'external':<12} agree"]
        for row in self.rows:
            lines.append(
                f"{row.story_id:<24} {row.internal.value:<12} {row.external.value:<12} "
                f"{'yes' if row.agree else 'NO'}"
            )
        if self.agreement_rate is not None:
            lines.append(f"agreement: {self.agreement_rate * 100:.1f}%")
        return "\n".join(lines)


def _run_external(binary: str, problem: str, timeout: float) -> bool | None:
    """Run the external prover on one problem file.

    Returns True when it proves the goal, False when the search fails, and
    None when the process times out or produces no recognizable marker.
    """
    with tempfile.NamedTemporaryFile("w", suffix=".in", delete=False) as handle:
        handle.write(problem)
        path = handle.name
    try:
        proc = subprocess.run(
            [binary, "-f", path],
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired:
        return None
    except OSError as exc:
        log.warning("external prover failed to run: %s", exc)
        return None
    finally:
        os.unlink(path)
    output = proc.stdout + proc.stderr
    if PROVED_MARKER in output:
        return True
    if FAILED_MARKER in output:
        return False
    return None


def _external_label(binary: str, story: FolStory, budget: Budget) -> Label:
    entailed = _run_external(binary, emit_external(story), budget.max_seconds)
    contradicted = _run_external(
        binary, emit_external(story, goal=Not(story.conclusion)), budget.max_seconds
    )
    if entailed and contradicted:
        return Label.ERROR
    if entailed:
        return Label.TRUE
    if contradicted:
        return Label.FALSE
    return Label.UNCERTAIN


def cross_check(
    stories: Sequence[tuple[str, FolStory]],
    budget: Budget = DEFAULT_BUDGET,
    external_binary_path: str = "prover9",
    max_workers: int = 4,
) -> AgreementReport:
    """Compare internal labels with an external prover's labels per story.

    A missing binary yields a report marked skipped rather than a failure.
    """
    binary = shutil.which(external_binary_path) or (
        external_binary_path if os.path.isfile(external_binary_path) else None
    )
    if binary is None:
        return AgreementReport(
            rows=(),
            agreement_rate=None,
            skipped=True,
            reason=f"external binary {external_binary_path!r} not found",
        )
    if not stories:
        return AgreementReport(rows=(), agreement_rate=None)

    def check_one(item: tuple[str, FolStory]) -> CrossCheckRow:
        story_id, story = item
        internal = classify(story, budget).label
        external = _external_label(binary, story, budget)
        return CrossCheckRow(story_id, internal, external, internal == external)

    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        rows = tuple(pool.map(check_one, stories))
    rate = sum(1 for r in rows if r.agree) / len(rows)
    return AgreementReport(rows=rows, agreement_rate=rate)
